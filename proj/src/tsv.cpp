#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "kamp/pipeline.hpp"
#include "text.hpp"

namespace kamp {

std::string format_real(double v) {
  if (v == 0) v = 0;  // drop the sign of -0
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

void write_results_tsv(std::ostream& out, const std::vector<ResultRow>& rows) {
  for (std::size_t k = 0; k < kResultColumns.size(); ++k) out << (k ? "\t" : "") << kResultColumns[k];
  out << '\n';
  for (const auto& r : rows) {
    out << r.sample_id << '\t' << r.method << '\t' << format_real(r.r) << '\t' << format_real(r.khat) << '\t'
        << format_optional(r.expectation) << '\t' << format_optional(r.variance) << '\t' << format_optional(r.z)
        << '\t' << format_optional(r.pvalue) << '\t' << format_optional(r.ktilde) << '\t' << r.n_cells << '\t'
        << r.n_marked << '\t' << (r.seed ? std::to_string(*r.seed) : "NA") << '\n';
  }
}

namespace {

std::optional<double> optional_field(const std::string& s, std::size_t line_no, const char* name) {
  if (s == "NA") return std::nullopt;
  auto v = text::parse_double(s);
  if (!v) throw Error(ErrorCode::ParseFailure, "line " + std::to_string(line_no) + ": bad " + name + " '" + s + "'");
  return v;
}

}  // namespace

std::vector<ResultRow> read_results_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseFailure, "results table is empty");
  const auto header = text::split(line, '\t');
  for (const auto& col : kResultColumns)
    if (std::find(header.begin(), header.end(), col) == header.end())
      throw Error(ErrorCode::MissingColumn, "results table lacks column '" + col + "'");
  auto idx = [&](const std::string& col) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), col) - header.begin());
  };
  const std::size_t c_sample = idx("sample_id"), c_method = idx("method"), c_r = idx("r"), c_khat = idx("khat"),
                    c_e = idx("expectation"), c_v = idx("variance"), c_z = idx("z"), c_p = idx("pvalue"),
                    c_kt = idx("ktilde"), c_n = idx("n_cells"), c_m = idx("n_marked"), c_seed = idx("seed");

  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() < header.size())
      throw Error(ErrorCode::ParseFailure, "line " + std::to_string(line_no) + ": too few fields");
    ResultRow r;
    r.sample_id = f[c_sample];
    r.method = f[c_method];
    const auto rr = optional_field(f[c_r], line_no, "r");
    const auto kh = optional_field(f[c_khat], line_no, "khat");
    if (!rr || !kh) throw Error(ErrorCode::ParseFailure, "line " + std::to_string(line_no) + ": r and khat are required");
    r.r = *rr;
    r.khat = *kh;
    r.expectation = optional_field(f[c_e], line_no, "expectation");
    r.variance = optional_field(f[c_v], line_no, "variance");
    r.z = optional_field(f[c_z], line_no, "z");
    r.pvalue = optional_field(f[c_p], line_no, "pvalue");
    r.ktilde = optional_field(f[c_kt], line_no, "ktilde");
    const auto n = text::parse_int<Index>(f[c_n]);
    if (!n) throw Error(ErrorCode::ParseFailure, "line " + std::to_string(line_no) + ": bad n_cells");
    r.n_cells = *n;
    r.n_marked = f[c_m];
    if (f[c_seed] != "NA") {
      const auto s = text::parse_int<std::uint64_t>(f[c_seed]);
      if (!s) throw Error(ErrorCode::ParseFailure, "line " + std::to_string(line_no) + ": bad seed");
      r.seed = *s;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> read_results_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return read_results_tsv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_covariates_tsv(std::ostream& out, const std::vector<CovariateRow>& rows) {
  out << "sample_id\tmethod\tr\tktilde\tpvalue\n";
  for (const auto& c : rows)
    out << c.sample_id << '\t' << c.method << '\t' << format_real(c.r) << '\t' << format_optional(c.ktilde) << '\t'
        << format_optional(c.pvalue) << '\n';
}

}  // namespace kamp
