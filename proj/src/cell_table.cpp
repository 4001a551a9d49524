#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "kamp/pipeline.hpp"
#include "text.hpp"

namespace kamp {

PointPattern<double> Sample::pattern() const { return make_pattern(xy, types, window); }

std::size_t CellTable::total_cells() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += static_cast<std::size_t>(s.size());
  return n;
}

const Sample* CellTable::find(const std::string& id) const {
  auto it = std::lower_bound(samples.begin(), samples.end(), id,
                             [](const Sample& s, const std::string& key) { return s.id < key; });
  return it != samples.end() && it->id == id ? &*it : nullptr;
}

namespace {

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::MissingColumn, "missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::size_t type_column(const std::vector<std::string>& header, const std::vector<std::string>& candidates) {
  for (const auto& c : candidates) {
    auto it = std::find(header.begin(), header.end(), c);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  }
  std::string names;
  for (const auto& c : candidates) names += (names.empty() ? "" : "|") + c;
  throw Error(ErrorCode::MissingColumn, "missing cell type column (" + names + ")");
}

struct Accum {
  std::vector<double> x, y;
  std::vector<std::string> types;
};

}  // namespace

CellTable parse_csv(std::istream& in, const SchemaMapping& schema) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!text::trim(line).empty()) break;
  }
  if (text::trim(line).empty()) throw Error(ErrorCode::ParseFailure, "no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const char delim = schema.delimiter.value_or(text::sniff_delimiter(line));
  const auto header = text::split(line, delim);
  const std::size_t c_sample = column_index(header, schema.sample_column);
  const std::size_t c_x = column_index(header, schema.x_column);
  const std::size_t c_y = column_index(header, schema.y_column);
  const std::size_t c_type = type_column(header, schema.type_columns);
  const std::size_t need = std::max({c_sample, c_x, c_y, c_type}) + 1;

  std::map<std::string, Accum> groups;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, delim);
    const std::string where = "line " + std::to_string(line_no);
    if (f.size() < need)
      throw Error(ErrorCode::ParseFailure, where + ": expected at least " + std::to_string(need) + " fields, got " +
                                               std::to_string(f.size()));
    const auto x = text::parse_double(f[c_x]);
    const auto y = text::parse_double(f[c_y]);
    if (!x || !std::isfinite(*x)) throw Error(ErrorCode::ParseFailure, where + ": unparsable x '" + f[c_x] + "'");
    if (!y || !std::isfinite(*y)) throw Error(ErrorCode::ParseFailure, where + ": unparsable y '" + f[c_y] + "'");
    if (f[c_sample].empty()) throw Error(ErrorCode::ParseFailure, where + ": empty sample id");
    if (f[c_type].empty()) throw Error(ErrorCode::ParseFailure, where + ": empty cell type");
    Accum& a = groups[f[c_sample]];
    a.x.push_back(*x);
    a.y.push_back(*y);
    a.types.push_back(f[c_type]);
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::EmptySample, "table has a header but no cell rows");

  CellTable table;
  table.samples.reserve(groups.size());
  for (auto& [id, a] : groups) {
    Sample s;
    s.id = id;
    s.xy.resize(static_cast<Index>(a.x.size()), 2);
    for (std::size_t i = 0; i < a.x.size(); ++i) {
      s.xy(static_cast<Index>(i), 0) = a.x[i];
      s.xy(static_cast<Index>(i), 1) = a.y[i];
    }
    s.types = std::move(a.types);
    table.samples.push_back(std::move(s));
  }
  return table;
}

CellTable ingest_csv(const std::filesystem::path& path, const SchemaMapping& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return parse_csv(in, schema);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::map<std::string, Window<double>> read_windows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!text::trim(line).empty()) break;
  }
  const char delim = text::sniff_delimiter(line);
  const auto header = text::split(line, delim);
  const std::size_t c[5] = {column_index(header, "sample_id"), column_index(header, "x_min"),
                            column_index(header, "x_max"), column_index(header, "y_min"),
                            column_index(header, "y_max")};
  std::map<std::string, Window<double>> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, delim);
    double v[4];
    for (int k = 0; k < 4; ++k) {
      const std::size_t col = c[k + 1];
      const auto parsed = col < f.size() ? text::parse_double(f[col]) : std::nullopt;
      if (!parsed)
        throw Error(ErrorCode::ParseFailure, path.string() + ": line " + std::to_string(line_no) + ": unparsable " +
                                                 header[col]);
      v[k] = *parsed;
    }
    out[f[c[0]]] = Window<double>::make(v[0], v[1], v[2], v[3]);
  }
  return out;
}

void attach_windows(CellTable& table, const std::map<std::string, Window<double>>& windows) {
  for (auto& s : table.samples) {
    auto it = windows.find(s.id);
    if (it != windows.end()) s.window = it->second;
  }
}

}  // namespace kamp
