#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>

#include "kamp/pipeline.hpp"

namespace kamp {

using nlohmann::json;

BenchConfig bench_config_from_json(const json& j, BenchConfig c) {
  try {
    if (j.contains("lambdas")) c.lambdas = j["lambdas"].get<std::vector<double>>();
    if (j.contains("abundances")) c.abundances = j["abundances"].get<std::vector<double>>();
    if (j.contains("replicates")) c.replicates = j["replicates"].get<int>();
    if (j.contains("condition")) c.condition = parse_condition(j["condition"].get<std::string>());
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("perms")) c.permutations = j["perms"].get<Index>();
    if (j.contains("thin")) c.thin_prob = j["thin"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad bench config value: ") + e.what());
  }
  return c;
}

std::vector<TimingRow> run_benchmark(const BenchConfig& cfg) {
  if (cfg.replicates < 1) throw Error(ErrorCode::InvalidArgument, "replicates must be at least 1");
  std::vector<TimingRow> rows;
  std::uint64_t scenario_index = 0;
  for (double lambda : cfg.lambdas) {
    for (double p : cfg.abundances) {
      for (int rep = 0; rep < cfg.replicates; ++rep, ++scenario_index) {
        SimScenario sc;
        sc.condition = cfg.condition;
        sc.lambda_n = lambda;
        sc.abundance = p;
        sc.seed = derive_seed(cfg.seed, scenario_index);
        const PointPattern<double> pp = simulate(sc);
        const auto grid = RadiusGrid<double>::default_for(pp.window);
        const auto q = MarkQuery::univariate(kImmune);
        for (Method m : cfg.methods) {
          TimingRow row{lambda, p, rep, std::string(to_string(m)), pp.size(), std::nullopt, ""};
          const std::uint64_t seed = derive_seed(sc.seed, to_string(m));
          const auto t0 = std::chrono::steady_clock::now();
          try {
            switch (m) {
              case Method::Kamp: run_kamp(pp, q, grid, EdgeCorrection::Translation); break;
              case Method::KampLite:
                run_kamp_lite(pp, q, grid, EdgeCorrection::Translation, cfg.thin_prob, seed);
                break;
              case Method::Perm: perm_null(pp, q, grid, EdgeCorrection::Translation, cfg.permutations, seed); break;
              case Method::TheoreticalCsr: run_theoretical(pp, q, grid, EdgeCorrection::Translation); break;
            }
            row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          } catch (const Error& e) {
            row.error = std::string(to_string(e.code()));
          }
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

namespace {

double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  return detail::quantile_sorted<double>(v, prob);
}

}  // namespace

std::vector<TimingSummary> summarize_timings(const std::vector<TimingRow>& rows) {
  std::map<std::tuple<double, double, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.lambda_n, r.abundance, r.method}];
    if (r.seconds) g.push_back(*r.seconds);
  }
  std::vector<TimingSummary> out;
  for (const auto& [key, secs] : groups) {
    TimingSummary s{std::get<0>(key), std::get<1>(key), std::get<2>(key), static_cast<int>(secs.size()), 0, 0, 0};
    if (!secs.empty()) {
      s.median = quantile(secs, 0.5);
      s.q25 = quantile(secs, 0.25);
      s.q75 = quantile(secs, 0.75);
    }
    out.push_back(s);
  }
  return out;
}

void write_benchmark(const BenchConfig& cfg, const std::vector<TimingRow>& rows) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + cfg.out_dir.string());
  std::ofstream t(cfg.out_dir / "timings.tsv", std::ios::binary);
  std::ofstream s(cfg.out_dir / "timing_summary.tsv", std::ios::binary);
  if (!t || !s) throw Error(ErrorCode::Io, "cannot write benchmark tables in " + cfg.out_dir.string());
  t << "lambda_n\tabundance\treplicate\tmethod\tn_cells\tseconds\terror\n";
  for (const auto& r : rows)
    t << format_real(r.lambda_n) << '\t' << format_real(r.abundance) << '\t' << r.replicate << '\t' << r.method << '\t'
      << r.n_cells << '\t' << format_optional(r.seconds) << '\t' << (r.error.empty() ? "NA" : r.error) << '\n';
  s << "lambda_n\tabundance\tmethod\truns\tmedian_seconds\tq25_seconds\tq75_seconds\tlog10_median\n";
  for (const auto& x : summarize_timings(rows))
    s << format_real(x.lambda_n) << '\t' << format_real(x.abundance) << '\t' << x.method << '\t' << x.runs << '\t'
      << format_real(x.median) << '\t' << format_real(x.q25) << '\t' << format_real(x.q75) << '\t'
      << (x.runs && x.median > 0 ? format_real(std::log10(x.median)) : "NA") << '\n';
}

SimScenario scenario_from_json(const json& j, SimScenario sc) {
  try {
    if (j.contains("condition")) sc.condition = parse_condition(j["condition"].get<std::string>());
    if (j.contains("lambda_n")) sc.lambda_n = j["lambda_n"].get<double>();
    if (j.contains("abundance")) sc.abundance = j["abundance"].get<double>();
    if (j.contains("abundance2")) sc.abundance2 = j["abundance2"].get<double>();
    if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("cluster_count")) sc.cluster_count = j["cluster_count"].get<int>();
    if (j.contains("cluster_radius")) sc.cluster_radius = j["cluster_radius"].get<double>();
    if (j.contains("hole_count")) sc.hole_count = j["hole_count"].get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad scenario value: ") + e.what());
  }
  return sc;
}

void write_simulated_table(const SimScenario& base, int samples, const std::filesystem::path& csv_path,
                           const std::filesystem::path& window_path) {
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  std::ofstream csv(csv_path, std::ios::binary);
  std::ofstream win(window_path, std::ios::binary);
  if (!csv || !win) throw Error(ErrorCode::Io, "cannot write simulated table");
  csv << "sample_id,x,y,cell_type\n";
  win << "sample_id,x_min,x_max,y_min,y_max\n";
  const int width = static_cast<int>(std::to_string(samples).size());
  for (int s = 0; s < samples; ++s) {
    SimScenario sc = base;
    sc.seed = derive_seed(base.seed, static_cast<std::uint64_t>(s));
    const PointPattern<double> pp = simulate(sc);
    std::string id = std::to_string(s + 1);
    id = "sim_" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    for (Index i = 0; i < pp.size(); ++i)
      csv << id << ',' << format_real(pp.xy(i, 0)) << ',' << format_real(pp.xy(i, 1)) << ','
          << pp.labels[static_cast<std::size_t>(pp.marks[static_cast<std::size_t>(i)])] << '\n';
    win << id << ',' << format_real(pp.window.x_min) << ',' << format_real(pp.window.x_max) << ','
        << format_real(pp.window.y_min) << ',' << format_real(pp.window.y_max) << '\n';
  }
}

}  // namespace kamp
