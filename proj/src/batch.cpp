#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <thread>

#include "kamp/pipeline.hpp"

namespace kamp {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

KampResult<double> run_method(const PointPattern<double>& pp, const RunConfig& cfg, const RadiusGrid<double>& grid,
                              Method m, std::uint64_t seed) {
  switch (m) {
    case Method::Kamp: return run_kamp(pp, cfg.query, grid, cfg.correction);
    case Method::KampLite: return run_kamp_lite(pp, cfg.query, grid, cfg.correction, cfg.thin_prob, seed);
    case Method::Perm: return perm_null(pp, cfg.query, grid, cfg.correction, cfg.permutations, seed).result;
    case Method::TheoreticalCsr: return run_theoretical(pp, cfg.query, grid, cfg.correction);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

}  // namespace

std::uint64_t method_seed(std::uint64_t sample_seed, Method m) { return derive_seed(sample_seed, to_string(m)); }

SampleRun run_sample(const Sample& sample, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  SampleRun run;
  run.sample_id = sample.id;
  run.n_cells = sample.size();
  run.seed = derive_seed(cfg.seed, sample.id);

  auto fail_all = [&](ErrorCode code, const std::string& msg) {
    for (Method m : cfg.methods) run.failures.push_back({sample.id, std::string(to_string(m)), code, one_line(msg)});
  };
  try {
    if (sample.size() < 2)
      throw Error(ErrorCode::InsufficientPoints, "sample has " + std::to_string(sample.size()) + " cell(s)");
    const PointPattern<double> pp = sample.pattern();
    const RadiusGrid<double> grid = cfg.grid_for(pp.window);
    for (Method m : cfg.methods) {
      try {
        KampResult<double> r = run_method(pp, cfg, grid, m, method_seed(run.seed, m));
        r.sample_id = sample.id;
        run.results.push_back(std::move(r));
      } catch (const Error& e) {
        run.failures.push_back({sample.id, std::string(to_string(m)), e.code(), one_line(e.what())});
      }
    }
  } catch (const Error& e) {
    fail_all(e.code(), e.what());
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

BatchOutput run_batch(const CellTable& table, const RunConfig& cfg) {
  cfg.validate();
  BatchOutput out;
  out.samples.resize(table.samples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < table.samples.size();) {
      try {
        out.samples[k] = run_sample(table.samples[k], cfg);
      } catch (const std::exception& e) {
        SampleRun run;
        run.sample_id = table.samples[k].id;
        run.n_cells = table.samples[k].size();
        for (Method m : cfg.methods)
          run.failures.push_back({run.sample_id, std::string(to_string(m)), ErrorCode::InternalConsistency,
                                  one_line(e.what())});
        out.samples[k] = std::move(run);
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(
      std::max(1, std::min<int>(cfg.threads, static_cast<int>(std::max<std::size_t>(1, table.samples.size())))));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

std::vector<ResultRow> rows_for(const KampResult<double>& r, Index n_cells) {
  std::vector<ResultRow> rows;
  const std::string method(to_string(r.method));
  const std::string marked =
      r.query.is_bivariate() ? std::to_string(r.m1) + ":" + std::to_string(r.m2) : std::to_string(r.m1);
  const bool has_variance = r.variance_defined.size() == r.grid.size();
  for (Index k = 0; k < r.grid.size(); ++k) {
    ResultRow row;
    row.sample_id = r.sample_id;
    row.method = method;
    row.r = r.grid.radii[k];
    row.khat = r.k_hat[k];
    row.expectation = r.expectation[k];
    if (has_variance && r.variance_defined[k]) row.variance = r.variance[k];
    if (r.z_defined.size() && r.z_defined[k]) row.z = r.z[k];
    if (r.p_defined.size() && r.p_defined[k]) row.pvalue = r.p_value[k];
    row.ktilde = r.k_tilde[k];
    row.n_cells = n_cells;
    row.n_marked = marked;
    row.seed = r.seed;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> BatchOutput::rows() const {
  std::vector<ResultRow> all;
  for (const auto& s : samples)
    for (const auto& r : s.results) {
      auto rows = rows_for(r, s.n_cells);
      all.insert(all.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
    }
  return all;
}

std::vector<SampleFailure> BatchOutput::failures() const {
  std::vector<SampleFailure> all;
  for (const auto& s : samples) all.insert(all.end(), s.failures.begin(), s.failures.end());
  return all;
}

void write_batch(const BatchOutput& out, const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + cfg.out_dir.string() + ": " + ec.message());

  auto open = [&](const char* name) {
    std::ofstream f(cfg.out_dir / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + (cfg.out_dir / name).string());
    return f;
  };
  {
    auto f = open("results.tsv");
    write_results_tsv(f, out.rows());
  }
  {
    auto f = open("failures.tsv");
    f << "sample_id\tmethod\terror\tmessage\n";
    for (const auto& x : out.failures())
      f << x.sample_id << '\t' << x.method << '\t' << to_string(x.code) << '\t' << x.message << '\n';
  }
  nlohmann::json meta;
  meta["tool"] = "kamp";
  meta["version"] = kVersion;
  meta["compiler"] = __VERSION__;
  meta["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                  std::to_string(EIGEN_MINOR_VERSION);
  meta["written_at_unix"] = static_cast<std::int64_t>(std::time(nullptr));
  meta["config"] = to_json(cfg);
  meta["samples"] = nlohmann::json::array();
  double total = 0;
  for (const auto& s : out.samples) {
    meta["samples"].push_back({{"sample_id", s.sample_id},
                               {"n_cells", s.n_cells},
                               {"seed", s.seed},
                               {"seconds", s.seconds},
                               {"results", s.results.size()},
                               {"failures", s.failures.size()}});
    total += s.seconds;
  }
  meta["total_sample_seconds"] = total;
  auto f = open("metadata.json");
  f << meta.dump(2) << '\n';
}

}  // namespace kamp
