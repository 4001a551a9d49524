#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "kamp/pipeline.hpp"

using namespace kamp;
using nlohmann::json;

namespace {

int report_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"status", "error"}, {"code", code}, {"message", message}}.dump() << '\n';
  return 1;
}

std::vector<double> parse_reals(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "not a number: '" + item + "'");
    }
  }
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, path + ": " + e.what());
  }
}

struct RunFlags {
  std::string input, config, windows, methods, mark, mark1, mark2, correction, out;
  std::optional<double> rmax, rstep, thin;
  std::optional<Index> perms;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

int do_run(const RunFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = config_from_json(read_json(f.config));
  if (!f.input.empty()) cfg.input = f.input;
  if (!f.windows.empty()) cfg.window_file = f.windows;
  if (!f.methods.empty()) cfg.methods = parse_method_list(f.methods);
  if (!f.mark.empty()) cfg.query = MarkQuery::univariate(f.mark);
  if (!f.mark1.empty() || !f.mark2.empty()) {
    if (f.mark1.empty() || f.mark2.empty())
      throw Error(ErrorCode::InvalidArgument, "--mark1 and --mark2 must be given together");
    cfg.query = MarkQuery::bivariate(f.mark1, f.mark2);
  }
  if (f.rmax) cfg.r_max = f.rmax;
  if (f.rstep) cfg.r_step = f.rstep;
  if (!f.correction.empty()) cfg.correction = parse_edge_correction(f.correction);
  if (f.thin) cfg.thin_prob = *f.thin;
  if (f.perms) cfg.permutations = *f.perms;
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!cfg.input) throw Error(ErrorCode::InvalidArgument, "no input table (--input or config 'input')");
  cfg.validate();

  CellTable table = ingest_csv(*cfg.input, cfg.schema);
  if (cfg.window_file) attach_windows(table, read_windows(*cfg.window_file));
  const BatchOutput out = run_batch(table, cfg);
  write_batch(out, cfg);
  const auto failures = out.failures();
  std::cout << json{{"status", "ok"},
                    {"samples", out.samples.size()},
                    {"rows", out.rows().size()},
                    {"failures", failures.size()},
                    {"out", cfg.out_dir.string()}}
                   .dump()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation-moment inference for Ripley's K on cell tables"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run = app.add_subcommand("run", "ingest a cell table and run the batch");
  run->add_option("--input", rf.input, "cell table (csv/tsv)");
  run->add_option("--config", rf.config, "JSON run config; flags override it");
  run->add_option("--windows", rf.windows, "window file: sample_id,x_min,x_max,y_min,y_max");
  run->add_option("--methods", rf.methods, "comma list of kamp,kamp_lite,perm,k_theoretical");
  run->add_option("--mark", rf.mark, "univariate mark label");
  run->add_option("--mark1", rf.mark1, "bivariate first mark");
  run->add_option("--mark2", rf.mark2, "bivariate second mark");
  run->add_option("--rmax", rf.rmax);
  run->add_option("--rstep", rf.rstep);
  run->add_option("--correction", rf.correction, "translation|none");
  run->add_option("--thin", rf.thin, "kamp_lite keep probability");
  run->add_option("--perms", rf.perms, "permutations for perm");
  run->add_option("--seed", rf.seed);
  run->add_option("--threads", rf.threads);
  run->add_option("--out", rf.out, "output directory");

  std::string sim_config, sim_condition = "hom_null", sim_out = "kamp_sim";
  double sim_lambda = 2000, sim_p = 0.1, sim_p2 = 0;
  int sim_samples = 1;
  std::uint64_t sim_seed = 1;
  auto* sim = app.add_subcommand("simulate", "write simulated scenario samples as a cell table");
  sim->add_option("--config", sim_config, "JSON with a 'scenario' block");
  sim->add_option("--condition", sim_condition, "hom_null|inhom_null|hom_clustered|inhom_clustered");
  sim->add_option("--lambda", sim_lambda, "expected cells per sample");
  sim->add_option("--abundance", sim_p);
  sim->add_option("--abundance2", sim_p2, "second mark abundance (null conditions)");
  sim->add_option("--samples", sim_samples);
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out", sim_out, "output directory");

  std::string bench_config, bench_out, bench_lambdas, bench_abundances, bench_methods;
  std::optional<int> bench_reps;
  std::optional<Index> bench_perms;
  std::optional<std::uint64_t> bench_seed;
  auto* bench = app.add_subcommand("bench", "timing study over simulated scenarios");
  bench->add_option("--config", bench_config);
  bench->add_option("--lambdas", bench_lambdas, "comma list");
  bench->add_option("--abundances", bench_abundances, "comma list");
  bench->add_option("--replicates", bench_reps);
  bench->add_option("--methods", bench_methods);
  bench->add_option("--perms", bench_perms);
  bench->add_option("--seed", bench_seed);
  bench->add_option("--out", bench_out);

  std::string cov_input, cov_out;
  double cov_r = 0;
  auto* cov = app.add_subcommand("covariate", "per-sample degree of clustering at one radius");
  cov->add_option("--input", cov_input, "results.tsv from run")->required();
  cov->add_option("--r", cov_r, "radius on the result grid")->required();
  cov->add_option("--out", cov_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("invalid_argument", e.what());
  }

  try {
    if (*run) return do_run(rf);

    if (*sim) {
      SimScenario sc;
      if (!sim_config.empty()) {
        const json j = read_json(sim_config);
        sc = scenario_from_json(j.contains("scenario") ? j["scenario"] : j);
      }
      if (sim->count("--condition")) sc.condition = parse_condition(sim_condition);
      if (sim->count("--lambda")) sc.lambda_n = sim_lambda;
      if (sim->count("--abundance")) sc.abundance = sim_p;
      if (sim->count("--abundance2")) sc.abundance2 = sim_p2;
      if (sim->count("--seed")) sc.seed = sim_seed;
      sc.validate();
      std::filesystem::create_directories(sim_out);
      write_simulated_table(sc, sim_samples, std::filesystem::path(sim_out) / "cells.csv",
                            std::filesystem::path(sim_out) / "windows.csv");
      std::cout << json{{"status", "ok"}, {"samples", sim_samples}, {"out", sim_out}}.dump() << '\n';
      return 0;
    }

    if (*bench) {
      BenchConfig bc;
      if (!bench_config.empty()) bc = bench_config_from_json(read_json(bench_config));
      if (!bench_lambdas.empty()) bc.lambdas = parse_reals(bench_lambdas);
      if (!bench_abundances.empty()) bc.abundances = parse_reals(bench_abundances);
      if (bench_reps) bc.replicates = *bench_reps;
      if (!bench_methods.empty()) bc.methods = parse_method_list(bench_methods);
      if (bench_perms) bc.permutations = *bench_perms;
      if (bench_seed) bc.seed = *bench_seed;
      if (!bench_out.empty()) bc.out_dir = bench_out;
      const auto rows = run_benchmark(bc);
      write_benchmark(bc, rows);
      std::cout << json{{"status", "ok"}, {"timings", rows.size()}, {"out", bc.out_dir.string()}}.dump() << '\n';
      return 0;
    }

    if (*cov) {
      const auto rows = extract_covariate(read_results_tsv(std::filesystem::path(cov_input)), cov_r);
      if (cov_out.empty()) {
        write_covariates_tsv(std::cout, rows);
      } else {
        std::ofstream f(cov_out, std::ios::binary);
        if (!f) throw Error(ErrorCode::Io, "cannot write " + cov_out);
        write_covariates_tsv(f, rows);
      }
      return 0;
    }
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.code())), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
