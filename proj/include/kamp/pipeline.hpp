#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kamp/kamp.hpp"

namespace kamp {

// ---------------------------------------------------------------- ingestion

struct SchemaMapping {
  std::string sample_column{"sample_id"};
  std::string x_column{"x"};
  std::string y_column{"y"};
  // First header match wins.
  std::vector<std::string> type_columns{"cell_type", "phenotype"};
  std::optional<char> delimiter;  // sniffed from the header when unset
};

struct Sample {
  std::string id;
  Points<double> xy;
  std::vector<std::string> types;
  std::optional<Window<double>> window;

  Index size() const { return xy.rows(); }
  PointPattern<double> pattern() const;
};

/// Samples ordered by id.
struct CellTable {
  std::vector<Sample> samples;

  std::size_t total_cells() const;
  const Sample* find(const std::string& id) const;
};

CellTable ingest_csv(const std::filesystem::path& path, const SchemaMapping& schema = {});
CellTable parse_csv(std::istream& in, const SchemaMapping& schema = {});

/// Window file columns: sample_id, x_min, x_max, y_min, y_max.
std::map<std::string, Window<double>> read_windows(const std::filesystem::path& path);
void attach_windows(CellTable& table, const std::map<std::string, Window<double>>& windows);

// ------------------------------------------------------------------- config

struct RunConfig {
  std::vector<Method> methods{Method::Kamp};
  MarkQuery query{MarkQuery::univariate(kImmune)};
  std::optional<double> r_max;   // default: a quarter of the shorter window side
  std::optional<double> r_step;  // default: 100 equal steps
  std::vector<double> radii;     // explicit grid; overrides r_max / r_step
  EdgeCorrection correction{EdgeCorrection::Translation};
  double thin_prob{0.5};
  Index permutations{1000};
  std::uint64_t seed{1};
  int threads{1};
  std::filesystem::path out_dir{"kamp_out"};
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> window_file;
  SchemaMapping schema;

  void validate() const;
  RadiusGrid<double> grid_for(const Window<double>& w) const;
};

RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

std::vector<Method> parse_method_list(const std::string& csv);

// ------------------------------------------------------------------ results

/// One output line; undefined statistics are empty optionals.
struct ResultRow {
  std::string sample_id;
  std::string method;
  double r{0};
  double khat{0};
  std::optional<double> expectation, variance, z, pvalue, ktilde;
  Index n_cells{0};
  std::string n_marked;
  std::optional<std::uint64_t> seed;
};

inline const std::vector<std::string> kResultColumns{"sample_id", "method",   "r",      "khat",
                                                     "expectation", "variance", "z",   "pvalue",
                                                     "ktilde",    "n_cells",  "n_marked", "seed"};

std::string format_real(double v);
std::string format_optional(const std::optional<double>& v);

void write_results_tsv(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_tsv(std::istream& in);
std::vector<ResultRow> read_results_tsv(const std::filesystem::path& path);

// -------------------------------------------------------------------- batch

struct SampleFailure {
  std::string sample_id;
  std::string method;
  ErrorCode code;
  std::string message;
};

struct SampleRun {
  std::string sample_id;
  Index n_cells{0};
  std::uint64_t seed{0};
  std::vector<KampResult<double>> results;  // config method order
  std::vector<SampleFailure> failures;
  double seconds{0};
};

struct BatchOutput {
  std::vector<SampleRun> samples;  // ordered by sample id

  std::vector<ResultRow> rows() const;
  std::vector<SampleFailure> failures() const;
};

/// Per-method seed within one sample: only kamp_lite and perm consume it.
std::uint64_t method_seed(std::uint64_t sample_seed, Method m);

SampleRun run_sample(const Sample& sample, const RunConfig& cfg);
BatchOutput run_batch(const CellTable& table, const RunConfig& cfg);

/// Writes results.tsv, failures.tsv and metadata.json into cfg.out_dir.
void write_batch(const BatchOutput& out, const RunConfig& cfg);

std::vector<ResultRow> rows_for(const KampResult<double>& r, Index n_cells);

// ---------------------------------------------------------------- covariate

struct CovariateRow {
  std::string sample_id;
  std::string method;
  double r{0};
  std::optional<double> ktilde;
  std::optional<double> pvalue;
};

/// One row per (sample, method) at r_star; throws RadiusNotOnGrid when any
/// group's grid misses r_star.
std::vector<CovariateRow> extract_covariate(const std::vector<ResultRow>& rows, double r_star);
void write_covariates_tsv(std::ostream& out, const std::vector<CovariateRow>& rows);

// ---------------------------------------------------------------- benchmark

struct BenchConfig {
  std::vector<double> lambdas{1000, 5000, 10000};
  std::vector<double> abundances{0.01, 0.1, 0.2};
  int replicates{50};
  Condition condition{Condition::HomNull};
  std::vector<Method> methods{Method::Kamp, Method::KampLite, Method::Perm};
  Index permutations{1000};
  double thin_prob{0.5};
  std::uint64_t seed{1};
  std::filesystem::path out_dir{"kamp_bench"};
};

struct TimingRow {
  double lambda_n{0};
  double abundance{0};
  int replicate{0};
  std::string method;
  Index n_cells{0};
  std::optional<double> seconds;  // empty when the run failed
  std::string error;
};

struct TimingSummary {
  double lambda_n{0};
  double abundance{0};
  std::string method;
  int runs{0};
  double median{0};
  double q25{0};
  double q75{0};
};

BenchConfig bench_config_from_json(const nlohmann::json& j, BenchConfig base = {});
std::vector<TimingRow> run_benchmark(const BenchConfig& cfg);
std::vector<TimingSummary> summarize_timings(const std::vector<TimingRow>& rows);
void write_benchmark(const BenchConfig& cfg, const std::vector<TimingRow>& rows);

// --------------------------------------------------------------- simulation

/// Writes n scenario samples as one cell table plus a window file.
void write_simulated_table(const SimScenario& base, int samples, const std::filesystem::path& csv_path,
                           const std::filesystem::path& window_path);
SimScenario scenario_from_json(const nlohmann::json& j, SimScenario base = {});

}  // namespace kamp
