#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kamp/pipeline.hpp"

namespace kamp {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("kamp_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

TEST(IngestTest, ThreeRowFixture) {
  std::istringstream in("sample_id,x,y,phenotype\ns1,0.1,0.2,immune\ns1,0.5,0.5,tumor\ns1,0.9,0.7,immune\n");
  auto t = parse_csv(in);
  ASSERT_EQ(t.samples.size(), 1u);
  EXPECT_EQ(t.samples[0].id, "s1");
  EXPECT_EQ(t.samples[0].size(), 3);
  EXPECT_EQ(t.samples[0].types[1], "tumor");
  EXPECT_DOUBLE_EQ(t.samples[0].xy(2, 1), 0.7);
}

TEST(IngestTest, TabDelimitedQuotedAndCrlf) {
  std::istringstream in("sample_id\tx\ty\tcell_type\r\n\"a b\"\t1\t2\tCD8+ T\r\n\"a b\"\t3\t4\t\"x\"\"y\"\r\n");
  auto t = parse_csv(in);
  ASSERT_EQ(t.samples.size(), 1u);
  EXPECT_EQ(t.samples[0].id, "a b");
  EXPECT_EQ(t.samples[0].types[0], "CD8+ T");
  EXPECT_EQ(t.samples[0].types[1], "x\"y");
}

TEST(IngestTest, CellTypePreferredOverPhenotype) {
  std::istringstream in("sample_id,x,y,phenotype,cell_type\ns,0,0,p,c\ns,1,1,p,c\n");
  EXPECT_EQ(parse_csv(in).samples[0].types[0], "c");
}

TEST(IngestTest, MalformedCoordinateNamesLine) {
  std::istringstream in("sample_id,x,y,phenotype\ns1,0.1,0.2,a\ns1,0.3,abc,a\ns1,0.5,0.5,a\n");
  try {
    parse_csv(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseFailure);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(IngestTest, MissingColumnAndEmpty) {
  std::istringstream missing("sample_id,x,phenotype\ns,1,a\n");
  try {
    parse_csv(missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
  }
  std::istringstream empty("sample_id,x,y,phenotype\n\n");
  try {
    parse_csv(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySample);
  }
  EXPECT_THROW(ingest_csv("/nonexistent/cells.csv"), Error);
}

TEST(IngestTest, CustomSchema) {
  std::istringstream in("img;cx;cy;label\nA;1;2;t\nB;3;4;u\nA;5;6;t\n");
  SchemaMapping s;
  s.sample_column = "img";
  s.x_column = "cx";
  s.y_column = "cy";
  s.type_columns = {"label"};
  auto t = parse_csv(in, s);
  ASSERT_EQ(t.samples.size(), 2u);
  EXPECT_EQ(t.find("A")->size(), 2);
  EXPECT_EQ(t.find("B")->size(), 1);
  EXPECT_EQ(t.find("C"), nullptr);
  EXPECT_EQ(t.total_cells(), 3u);
}

TEST(IngestTest, LargeSyntheticTableIsLossless) {
  TempDir dir;
  SimScenario sc;
  sc.lambda_n = 10373;
  sc.seed = 5;
  write_simulated_table(sc, 103, dir / "cells.csv", dir / "windows.csv");
  auto t = ingest_csv(dir / "cells.csv");
  attach_windows(t, read_windows(dir / "windows.csv"));
  EXPECT_EQ(t.samples.size(), 103u);
  std::size_t lines = 0;
  std::ifstream in(dir / "cells.csv");
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(t.total_cells(), lines - 1);
  for (const auto& s : t.samples) {
    ASSERT_TRUE(s.window.has_value());
    EXPECT_EQ(*s.window, (Window<double>{0, 10, 0, 10}));
  }
}

TEST(FormatTest, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(-0.0), "0");
  EXPECT_EQ(format_real(3), "3");
  const double v = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_real(v)), v);
  EXPECT_EQ(format_optional(std::nullopt), "NA");
}

TEST(ConfigTest, JsonRoundTripAndValidation) {
  auto cfg = config_from_json(nlohmann::json::parse(
      R"({"methods":["kamp","perm"],"mark1":"a","mark2":"b","rmax":2,"rstep":0.5,"perms":50,"seed":9,"correction":"none"})"));
  EXPECT_EQ(cfg.methods, (std::vector<Method>{Method::Kamp, Method::Perm}));
  EXPECT_TRUE(cfg.query.is_bivariate());
  EXPECT_EQ(cfg.permutations, 50);
  EXPECT_EQ(cfg.correction, EdgeCorrection::None);
  auto back = config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  const auto g = cfg.grid_for(Window<double>{0, 10, 0, 10});
  EXPECT_EQ(g.size(), 5);
  EXPECT_DOUBLE_EQ(g.max(), 2.0);

  RunConfig bad;
  bad.methods.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = RunConfig{};
  bad.methods = {Method::Perm};
  bad.permutations = 0;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"mark1":"a"})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"methods":"kamp,nope"})")), Error);
}

TEST(ConfigTest, DefaultGridAndTranslationGuard) {
  RunConfig cfg;
  const auto g = cfg.grid_for(Window<double>{0, 10, 0, 8});
  EXPECT_EQ(g.size(), 101);
  EXPECT_DOUBLE_EQ(g.max(), 2.0);
  EXPECT_EQ(g.radii[48], 0.96);
  cfg.r_max = 4.5;
  try {
    cfg.grid_for(Window<double>{0, 10, 0, 8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RadiusOutOfRange);
  }
}

CellTable two_samples() {
  CellTable t;
  for (std::uint64_t s : {1u, 2u}) {
    SimScenario sc;
    sc.lambda_n = 400;
    sc.seed = s;
    auto pp = sim_hom_null(sc);
    Sample smp;
    smp.id = "s" + std::to_string(s);
    smp.xy = pp.xy;
    for (auto m : pp.marks) smp.types.push_back(pp.labels[static_cast<std::size_t>(m)]);
    smp.window = pp.window;
    t.samples.push_back(std::move(smp));
  }
  return t;
}

TEST(BatchTest, RowCardinality) {
  RunConfig cfg;
  cfg.methods = {Method::Kamp, Method::TheoreticalCsr};
  auto out = run_batch(two_samples(), cfg);
  const auto rows = out.rows();
  EXPECT_EQ(rows.size(), 2u * 2u * 101u);
  EXPECT_TRUE(out.failures().empty());
  EXPECT_EQ(rows.front().sample_id, "s1");
  EXPECT_EQ(rows.back().sample_id, "s2");
  EXPECT_EQ(rows.back().method, "k_theoretical");
  EXPECT_FALSE(rows.back().pvalue.has_value());
}

TEST(BatchTest, FailuresAreLoggedNotFatal) {
  auto t = two_samples();
  Sample tiny;
  tiny.id = "s0";
  tiny.xy.resize(1, 2);
  tiny.xy << 1, 1;
  tiny.types = {"immune"};
  t.samples.insert(t.samples.begin(), tiny);
  RunConfig cfg;
  cfg.methods = {Method::Kamp, Method::KampLite};
  cfg.query = MarkQuery::univariate("nope");
  auto out = run_batch(t, cfg);
  EXPECT_TRUE(out.rows().empty());
  EXPECT_EQ(out.failures().size(), 6u);
  cfg.query = MarkQuery::univariate(kImmune);
  out = run_batch(t, cfg);
  EXPECT_EQ(out.failures().size(), 2u);
  EXPECT_EQ(out.rows().size(), 2u * 2u * 101u);
}

TEST(BatchTest, ThreadsDoNotChangeOutput) {
  RunConfig cfg;
  cfg.methods = {Method::Kamp, Method::KampLite, Method::Perm};
  cfg.permutations = 50;
  const auto t = two_samples();
  std::ostringstream a, b;
  write_results_tsv(a, run_batch(t, cfg).rows());
  cfg.threads = 2;
  write_results_tsv(b, run_batch(t, cfg).rows());
  EXPECT_EQ(a.str(), b.str());
}

TEST(BatchTest, WriteAndReadBack) {
  TempDir dir;
  RunConfig cfg;
  cfg.methods = {Method::Kamp, Method::TheoreticalCsr};
  cfg.out_dir = dir.path();
  const auto out = run_batch(two_samples(), cfg);
  write_batch(out, cfg);
  EXPECT_TRUE(fs::exists(dir / "metadata.json"));
  EXPECT_TRUE(fs::exists(dir / "failures.tsv"));
  const auto rows = read_results_tsv(dir / "results.tsv");
  ASSERT_EQ(rows.size(), out.rows().size());
  std::ostringstream again;
  write_results_tsv(again, rows);
  EXPECT_EQ(again.str(), slurp(dir / "results.tsv"));
  const auto meta = nlohmann::json::parse(slurp(dir / "metadata.json"));
  EXPECT_EQ(meta["samples"].size(), 2u);
  EXPECT_EQ(meta["config"]["methods"][0], "kamp");
}

TEST(CovariateTest, OneRowPerSampleMethod) {
  RunConfig cfg;
  cfg.methods = {Method::Kamp, Method::TheoreticalCsr};
  const auto rows = run_batch(two_samples(), cfg).rows();
  const auto cov = extract_covariate(rows, 1.25);
  ASSERT_EQ(cov.size(), 4u);
  EXPECT_EQ(cov[0].sample_id, "s1");
  EXPECT_EQ(cov[0].method, "k_theoretical");
  EXPECT_FALSE(cov[0].pvalue.has_value());
  EXPECT_TRUE(cov[1].pvalue.has_value());
  std::ostringstream out;
  write_covariates_tsv(out, cov);
  EXPECT_NE(out.str().find("\tNA\n"), std::string::npos);
  try {
    extract_covariate(rows, 1.26);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RadiusNotOnGrid);
  }
}

TEST(CovariateTest, KampBelowCsrOnHoles) {
  // Holes inflate the naive comparator; the permutation null absorbs them.
  double kamp_sum = 0, csr_sum = 0;
  const auto grid = RadiusGrid<double>::uniform(2.5, 101);
  for (std::uint64_t s = 0; s < 20; ++s) {
    SimScenario sc;
    sc.condition = Condition::InhomClustered;
    sc.lambda_n = 2000;
    sc.seed = 40 + s;
    auto pp = simulate(sc);
    const auto q = MarkQuery::univariate(kImmune);
    kamp_sum += run_kamp(pp, q, grid, EdgeCorrection::Translation).k_tilde[50];
    csr_sum += run_theoretical(pp, q, grid, EdgeCorrection::Translation).k_tilde[50];
  }
  EXPECT_LT(kamp_sum, csr_sum);
}

TEST(BenchmarkTest, SmallStudy) {
  TempDir dir;
  BenchConfig bc;
  bc.lambdas = {500};
  bc.abundances = {0.1, 0.2};
  bc.replicates = 3;
  bc.permutations = 20;
  bc.out_dir = dir.path();
  const auto rows = run_benchmark(bc);
  EXPECT_EQ(rows.size(), 1u * 2u * 3u * 3u);
  for (const auto& r : rows) EXPECT_TRUE(r.seconds.has_value()) << r.error;
  const auto summary = summarize_timings(rows);
  EXPECT_EQ(summary.size(), 6u);
  for (const auto& s : summary) EXPECT_LE(s.q25, s.median);
  write_benchmark(bc, rows);
  EXPECT_TRUE(fs::exists(dir / "timings.tsv"));
  EXPECT_TRUE(fs::exists(dir / "timing_summary.tsv"));
}

int run_cli(const std::string& args) { return std::system((std::string(KAMP_CLI_PATH) + " " + args).c_str()); }

TEST(CliTest, SimulateRunCovariateDeterministic) {
  TempDir dir;
  const std::string d = dir.path().string();
  ASSERT_EQ(run_cli("simulate --condition inhom_null --samples 2 --lambda 600 --seed 3 --out " + d + "/sim >/dev/null"), 0);
  const std::string common = "run --input " + d + "/sim/cells.csv --windows " + d +
                             "/sim/windows.csv --methods kamp,kamp_lite,perm --perms 30 --seed 11 --mark immune";
  ASSERT_EQ(run_cli(common + " --out " + d + "/a >/dev/null"), 0);
  ASSERT_EQ(run_cli(common + " --threads 2 --out " + d + "/b >/dev/null"), 0);
  EXPECT_EQ(slurp(dir / "a/results.tsv"), slurp(dir / "b/results.tsv"));
  ASSERT_EQ(run_cli("covariate --input " + d + "/a/results.tsv --r 0.625 --out " + d + "/cov.tsv"), 0);
  std::istringstream cov(slurp(dir / "cov.tsv"));
  int lines = 0;
  for (std::string l; std::getline(cov, l);) ++lines;
  EXPECT_EQ(lines, 1 + 2 * 3);
}

TEST(CliTest, ErrorsExitNonzero) {
  TempDir dir;
  const std::string d = dir.path().string();
  EXPECT_NE(run_cli("run --input " + d + "/missing.csv 2>" + d + "/err.txt"), 0);
  const auto err = nlohmann::json::parse(slurp(dir / "err.txt"));
  EXPECT_EQ(err["code"], "io");
  spit(dir / "bad.csv", "sample_id,x,y,phenotype\ns,1,oops,a\n");
  EXPECT_NE(run_cli("run --input " + d + "/bad.csv 2>" + d + "/err2.txt"), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "err2.txt"))["code"], "parse_failure");
  EXPECT_NE(run_cli("run --methods bogus --input x 2>/dev/null"), 0);
  EXPECT_NE(run_cli("frobnicate 2>/dev/null"), 0);
}

}  // namespace
}  // namespace kamp
