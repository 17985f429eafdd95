#include <sstream>

#include <gtest/gtest.h>

#include "cholsel/experiments.hpp"
#include "cholsel/io.hpp"
#include "cli_runner.hpp"

using namespace cholsel;
namespace fs = std::filesystem;

TEST(FormatNumber, RoundTripsExactly) {
  Rng rng(3);
  std::normal_distribution<double> normal(0.0, 1e3);
  for (int i = 0; i < 2000; ++i) {
    const double v = normal(rng) * std::pow(10.0, i % 13 - 6);
    EXPECT_EQ(parse_number(format_number(v), "v"), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(-kNegInf), "inf");
  EXPECT_EQ(format_number(kNegInf), "-inf");
}

TEST(ParseNumber, StrictAboutTrailingText) {
  EXPECT_EQ(parse_number(" 2.5\r", "x"), 2.5);
  EXPECT_THROW(parse_number("2.5x", "x"), ParseError);
  EXPECT_THROW(parse_number("", "x"), ParseError);
  EXPECT_TRUE(looks_numeric("-1e-3"));
  EXPECT_FALSE(looks_numeric("y1"));
}

TEST(DataCsv, RoundTripWithHeader) {
  Rng rng(5);
  const Eigen::MatrixXd Y = sample_gaussian(CholeskyFactor::identity(4), 7, rng);
  std::stringstream ss;
  write_data_csv(ss, Y);
  EXPECT_EQ(ss.str().substr(0, 12), "y1,y2,y3,y4\n");
  const Eigen::MatrixXd back = read_data_csv(ss);
  EXPECT_TRUE(back.isApprox(Y, 0.0));
}

TEST(DataCsv, HeaderlessAndMalformed) {
  std::istringstream plain("1,2\n3,4\n");
  EXPECT_EQ(read_data_csv(plain).rows(), 2);
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(read_data_csv(ragged), ParseError);
  std::istringstream junk("a,b\n1,x\n");
  EXPECT_THROW(read_data_csv(junk), ParseError);
  std::istringstream empty("y1,y2\n");
  EXPECT_THROW(read_data_csv(empty), ParseError);
}

TEST(CsvTable, QuotesAndWidthChecks) {
  CsvTable t({"a", "b"});
  t.row().add("x,y").add(1.5);
  t.row().add("q\"t").add(std::size_t{3});
  EXPECT_EQ(t.str(), "a,b\n\"x,y\",1.5\n\"q\"\"t\",3\n");
  t.row().add("only");
  EXPECT_THROW(t.str(), Error);
}

TEST(Json, NonFiniteBecomesNull) {
  const auto in = simulate_instance(5, 20, 0.3, 0.5, 3, 0);
  auto h = Hyperparameters::simulation_defaults(20, 5, PriorKind::beta_mixture);
  h.max_col_support = 1;
  const auto st = sample_covariance(in.Y, h.tau_sq);
  const auto s = total_score(SparsityPattern::full(5), st, h);
  const auto j = to_json(s);
  EXPECT_TRUE(j["total"].is_null());
  EXPECT_TRUE(j["cap_violated"].get<bool>());
  EXPECT_EQ(j["edges"].get<std::size_t>(), 10u);
  EXPECT_EQ(pattern_from_string(j["pattern"].get<std::string>()), SparsityPattern::full(5));
}

TEST(EdgesCompact, OneBasedPairs) {
  const auto z = SparsityPattern::from_edges(5, std::vector<Edge>{{4, 0}, {2, 1}});
  EXPECT_EQ(edges_compact(z), "5:1 3:2");
  EXPECT_EQ(edges_compact(SparsityPattern(5)), "");
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testing_cli::scratch("io"); }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

TEST_F(Cli, SimulateThenScoreTruth) {
  auto r = testing_cli::run("simulate --p 12 --n 40 --sparsity 0.1 --seed 4 --out " + path("y.csv") + " --truth " +
                            path("z.txt"));
  ASSERT_EQ(r.status, 0);
  const auto Y = read_data_csv(path("y.csv"));
  EXPECT_EQ(Y.rows(), 40);
  EXPECT_EQ(Y.cols(), 12);
  const auto z = pattern_from_string(testing_cli::slurp(path("z.txt")));
  EXPECT_EQ(z.edge_count(), 7u);  // round(0.1 * 66)

  r = testing_cli::run("score --data " + path("y.csv") + " --pattern " + path("z.txt"));
  ASSERT_EQ(r.status, 0);
  const auto h = Hyperparameters::simulation_defaults(40, 12, PriorKind::beta_mixture);
  const double want = total_score(z, sample_covariance(Y, h.tau_sq), h).total;
  const auto line = r.out.substr(r.out.find('\n') + 1);
  std::vector<std::string> fields;
  std::stringstream ls(line);
  for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
  ASSERT_GE(fields.size(), 5u);
  EXPECT_EQ(parse_number(fields[4], "total"), want);
}

TEST_F(Cli, ConfigFileMergesUnderExplicitFlags) {
  testing_cli::spit(path("cfg.ini"), "# comment\np = 9\nsparsity = 0.1\nseed = 5\n");
  const auto base = testing_cli::run("simulate --p 9 --sparsity 0.1 --seed 5");
  const auto cfg = testing_cli::run("simulate --config " + path("cfg.ini"));
  ASSERT_EQ(base.status, 0);
  EXPECT_EQ(base.out, cfg.out);
  const auto override_seed = testing_cli::run("simulate --config " + path("cfg.ini") + " --seed 6");
  const auto direct = testing_cli::run("simulate --p 9 --sparsity 0.1 --seed 6");
  EXPECT_EQ(override_seed.out, direct.out);
  EXPECT_NE(override_seed.out, base.out);
}

TEST_F(Cli, SelectIsThreadInvariant) {
  ASSERT_EQ(testing_cli::run("simulate --p 20 --n 30 --sparsity 0.05 --out " + path("y.csv")).status, 0);
  const std::string args = "select --data " + path("y.csv") + " --sss-iters 100";
  const auto a = testing_cli::run(args);
  const auto b = testing_cli::run(args + " --threads 3");
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.rfind("rank,edges,total,prior,likelihood,pattern\n", 0), 0u);
}

TEST_F(Cli, ErrorsExitNonZero) {
  EXPECT_NE(testing_cli::run("score --data " + path("missing.csv") + " --pattern " + path("none.txt")).status, 0);
  EXPECT_NE(testing_cli::run("simulate").status, 0);
  EXPECT_NE(testing_cli::run("metrics --tp 1").status, 0);
}

TEST_F(Cli, MetricsFromCounts) {
  const auto r = testing_cli::run("metrics --tp 3 --fp 1 --fn 2 --tn 4");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("0.75"), std::string::npos);
  EXPECT_NE(r.out.find("0.59999999999999998"), std::string::npos);
}
