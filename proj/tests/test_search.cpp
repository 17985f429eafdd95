#include <set>

#include <gtest/gtest.h>

#include "cholsel/experiments.hpp"
#include "cholsel/search.hpp"

using namespace cholsel;

namespace {

struct Instance {
  Truth truth;
  SampleStats stats;
  Hyperparameters hyper;
};

Instance small_instance(std::uint64_t seed, int p = 5, int n = 200, double sparsity = 0.2,
                        PriorKind kind = PriorKind::beta_mixture) {
  const auto sim = simulate_instance(p, n, sparsity, 0.5, seed, 0);
  Instance in{sim.truth, {}, Hyperparameters::simulation_defaults(n, p, kind)};
  in.stats = sample_covariance(sim.Y, in.hyper.tau_sq);
  return in;
}

SearchConfig quick_config() {
  SearchConfig cfg;
  cfg.sss_iterations = 200;
  cfg.sss_top_m = 5;
  return cfg;
}

}  // namespace

TEST(SearchConfig, Validation) {
  SearchConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.grid_size(), 4000u);
  cfg.grid_start = 0.6;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.grid_step = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.ridge = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(ThresholdCandidates, ZeroCovarianceGivesOnlyEmptyPattern) {
  const auto st = stats_from_covariance(10, Eigen::MatrixXd::Zero(4, 4), 1.0);
  const auto cands = threshold_candidates(st, SearchConfig{}, 5);
  ASSERT_EQ(cands.size(), 1u);
  EXPECT_EQ(cands[0].pattern.edge_count(), 0u);
  EXPECT_FALSE(cands[0].truncated);
}

TEST(ThresholdCandidates, NestedAndBoundedByDistinctMagnitudes) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto in = small_instance(seed, 20, 30, 0.1);
    SearchConfig cfg;
    const auto cands = threshold_candidates(in.stats, cfg, 100);

    const Eigen::MatrixXd W = (in.stats.S + cfg.ridge * Eigen::MatrixXd::Identity(20, 20)).inverse();
    const auto f = modified_cholesky(W);
    std::set<double> mags;
    for (int j = 0; j < 19; ++j)
      for (int k = j + 1; k < 20; ++k) mags.insert(std::abs(f.L(k, j)));
    EXPECT_LE(cands.size(), mags.size() + 1);

    for (std::size_t i = 1; i < cands.size(); ++i) {
      EXPECT_TRUE(cands[i].pattern.is_subset_of(cands[i - 1].pattern));
      EXPECT_GT(cands[i].threshold, cands[i - 1].threshold);
      EXPECT_FALSE(cands[i].pattern == cands[i - 1].pattern);
    }
    // Each candidate is exactly the thresholded factor at its grid value.
    for (const auto& c : cands) EXPECT_EQ(c.pattern, pattern_of_factor(f, c.threshold));
  }
}

TEST(ThresholdCandidates, TruncatesOverCapColumns) {
  const auto in = small_instance(3, 20, 30, 0.3);
  const auto cands = threshold_candidates(in.stats, SearchConfig{}, 1);
  bool any = false;
  for (const auto& c : cands) {
    EXPECT_LE(c.pattern.max_support(), 1u);
    any = any || c.truncated;
  }
  EXPECT_TRUE(any);
}

TEST(Exhaustive, TwoVariablesComparesBothPatterns) {
  const auto in = small_instance(4, 2, 50, 0.9);
  const auto all = enumerate_scores(in.stats, in.hyper);
  ASSERT_EQ(all.size(), 2u);
  const auto best = exhaustive_mode(in.stats, in.hyper);
  const double diff = all[1].total - all[0].total;
  EXPECT_EQ(best.pattern.edge_count(), diff > 0 ? 1u : 0u);
}

TEST(Exhaustive, EmptyTruthWinsWithLargeSample) {
  Rng rng(17);
  const Eigen::MatrixXd Y = sample_gaussian(CholeskyFactor::identity(3), 5000, rng);
  const auto h = Hyperparameters::simulation_defaults(5000, 3, PriorKind::beta_mixture);
  const auto st = sample_covariance(Y, h.tau_sq);
  EXPECT_EQ(exhaustive_mode(st, h).pattern.edge_count(), 0u);
}

TEST(Exhaustive, GuardRejectsLargeSpaces) {
  const auto in = small_instance(1, 7, 30, 0.1);
  EXPECT_THROW(exhaustive_mode(in.stats, in.hyper), InvalidArgument);
}

TEST(Sss, FixedPointAtGlobalOptimum) {
  const auto in = small_instance(5);
  const auto best = exhaustive_mode(in.stats, in.hyper);
  const auto res = sss_refine({best.pattern}, in.stats, in.hyper, quick_config());
  EXPECT_EQ(res.moves, 0u);
  EXPECT_EQ(res.best.pattern, best.pattern);
  EXPECT_EQ(res.best.total, best.total);
}

TEST(Sss, ContractsOnSmallInstances) {
  int matches = 0;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const auto in = small_instance(seed);
    const auto exh = exhaustive_mode(in.stats, in.hyper);
    const auto res = sss_refine({SparsityPattern(5)}, in.stats, in.hyper, quick_config());
    EXPECT_LE(res.best.total, exh.total + 1e-9 * std::abs(exh.total));
    if (std::abs(res.best.total - exh.total) <= 1e-9 * std::abs(exh.total)) ++matches;
    ASSERT_FALSE(res.top_m.empty());
    EXPECT_EQ(res.best.pattern, res.top_m.front().pattern);
    for (std::size_t i = 1; i < res.top_m.size(); ++i) EXPECT_GE(res.top_m[i - 1].total, res.top_m[i].total);
    for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_GE(res.trace[i], res.trace[i - 1]);
    std::set<std::uint64_t> distinct;
    for (const auto& s : res.top_m) distinct.insert(s.pattern.hash());
    EXPECT_EQ(distinct.size(), res.top_m.size());
  }
  EXPECT_GE(matches, 13);
}

TEST(Sss, TopModelsScoresAreExact) {
  const auto in = small_instance(21, 8, 60, 0.2);
  const auto res = sss_refine({SparsityPattern(8)}, in.stats, in.hyper, quick_config());
  const Scorer scorer(in.stats, in.hyper);
  for (const auto& s : res.top_m) {
    const auto direct = scorer.score(s.pattern);
    EXPECT_NEAR(s.total, direct.total, 1e-9 * std::abs(direct.total));
    EXPECT_NEAR(s.prior_term, direct.prior_term, 1e-9 * std::abs(direct.prior_term));
  }
}

TEST(Sss, SeedDuplicationIsIdempotent) {
  const auto in = small_instance(6, 10, 40, 0.15);
  const auto a = SparsityPattern::from_edges(10, std::vector<Edge>{{1, 0}});
  const auto b = SparsityPattern::from_edges(10, std::vector<Edge>{{9, 8}, {5, 2}});
  const auto once = sss_refine({a, b}, in.stats, in.hyper, quick_config());
  const auto twice = sss_refine({a, b, a, b, b}, in.stats, in.hyper, quick_config());
  ASSERT_EQ(once.top_m.size(), twice.top_m.size());
  for (std::size_t i = 0; i < once.top_m.size(); ++i) {
    EXPECT_EQ(once.top_m[i].pattern, twice.top_m[i].pattern);
    EXPECT_EQ(once.top_m[i].total, twice.top_m[i].total);
  }
}

TEST(Sss, RespectsColumnCap) {
  auto in = small_instance(7, 12, 60, 0.3);
  in.hyper.max_col_support = 2;
  const auto res = sss_refine({SparsityPattern(12)}, in.stats, in.hyper, quick_config());
  for (const auto& s : res.top_m) EXPECT_LE(s.pattern.max_support(), 2u);
}

TEST(Sss, SubsampledSwapsAreDeterministic) {
  // p = 40 with dense columns pushes the swap neighborhood past 10 p.
  auto in = small_instance(8, 40, 30, 0.3);
  in.hyper.max_col_support = 30;
  std::vector<Edge> edges;
  for (int k = 1; k < 25; ++k) edges.push_back({k, 0});
  const auto seed = SparsityPattern::from_edges(40, edges);
  auto cfg = quick_config();
  cfg.sss_iterations = 20;
  const auto r1 = sss_refine({seed}, in.stats, in.hyper, cfg);
  const auto r2 = sss_refine({seed}, in.stats, in.hyper, cfg);
  EXPECT_EQ(r1.best.pattern, r2.best.pattern);
  EXPECT_EQ(r1.trace, r2.trace);
  cfg.seed = 99;
  const auto r3 = sss_refine({seed}, in.stats, in.hyper, cfg);
  EXPECT_TRUE(std::isfinite(r3.best.total));
}

TEST(Sss, ThreadCountDoesNotChangeResult) {
  const auto in = small_instance(9, 30, 40, 0.1);
  auto cfg = quick_config();
  const auto serial = select_pattern(in.stats, in.hyper, cfg);
  cfg.threads = 4;
  const auto threaded = select_pattern(in.stats, in.hyper, cfg);
  ASSERT_EQ(serial.search.top_m.size(), threaded.search.top_m.size());
  for (std::size_t i = 0; i < serial.search.top_m.size(); ++i) {
    EXPECT_EQ(serial.search.top_m[i].pattern, threaded.search.top_m[i].pattern);
    EXPECT_EQ(serial.search.top_m[i].total, threaded.search.top_m[i].total);
  }
  EXPECT_EQ(serial.search.trace, threaded.search.trace);
}

TEST(Sss, MultiplicativePriorNeverBeatsExhaustive) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto in = small_instance(seed, 4, 150, 0.3, PriorKind::multiplicative);
    const auto exh = exhaustive_mode(in.stats, in.hyper);
    const auto res = sss_refine({SparsityPattern(4)}, in.stats, in.hyper, quick_config());
    EXPECT_LE(res.best.total, exh.total + 1e-9 * std::abs(exh.total));
  }
}

TEST(SelectPattern, BestIsAtLeastAsGoodAsEveryThresholdCandidate) {
  const auto in = small_instance(10, 25, 40, 0.1);
  const auto cfg = quick_config();
  const auto out = select_pattern(in.stats, in.hyper, cfg);
  const Scorer scorer(in.stats, in.hyper);
  for (const auto& c : threshold_candidates(in.stats, cfg, in.hyper.max_col_support))
    EXPECT_GE(out.search.best.total, scorer.score(c.pattern).total);
  EXPECT_GT(out.threshold_count, 0u);
}
