#include <set>

#include <gtest/gtest.h>

#include "cholsel/pattern.hpp"

using namespace cholsel;

TEST(Positions, RoundTripColumnMajor) {
  for (int p : {2, 3, 7, 20}) {
    std::size_t expected = 0;
    for (int j = 0; j < p - 1; ++j)
      for (int k = j + 1; k < p; ++k) {
        EXPECT_EQ(position_of(p, {k, j}), expected);
        EXPECT_EQ(edge_at(p, expected), (Edge{k, j}));
        ++expected;
      }
    EXPECT_EQ(expected, position_count(p));
  }
}

TEST(SparsityPattern, RejectsInvalidSupports) {
  EXPECT_THROW(SparsityPattern(1), InvalidArgument);
  EXPECT_THROW(SparsityPattern(3, {{0}, {}}), InvalidArgument);     // row == col
  EXPECT_THROW(SparsityPattern(3, {{3}, {}}), InvalidArgument);     // row >= p
  EXPECT_THROW(SparsityPattern(4, {{2, 1}, {}, {}}), InvalidArgument);  // unsorted
  EXPECT_THROW(SparsityPattern(4, {{1, 1}, {}, {}}), InvalidArgument);  // duplicate
  EXPECT_THROW(SparsityPattern(4, {{1}, {}}), InvalidArgument);     // wrong column count
  EXPECT_THROW(SparsityPattern::from_edges(4, std::vector<Edge>{{1, 0}, {1, 0}}), InvalidArgument);
}

TEST(SparsityPattern, CountsAndEdits) {
  const auto z = SparsityPattern::from_edges(5, std::vector<Edge>{{4, 0}, {1, 0}, {3, 2}});
  EXPECT_EQ(z.edge_count(), 3u);
  EXPECT_EQ(z.max_support(), 2u);
  EXPECT_EQ(z.support(0), (std::vector<int>{1, 4}));
  EXPECT_TRUE(z.contains({3, 2}));
  EXPECT_FALSE(z.contains({3, 1}));
  EXPECT_EQ(z.edges(), (std::vector<Edge>{{1, 0}, {4, 0}, {3, 2}}));

  const auto added = z.with_edge({2, 1});
  EXPECT_EQ(added.edge_count(), 4u);
  EXPECT_TRUE(z.is_subset_of(added));
  EXPECT_FALSE(added.is_subset_of(z));
  EXPECT_EQ(added.without_edge({2, 1}), z);
  EXPECT_EQ(z.with_edge({1, 0}), z);

  EXPECT_EQ(SparsityPattern::full(5).edge_count(), 10u);
  EXPECT_EQ(SparsityPattern(5).edge_count(), 0u);
}

TEST(SparsityPattern, HashAndOrderAgreeWithEquality) {
  const auto a = SparsityPattern::from_edges(4, std::vector<Edge>{{1, 0}, {3, 2}});
  const auto b = SparsityPattern::from_edges(4, std::vector<Edge>{{3, 2}, {1, 0}});
  const auto c = SparsityPattern::from_edges(4, std::vector<Edge>{{2, 0}});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_TRUE(lexicographic_less(a, c));  // (1,0) < (2,0)
  EXPECT_FALSE(lexicographic_less(c, a));
  EXPECT_FALSE(lexicographic_less(a, b));
}

TEST(PatternText, RoundTrip) {
  const auto z = SparsityPattern::from_edges(6, std::vector<Edge>{{5, 0}, {2, 1}, {4, 3}});
  const std::string text = pattern_to_string(z);
  EXPECT_EQ(text, "p=6\n6,1\n3,2\n5,4\n");
  EXPECT_EQ(pattern_from_string(text), z);
  EXPECT_EQ(pattern_from_string("p=3\n"), SparsityPattern(3));
}

TEST(PatternText, StrictParsing) {
  EXPECT_THROW(pattern_from_string(""), ParseError);
  EXPECT_THROW(pattern_from_string("3\n2,1\n"), ParseError);
  EXPECT_THROW(pattern_from_string("p=3\n1,2\n"), ParseError);     // upper triangle
  EXPECT_THROW(pattern_from_string("p=3\n4,1\n"), ParseError);     // out of range
  EXPECT_THROW(pattern_from_string("p=4\n3,2\n2,1\n"), ParseError);  // unsorted
  EXPECT_THROW(pattern_from_string("p=4\n2,1\n2,1\n"), ParseError);  // duplicate
  EXPECT_THROW(pattern_from_string("p=4\n2;1\n"), ParseError);
  EXPECT_THROW(pattern_from_string("p=4\n2,x\n"), ParseError);
}

TEST(Factor, PatternOfFactorUsesStrictThreshold) {
  auto f = CholeskyFactor::identity(4);
  f.L(1, 0) = 0.5;
  f.L(3, 0) = -0.2;
  f.L(3, 2) = 0.1;
  EXPECT_EQ(pattern_of_factor(f, 0.0).edge_count(), 3u);
  EXPECT_EQ(pattern_of_factor(f, 0.1).edge_count(), 2u);
  EXPECT_EQ(pattern_of_factor(f, 0.2).edge_count(), 1u);
  EXPECT_THROW(pattern_of_factor(f, -1.0), InvalidArgument);

  const auto z = SparsityPattern::from_edges(4, std::vector<Edge>{{2, 1}, {3, 1}});
  EXPECT_EQ(pattern_of_factor(factor_of_pattern(z, 0.5), 0.0), z);
  EXPECT_NO_THROW(factor_of_pattern(z).validate());
  f.d(2) = 0.0;
  EXPECT_THROW(f.validate(), InvalidArgument);
}

TEST(Compare, ConfusionCounts) {
  const auto truth = SparsityPattern::from_edges(4, std::vector<Edge>{{1, 0}, {2, 0}, {3, 2}});
  const auto est = SparsityPattern::from_edges(4, std::vector<Edge>{{1, 0}, {3, 0}, {3, 2}});
  const auto c = compare(est, truth);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fp, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.tn, 2u);
  EXPECT_EQ(c.total(), position_count(4));
  EXPECT_THROW(compare(SparsityPattern(3), truth), DimensionMismatch);
}

class PerturbTest : public ::testing::TestWithParam<int> {};

TEST_P(PerturbTest, CaseContracts) {
  Rng gen(GetParam());
  const int p = 12;
  std::vector<std::size_t> pool(position_count(p));
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  const auto truth = detail::pattern_from_positions(p, detail::sample_positions(pool, 7, gen));
  const std::size_t e = truth.edge_count(), half = (e + 1) / 2;

  Rng rng(GetParam() + 100);
  const auto sub = perturb_case(truth, PerturbCase::half_submodel, rng);
  EXPECT_EQ(sub.edge_count(), half);
  EXPECT_TRUE(sub.is_subset_of(truth));

  const auto sup = perturb_case(truth, PerturbCase::double_supermodel, rng);
  EXPECT_EQ(sup.edge_count(), 2 * e);
  EXPECT_TRUE(truth.is_subset_of(sup));

  const auto r3 = perturb_case(truth, PerturbCase::half_random, rng);
  EXPECT_EQ(r3.edge_count(), half);
  EXPECT_FALSE(r3 == truth);

  const auto r4 = perturb_case(truth, PerturbCase::double_random, rng);
  EXPECT_EQ(r4.edge_count(), 2 * e);
}

INSTANTIATE_TEST_SUITE_P(Seeds, PerturbTest, ::testing::Values(1, 2, 3, 4, 5));

TEST(Perturb, DeterministicGivenSeed) {
  const auto truth = SparsityPattern::from_edges(8, std::vector<Edge>{{1, 0}, {5, 2}, {7, 3}});
  for (int c = 1; c <= 4; ++c) {
    Rng a(42), b(42);
    EXPECT_EQ(perturb_case(truth, static_cast<PerturbCase>(c), a), perturb_case(truth, static_cast<PerturbCase>(c), b));
  }
}

TEST(Perturb, InfeasibleRequestsThrow) {
  Rng rng(1);
  const auto dense = SparsityPattern::from_edges(3, std::vector<Edge>{{1, 0}, {2, 0}});
  EXPECT_THROW(perturb_case(dense, PerturbCase::double_supermodel, rng), InvalidArgument);
  EXPECT_THROW(perturb_case(dense, PerturbCase::double_random, rng), InvalidArgument);
  EXPECT_THROW(perturb_case(SparsityPattern(3), PerturbCase::half_submodel, rng), InvalidArgument);
}
