#include <random>

#include <gtest/gtest.h>

#include "cholsel/linalg.hpp"
#include "oracles.hpp"

using namespace cholsel;

namespace {

std::vector<int> random_support(int p, int j, Rng& rng, double keep = 0.4) {
  std::bernoulli_distribution coin(keep);
  std::vector<int> z;
  for (int k = j + 1; k < p; ++k)
    if (coin(rng)) z.push_back(k);
  return z;
}

}  // namespace

TEST(SampleStats, AugmentsDiagonal) {
  Eigen::MatrixXd Y(4, 2);
  Y << 1, 2, -1, 0, 0.5, 1, 2, -3;
  const auto st = sample_covariance(Y, 2.0);
  const Eigen::MatrixXd S = Y.transpose() * Y / 4.0;
  EXPECT_LT((st.S - S).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(st.S_tilde(0, 0), S(0, 0) + 1.0 / 8.0, 1e-14);
  EXPECT_DOUBLE_EQ(st.S_tilde(0, 1), S(0, 1));
  EXPECT_THROW(sample_covariance(Y, 0.0), InvalidArgument);
  EXPECT_THROW(sample_covariance(Eigen::MatrixXd(3, 1), 1.0), InvalidArgument);
}

// S~_{j|Z} is the reciprocal of the (j,j) entry of the inverse of S~ restricted
// to {j} u Z.
TEST(ConditionalVariance, MatchesInverseOfAugmentedBlock) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = 3 + trial % 10;
    SampleStats st = stats_from_covariance(10, oracle::random_spd(p, rng), 1.0);
    const int j = trial % (p - 1);
    const auto z = random_support(p, j, rng);
    std::vector<int> idx{j};
    idx.insert(idx.end(), z.begin(), z.end());
    const Eigen::MatrixXd block = principal_submatrix(st.S_tilde, idx);
    const double expected = 1.0 / block.inverse()(0, 0);
    EXPECT_NEAR(conditional_variance(st, j, z), expected, 1e-10 * expected);
    EXPECT_NEAR(logdet_submatrix(st, z), std::log(principal_submatrix(st.S_tilde, z).determinant()), 1e-9);
  }
}

TEST(ConditionalVariance, ValidatesSupport) {
  Rng rng(1);
  const auto st = stats_from_covariance(10, oracle::random_spd(4, rng), 1.0);
  EXPECT_THROW(conditional_variance(st, 1, std::vector<int>{1}), InvalidArgument);
  EXPECT_THROW(conditional_variance(st, 1, std::vector<int>{3, 2}), InvalidArgument);
  EXPECT_THROW(conditional_variance(st, 1, std::vector<int>{4}), InvalidArgument);
  EXPECT_DOUBLE_EQ(conditional_variance(st, 1, std::vector<int>{}), st.S_tilde(1, 1));
}

TEST(ColumnExtender, AgreesWithDirectFit) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 6 + trial;
    const Eigen::MatrixXd S = oracle::random_spd(p, rng);
    const int j = trial % (p - 2);
    const auto base = random_support(p, j, rng, 0.3);
    ColumnExtender ext(S, j, base);
    const auto direct = fit_column(S, j, base);
    EXPECT_NEAR(ext.base().cond_var, direct.cond_var, 1e-12 * direct.cond_var);
    EXPECT_NEAR(ext.base().logdet, direct.logdet, 1e-10);
    for (int k = j + 1; k < p; ++k) {
      if (std::binary_search(base.begin(), base.end(), k)) continue;
      auto z = base;
      z.insert(std::upper_bound(z.begin(), z.end(), k), k);
      const auto want = fit_column(S, j, z);
      const auto got = ext.extended(k);
      EXPECT_NEAR(got.cond_var, want.cond_var, 1e-10 * want.cond_var);
      EXPECT_NEAR(got.logdet, want.logdet, 1e-9);
    }
  }
}

TEST(ColumnFit, SingularParentsRaiseConditioningError) {
  // Two identical variables make S~ singular when the augmentation vanishes.
  Eigen::MatrixXd S(3, 3);
  S << 1, 0.3, 0.3, 0.3, 1, 1, 0.3, 1, 1;
  try {
    fit_column(S, 0, std::vector<int>{1, 2});
    FAIL() << "expected ConditioningError";
  } catch (const ConditioningError& e) {
    EXPECT_EQ(e.column(), 0);
  }
}

TEST(ModifiedCholesky, ReconstructsInput) {
  Rng rng(3);
  for (int p : {2, 5, 17, 40}) {
    const Eigen::MatrixXd W = oracle::random_spd(p, rng);
    const auto f = modified_cholesky(W);
    EXPECT_NO_THROW(f.validate());
    EXPECT_LT((reconstruct_precision(f) - W).cwiseAbs().maxCoeff(), 1e-10 * W.cwiseAbs().maxCoeff());
  }
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
  bad(1, 1) = -1.0;
  EXPECT_THROW(modified_cholesky(bad), NotPositiveDefinite);
}

TEST(ModifiedCholesky, DiagonalInputGivesIdentityFactor) {
  const auto f = modified_cholesky(2.0 * Eigen::MatrixXd::Identity(4, 4));
  EXPECT_TRUE(f.L.isIdentity());
  EXPECT_TRUE(f.d.isApprox(Eigen::VectorXd::Constant(4, 0.5)));
}

TEST(SampleGaussian, CovarianceMatchesInversePrecision) {
  auto L0 = CholeskyFactor::identity(3);
  L0.L(1, 0) = 0.5;
  L0.L(2, 0) = -0.5;
  L0.L(2, 1) = 0.5;
  Rng rng(2024);
  const int n = 200000;
  const Eigen::MatrixXd Y = sample_gaussian(L0, n, rng);
  const Eigen::MatrixXd emp = Y.transpose() * Y / n;
  const Eigen::MatrixXd omega = L0.L * L0.L.transpose();
  const Eigen::MatrixXd sigma = omega.inverse();
  EXPECT_LT((emp - sigma).cwiseAbs().maxCoeff(), 0.02 * sigma.cwiseAbs().maxCoeff());
}

TEST(SampleGaussian, DeterministicAndRequiresUnitFactor) {
  auto L0 = CholeskyFactor::identity(4);
  L0.L(3, 1) = 0.5;
  Rng a(9), b(9);
  EXPECT_TRUE(sample_gaussian(L0, 10, a).isApprox(sample_gaussian(L0, 10, b), 0.0));
  L0.d(0) = 2.0;
  EXPECT_THROW(sample_gaussian(L0, 10, a), InvalidArgument);
}
