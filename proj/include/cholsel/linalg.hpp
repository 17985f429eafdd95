#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "pattern.hpp"
#include "random.hpp"

namespace cholsel {

// Conditional variances below this are treated as a numerical collapse.
inline constexpr double kMinConditionalVariance = 1e-300;

// Sample covariance S = Y^T Y / n (zero mean) and its augmented version
// S~ = S + I / (n tau^2), from which every score term is built.
struct SampleStats {
  int n = 0;
  int p = 0;
  double tau_sq = 1.0;
  Eigen::MatrixXd S;
  Eigen::MatrixXd S_tilde;
};

inline SampleStats stats_from_covariance(int n, Eigen::MatrixXd S, double tau_sq) {
  if (n < 1) throw InvalidArgument("sample size must be at least 1");
  if (S.rows() != S.cols()) throw DimensionMismatch("covariance must be square");
  if (S.rows() < 2) throw InvalidArgument("dimension must be at least 2");
  if (!(tau_sq > 0.0)) throw InvalidArgument("tau_sq must be positive");
  if (!S.allFinite()) throw InvalidArgument("covariance has non-finite entries");
  SampleStats st;
  st.n = n;
  st.p = static_cast<int>(S.rows());
  st.tau_sq = tau_sq;
  st.S_tilde = S;
  st.S_tilde.diagonal().array() += 1.0 / (n * tau_sq);
  st.S = std::move(S);
  return st;
}

inline SampleStats sample_covariance(const Eigen::MatrixXd& Y, double tau_sq) {
  if (Y.rows() < 1) throw InvalidArgument("data needs at least one observation");
  if (Y.cols() < 2) throw InvalidArgument("data needs at least two variables");
  if (!Y.allFinite()) throw InvalidArgument("data contains non-finite values");
  const int n = static_cast<int>(Y.rows());
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(Y.cols(), Y.cols());
  S.selfadjointView<Eigen::Lower>().rankUpdate(Y.transpose(), 1.0 / n);
  S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
  return stats_from_covariance(n, std::move(S), tau_sq);
}

inline Eigen::MatrixXd principal_submatrix(const Eigen::MatrixXd& A, std::span<const int> idx) {
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd out(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) out(a, b) = A(idx[a], idx[b]);
  return out;
}

// log|A| for symmetric positive definite A; throws NotPositiveDefinite.
inline double logdet_spd(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// S~_{j|Z} and log|S~_Z| from one factorization of S~_Z.
struct ColumnFit {
  double cond_var = 0.0;
  double logdet = 0.0;
};

namespace detail {

inline void check_support(int p, int j, std::span<const int> z) {
  if (j < 0 || j >= p) throw InvalidArgument("column " + std::to_string(j) + " out of range");
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] <= j || z[i] >= p)
      throw InvalidArgument("support index " + std::to_string(z[i]) + " not in (" + std::to_string(j) + ", p)");
    if (i > 0 && z[i] <= z[i - 1]) throw InvalidArgument("support must be strictly increasing");
  }
}

inline void check_pivots(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& A, int column) {
  const double scale = A.diagonal().cwiseAbs().maxCoeff();
  const auto& diag = llt.matrixLLT().diagonal();
  if (llt.info() != Eigen::Success || (diag.array().square() <= 1e-14 * scale).any())
    throw ConditioningError("parent submatrix of column " + std::to_string(column) + " is numerically singular",
                            column);
}

}  // namespace detail

inline ColumnFit fit_column(const Eigen::MatrixXd& St, int j, std::span<const int> z) {
  ColumnFit fit{St(j, j), 0.0};
  if (!z.empty()) {
    const Eigen::MatrixXd A = principal_submatrix(St, z);
    Eigen::VectorXd b(static_cast<Eigen::Index>(z.size()));
    for (std::size_t i = 0; i < z.size(); ++i) b(static_cast<Eigen::Index>(i)) = St(z[i], j);
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    detail::check_pivots(llt, A, j);
    llt.matrixL().solveInPlace(b);
    fit.cond_var = St(j, j) - b.squaredNorm();
    fit.logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  if (!(fit.cond_var >= kMinConditionalVariance))
    throw ConditioningError("conditional variance of column " + std::to_string(j) + " collapsed", j);
  return fit;
}

// S~_{j|Z_j} = S~_jj - S~_{Zj}^T (S~_Z)^{-1} S~_{Zj}.
inline double conditional_variance(const SampleStats& st, int j, std::span<const int> z) {
  detail::check_support(st.p, j, z);
  return fit_column(st.S_tilde, j, z).cond_var;
}

// log|S~_Z|; zero for an empty support.
inline double logdet_submatrix(const SampleStats& st, std::span<const int> z) {
  if (z.empty()) return 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] < 0 || z[i] >= st.p || (i > 0 && z[i] <= z[i - 1]))
      throw InvalidArgument("support must be strictly increasing indices in [0, p)");
  return logdet_spd(principal_submatrix(st.S_tilde, z));
}

// Factors one column's base support once and evaluates single-index
// extensions base + {k} with one triangular solve each.
class ColumnExtender {
 public:
  ColumnExtender(const Eigen::MatrixXd& St, int j, std::vector<int> base)
      : St_(St), j_(j), base_(std::move(base)) {
    const auto m = static_cast<Eigen::Index>(base_.size());
    buf_.resize(m);
    if (m > 0) {
      const Eigen::MatrixXd A = principal_submatrix(St, base_);
      llt_.compute(A);
      detail::check_pivots(llt_, A, j);
      v_.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) v_(i) = St(base_[i], j);
      llt_.matrixL().solveInPlace(v_);
      base_fit_.cond_var = St(j, j) - v_.squaredNorm();
      base_fit_.logdet = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    } else {
      base_fit_ = {St(j, j), 0.0};
    }
    if (!(base_fit_.cond_var >= kMinConditionalVariance))
      throw ConditioningError("conditional variance of column " + std::to_string(j) + " collapsed", j);
  }

  const ColumnFit& base() const noexcept { return base_fit_; }
  const std::vector<int>& base_support() const noexcept { return base_; }

  // Fit for base + {k}; k must not already be in the base.
  ColumnFit extended(int k) {
    double ck = St_(k, k);
    double r = St_(j_, k);
    if (!base_.empty()) {
      for (Eigen::Index i = 0; i < buf_.size(); ++i) buf_(i) = St_(base_[i], k);
      llt_.matrixL().solveInPlace(buf_);
      ck -= buf_.squaredNorm();
      r -= buf_.dot(v_);
    }
    if (!(ck > 1e-14 * St_(k, k)))
      throw ConditioningError("extending column " + std::to_string(j_) + " by " + std::to_string(k) +
                                  " is numerically singular",
                              j_);
    ColumnFit fit{base_fit_.cond_var - r * r / ck, base_fit_.logdet + std::log(ck)};
    if (!(fit.cond_var >= kMinConditionalVariance))
      throw ConditioningError("conditional variance of column " + std::to_string(j_) + " collapsed", j_);
    return fit;
  }

 private:
  const Eigen::MatrixXd& St_;
  int j_;
  std::vector<int> base_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd v_;
  Eigen::VectorXd buf_;
  ColumnFit base_fit_;
};

// W = L D^{-1} L^T: unpivoted LDL^T of W with D the reciprocal pivots.
inline CholeskyFactor modified_cholesky(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols()) throw DimensionMismatch("matrix must be square");
  const auto p = W.rows();
  CholeskyFactor f{Eigen::MatrixXd::Identity(p, p), Eigen::VectorXd(p)};
  Eigen::VectorXd pivot(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double djj = W(j, j);
    for (Eigen::Index k = 0; k < j; ++k) djj -= f.L(j, k) * f.L(j, k) * pivot(k);
    if (!(djj > 0.0))
      throw NotPositiveDefinite("non-positive pivot at index " + std::to_string(j) + " in modified Cholesky");
    pivot(j) = djj;
    for (Eigen::Index i = j + 1; i < p; ++i) {
      double s = W(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= f.L(i, k) * f.L(j, k) * pivot(k);
      f.L(i, j) = s / djj;
    }
  }
  f.d = pivot.cwiseInverse();
  return f;
}

// L D^{-1} L^T.
inline Eigen::MatrixXd reconstruct_precision(const CholeskyFactor& f) {
  return f.L * f.d.cwiseInverse().asDiagonal() * f.L.transpose();
}

// n draws with covariance (L0 L0^T)^{-1}: each row solves L0^T y = eps.
inline Eigen::MatrixXd sample_gaussian(const CholeskyFactor& L0, int n, Rng& rng) {
  const int p = L0.dim();
  if (n < 1) throw InvalidArgument("sample size must be at least 1");
  for (int i = 0; i < p; ++i)
    if (L0.d(i) != 1.0 || L0.L(i, i) != 1.0)
      throw InvalidArgument("sampling requires a unit lower-triangular factor with D = I");
  // Parents of each variable, for a sparse back-substitution.
  std::vector<std::vector<std::pair<int, double>>> parents(p);
  for (int j = 0; j < p; ++j)
    for (int k = j + 1; k < p; ++k)
      if (L0.L(k, j) != 0.0) parents[j].push_back({k, L0.L(k, j)});

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd Y(n, p);
  Eigen::VectorXd eps(p);
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < p; ++j) eps(j) = normal(rng);
    for (int j = p - 1; j >= 0; --j) {
      double y = eps(j);
      for (auto [k, l] : parents[j]) y -= l * Y(r, k);
      Y(r, j) = y;
    }
  }
  return Y;
}

}  // namespace cholsel
