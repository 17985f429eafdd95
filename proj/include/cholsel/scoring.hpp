#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "hyperparameters.hpp"
#include "linalg.hpp"
#include "pattern.hpp"
#include "priors.hpp"

namespace cholsel {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Unnormalized log marginal posterior of a pattern, tagged with the context it
// was computed in. total = prior_term + sum(column_terms).
struct ScoredPattern {
  SparsityPattern pattern;
  double total = kNegInf;
  double prior_term = 0.0;
  std::vector<double> column_terms;
  std::uint64_t context = 0;
  bool cap_violated = false;  // some column exceeds max_col_support: zero prior mass
};

// Difference of two scores from the same context.
inline double score_difference(const ScoredPattern& a, const ScoredPattern& b) {
  if (a.context != b.context) throw ContextMismatch("scores come from different (n, p, hyperparameter) contexts");
  return a.total - b.total;
}

// Evaluates per-column terms and pattern scores for fixed data and
// hyperparameters. Immutable; safe to share across threads.
class Scorer {
 public:
  Scorer(const SampleStats& stats, Hyperparameters hyper)
      : stats_(stats), hyper_(std::move(hyper)), context_(context_fingerprint(hyper_, stats.n, stats.p)) {
    hyper_.validate();
    if (std::abs(hyper_.tau_sq - stats_.tau_sq) > 1e-12 * hyper_.tau_sq)
      throw InvalidArgument("sample statistics were augmented with a different tau_sq");
    const double n = stats_.n;
    exponent_ = n / 2.0 + hyper_.lambda1;
    offset_ = -1.0 / (2.0 * hyper_.tau_sq) + hyper_.lambda2;
    log_ntau_ = std::log(n * hyper_.tau_sq);
  }

  const SampleStats& stats() const noexcept { return stats_; }
  const Hyperparameters& hyper() const noexcept { return hyper_; }
  std::uint64_t context() const noexcept { return context_; }
  int dim() const noexcept { return stats_.p; }

  // -(n/2 + lambda1) log(n S~_{j|Z}/2 - 1/(2 tau^2) + lambda2)
  //   - log|S~_Z| / 2 - |Z| log(n tau^2) / 2
  double column_term(int j, std::size_t support_size, const ColumnFit& fit) const {
    const double bracket = stats_.n * fit.cond_var / 2.0 + offset_;
    if (!(bracket > 0.0) || bracket < hyper_.lambda2 / 2.0)
      throw ConditioningError("likelihood bracket of column " + std::to_string(j) + " is not positive (" +
                                  std::to_string(bracket) + ")",
                              j);
    return -exponent_ * std::log(bracket) - 0.5 * fit.logdet - 0.5 * static_cast<double>(support_size) * log_ntau_;
  }

  bool exceeds_cap(std::size_t support_size) const noexcept {
    return support_size > static_cast<std::size_t>(hyper_.max_col_support);
  }

  // Column term, or -inf when the support exceeds max_col_support.
  double column_loglik(int j, std::span<const int> z) const {
    if (j < 0 || j >= stats_.p - 1) throw InvalidArgument("column " + std::to_string(j) + " out of range");
    detail::check_support(stats_.p, j, z);
    if (exceeds_cap(z.size())) return kNegInf;
    return column_term(j, z.size(), fit_column(stats_.S_tilde, j, z));
  }

  // Prior term of the configured pattern prior. For the multiplicative prior
  // the Laplace result is written to `laplace` when given.
  double prior(const SparsityPattern& z, LaplaceResult* laplace = nullptr, const LaplaceOptions& opt = {}) const {
    switch (hyper_.prior_kind) {
      case PriorKind::beta_mixture:
        return log_prior_beta_mixture(z, hyper_.alpha1, hyper_.alpha2);
      case PriorKind::erdos_renyi:
        return log_prior_erdos_renyi(z, hyper_.q);
      case PriorKind::multiplicative: {
        auto res = log_prior_multiplicative_laplace(z, hyper_.alpha1, hyper_.alpha2, opt);
        if (!res.converged)
          throw ConditioningError("Laplace approximation did not converge (gradient " +
                                  std::to_string(res.gradient_norm) + ")");
        const double v = res.log_value;
        if (laplace) *laplace = std::move(res);
        return v;
      }
    }
    throw InvalidArgument("unknown prior kind");
  }

  ScoredPattern score(const SparsityPattern& z, LaplaceResult* laplace = nullptr,
                      const LaplaceOptions& opt = {}) const {
    if (z.dim() != stats_.p)
      throw DimensionMismatch("pattern dimension " + std::to_string(z.dim()) + " does not match data dimension " +
                              std::to_string(stats_.p));
    ScoredPattern out;
    out.pattern = z;
    out.context = context_;
    out.column_terms.resize(z.columns());
    double likelihood = 0.0;
    for (int j = 0; j < z.columns(); ++j) {
      const auto& s = z.support(j);
      if (exceeds_cap(s.size())) {
        out.cap_violated = true;
        out.column_terms[j] = kNegInf;
        continue;
      }
      out.column_terms[j] = column_term(j, s.size(), fit_column(stats_.S_tilde, j, s));
      likelihood += out.column_terms[j];
    }
    if (out.cap_violated) {
      out.prior_term = kNegInf;
      out.total = kNegInf;
      return out;
    }
    out.prior_term = prior(z, laplace, opt);
    out.total = out.prior_term + likelihood;
    return out;
  }

 private:
  const SampleStats& stats_;
  Hyperparameters hyper_;
  std::uint64_t context_;
  double exponent_ = 0.0;
  double offset_ = 0.0;
  double log_ntau_ = 0.0;
};

inline double column_loglik(const SampleStats& stats, int j, std::span<const int> z, const Hyperparameters& hyper) {
  return Scorer(stats, hyper).column_loglik(j, z);
}

inline ScoredPattern total_score(const SparsityPattern& z, const SampleStats& stats, const Hyperparameters& hyper) {
  return Scorer(stats, hyper).score(z);
}

// log pi(Z|Y) - log pi(Z0|Y).
inline double log_posterior_ratio(const SparsityPattern& z, const SparsityPattern& z0, const SampleStats& stats,
                                  const Hyperparameters& hyper) {
  const Scorer scorer(stats, hyper);
  return score_difference(scorer.score(z), scorer.score(z0));
}

}  // namespace cholsel
