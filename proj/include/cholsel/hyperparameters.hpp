#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "error.hpp"
#include "random.hpp"

namespace cholsel {

enum class PriorKind { beta_mixture, multiplicative, erdos_renyi };

inline std::string_view to_string(PriorKind k) {
  switch (k) {
    case PriorKind::beta_mixture: return "beta-mixture";
    case PriorKind::multiplicative: return "multiplicative";
    case PriorKind::erdos_renyi: return "erdos-renyi";
  }
  return "?";
}

inline PriorKind parse_prior_kind(std::string_view s) {
  if (s == "beta-mixture") return PriorKind::beta_mixture;
  if (s == "multiplicative") return PriorKind::multiplicative;
  if (s == "erdos-renyi") return PriorKind::erdos_renyi;
  throw InvalidArgument("unknown prior '" + std::string(s) +
                        "' (expected beta-mixture, multiplicative or erdos-renyi)");
}

// Hyperparameters of the spike-and-slab Cholesky prior and the pattern prior.
//   L_kj | d_j ~ N(0, tau_sq * d_j) on the slab, d_j ~ InvGamma(lambda1, lambda2),
//   node/edge weights ~ Beta(alpha1, alpha2), alpha2 ~ p^c.
struct Hyperparameters {
  double tau_sq = 1.0;
  double lambda1 = 0.05;
  double lambda2 = 0.05;
  double alpha1 = 0.05;
  double alpha2 = 1.0;
  double c = 2.0;
  int max_col_support = 1;  // R_n: columns with more entries carry zero prior mass
  PriorKind prior_kind = PriorKind::beta_mixture;
  double q = 0.5;  // edge probability, erdos-renyi only

  void validate() const {
    if (!(tau_sq > 0.0)) throw InvalidArgument("tau_sq must be positive");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw InvalidArgument("lambda1 and lambda2 must be nonnegative");
    if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw InvalidArgument("alpha1 and alpha2 must be positive");
    if (!(c > 0.0)) throw InvalidArgument("c must be positive");
    if (max_col_support < 1) throw InvalidArgument("max_col_support must be at least 1");
    if (prior_kind == PriorKind::erdos_renyi && !(q > 0.0 && q < 1.0))
      throw InvalidArgument("erdos-renyi edge probability q must lie in (0,1)");
  }

  // floor(n / log n), at least 1.
  static int default_max_col_support(int n) {
    if (n < 3) return 1;
    return std::max(1, static_cast<int>(std::floor(n / std::log(static_cast<double>(n)))));
  }

  // Settings of the simulation studies: c = 2, tau^2 = n, lambda1 = lambda2 =
  // 0.05, alpha1 = 0.05, alpha2 = p^c.
  static Hyperparameters simulation_defaults(int n, int p, PriorKind kind) {
    Hyperparameters h;
    h.c = 2.0;
    h.tau_sq = static_cast<double>(n);
    h.lambda1 = h.lambda2 = 0.05;
    h.alpha1 = 0.05;
    h.alpha2 = std::pow(static_cast<double>(p), h.c);
    h.max_col_support = default_max_col_support(n);
    h.prior_kind = kind;
    return h;
  }
};

// Identifies the (n, p, hyperparameters) context a score was computed in.
inline std::uint64_t context_fingerprint(const Hyperparameters& h, int n, int p) {
  std::uint64_t x = mix64(static_cast<std::uint64_t>(n));
  auto fold = [&x](std::uint64_t v) { x = mix64(x ^ v); };
  fold(static_cast<std::uint64_t>(p));
  for (double v : {h.tau_sq, h.lambda1, h.lambda2, h.alpha1, h.alpha2, h.c, h.q})
    fold(std::bit_cast<std::uint64_t>(v));
  fold(static_cast<std::uint64_t>(h.max_col_support));
  fold(static_cast<std::uint64_t>(h.prior_kind));
  return x;
}

}  // namespace cholsel
