#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "hyperparameters.hpp"
#include "pattern.hpp"

namespace cholsel {

// Thread-safe log-gamma for positive arguments.
inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

inline double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

// ---------------------------------------------------------------------------
// Erdos-Renyi: independent Bernoulli(q) indicators. Exact log mass.
inline double log_prior_erdos_renyi(const SparsityPattern& z, double q) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("edge probability q must lie in (0,1)");
  const auto k = static_cast<double>(z.edge_count());
  const auto m = static_cast<double>(position_count(z.dim()));
  return k * std::log(q) + (m - k) * std::log1p(-q);
}

// ---------------------------------------------------------------------------
// Beta-mixture: log B(alpha1 (p-1) + K, alpha2 (p-1) + p(p-1)/2 - K) with
// K the total edge count. Unnormalized; depends on the pattern through K only.
inline double log_prior_beta_mixture_count(int p, std::size_t edges, double alpha1, double alpha2) {
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw InvalidArgument("alpha1 and alpha2 must be positive");
  const double k = static_cast<double>(edges);
  const double m = static_cast<double>(position_count(p));
  const double a = alpha1 * (p - 1) + k;
  const double b = alpha2 * (p - 1) + m - k;
  if (!(b > 0.0)) throw InvalidArgument("beta-mixture second argument must be positive");
  return log_beta(a, b);
}

inline double log_prior_beta_mixture(const SparsityPattern& z, double alpha1, double alpha2) {
  return log_prior_beta_mixture_count(z.dim(), z.edge_count(), alpha1, alpha2);
}

// ---------------------------------------------------------------------------
// Multiplicative prior: edge (k,j) present with probability w_k w_j, w_j ~
// Beta(alpha1, alpha2) independently. The pattern mass is the p-dimensional
// integral of exp(h(w)) / B(alpha1, alpha2)^p over (0,1)^p with
//   h(w) = sum_{j<k} [Z_kj log(w_j w_k) + (1 - Z_kj) log(1 - w_j w_k)]
//        + sum_j [(alpha1 - 1) log w_j + (alpha2 - 1) log(1 - w_j)].

struct IntegrandEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

namespace detail {

// Symmetric p x p adjacency of the pattern (edge between nodes k and j).
inline std::vector<char> adjacency(const SparsityPattern& z) {
  const int p = z.dim();
  std::vector<char> adj(static_cast<std::size_t>(p) * p, 0);
  for (const Edge& e : z.edges()) {
    adj[static_cast<std::size_t>(e.row) * p + e.col] = 1;
    adj[static_cast<std::size_t>(e.col) * p + e.row] = 1;
  }
  return adj;
}

inline Eigen::VectorXd degrees(const SparsityPattern& z) {
  Eigen::VectorXd deg = Eigen::VectorXd::Zero(z.dim());
  for (const Edge& e : z.edges()) {
    deg(e.row) += 1.0;
    deg(e.col) += 1.0;
  }
  return deg;
}

// log(1 / (1 + e^{-t})), accurate in both tails.
inline double log_sigmoid(double t) { return t >= 0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t)); }

}  // namespace detail

// h(w) with its analytic gradient and Hessian on the w scale.
inline IntegrandEval multiplicative_log_integrand(const SparsityPattern& z, const Eigen::VectorXd& w, double alpha1,
                                                  double alpha2) {
  const int p = z.dim();
  if (w.size() != p) throw DimensionMismatch("node weight vector must have length p");
  for (int j = 0; j < p; ++j)
    if (!(w(j) > 0.0 && w(j) < 1.0)) throw InvalidArgument("node weights must lie strictly inside (0,1)");
  const auto adj = detail::adjacency(z);

  IntegrandEval out;
  out.gradient = Eigen::VectorXd::Zero(p);
  out.hessian = Eigen::MatrixXd::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    const double a = alpha1 - 1.0, b = alpha2 - 1.0;
    out.value += a * std::log(w(j)) + b * std::log1p(-w(j));
    out.gradient(j) += a / w(j) - b / (1.0 - w(j));
    out.hessian(j, j) += -a / (w(j) * w(j)) - b / ((1.0 - w(j)) * (1.0 - w(j)));
  }
  for (int j = 0; j < p; ++j) {
    for (int k = j + 1; k < p; ++k) {
      if (adj[static_cast<std::size_t>(k) * p + j]) {
        out.value += std::log(w(j)) + std::log(w(k));
        out.gradient(j) += 1.0 / w(j);
        out.gradient(k) += 1.0 / w(k);
        out.hessian(j, j) -= 1.0 / (w(j) * w(j));
        out.hessian(k, k) -= 1.0 / (w(k) * w(k));
      } else {
        const double q = w(j) * w(k);
        const double one_minus = 1.0 - q;
        out.value += std::log1p(-q);
        out.gradient(j) -= w(k) / one_minus;
        out.gradient(k) -= w(j) / one_minus;
        out.hessian(j, j) -= w(k) * w(k) / (one_minus * one_minus);
        out.hessian(k, k) -= w(j) * w(j) / (one_minus * one_minus);
        out.hessian(j, k) = out.hessian(k, j) = -1.0 / (one_minus * one_minus);
      }
    }
  }
  return out;
}

// g(theta) = h(w(theta)) + sum_j log(w_j (1 - w_j)) with w = logistic(theta):
// the integrand on the logit scale, Jacobian included.
class LogitIntegrand {
 public:
  LogitIntegrand(const SparsityPattern& z, double alpha1, double alpha2)
      : p_(z.dim()), alpha1_(alpha1), alpha2_(alpha2), adj_(detail::adjacency(z)), deg_(detail::degrees(z)) {}

  int dim() const noexcept { return p_; }
  const Eigen::VectorXd& degrees() const noexcept { return deg_; }

  double value(const Eigen::VectorXd& theta) const {
    double g = 0.0;
    std::vector<double> w(p_);
    for (int j = 0; j < p_; ++j) {
      const double lw = detail::log_sigmoid(theta(j));
      const double l1w = detail::log_sigmoid(-theta(j));
      w[j] = std::exp(lw);
      g += (deg_(j) + alpha1_) * lw + alpha2_ * l1w;
    }
    for (int j = 0; j < p_; ++j)
      for (int k = j + 1; k < p_; ++k)
        if (!edge(j, k)) g += std::log1p(-w[j] * w[k]);
    return g;
  }

  IntegrandEval evaluate(const Eigen::VectorXd& theta) const {
    IntegrandEval out;
    out.value = 0.0;
    out.gradient.resize(p_);
    out.hessian = Eigen::MatrixXd::Zero(p_, p_);
    std::vector<double> w(p_), wc(p_);  // w and 1 - w
    for (int j = 0; j < p_; ++j) {
      const double lw = detail::log_sigmoid(theta(j));
      const double l1w = detail::log_sigmoid(-theta(j));
      w[j] = std::exp(lw);
      wc[j] = std::exp(l1w);
      const double s = w[j] * wc[j];
      out.value += (deg_(j) + alpha1_) * lw + alpha2_ * l1w;
      out.gradient(j) = (deg_(j) + alpha1_) * wc[j] - alpha2_ * w[j];
      out.hessian(j, j) = -(deg_(j) + alpha1_ + alpha2_) * s;
    }
    for (int j = 0; j < p_; ++j) {
      for (int k = j + 1; k < p_; ++k) {
        if (edge(j, k)) continue;
        const double q = w[j] * w[k];
        const double one_minus = 1.0 - q;
        const double r = q / one_minus;
        const double t = q / (one_minus * one_minus);
        out.value += std::log1p(-q);
        out.gradient(j) -= wc[j] * r;
        out.gradient(k) -= wc[k] * r;
        out.hessian(j, j) += w[j] * wc[j] * r - wc[j] * wc[j] * t;
        out.hessian(k, k) += w[k] * wc[k] * r - wc[k] * wc[k] * t;
        out.hessian(j, k) = out.hessian(k, j) = -wc[j] * wc[k] * t;
      }
    }
    return out;
  }

 private:
  bool edge(int j, int k) const { return adj_[static_cast<std::size_t>(k) * p_ + j] != 0; }

  int p_;
  double alpha1_, alpha2_;
  std::vector<char> adj_;
  Eigen::VectorXd deg_;
};

struct LaplaceResult {
  double log_value = 0.0;  // approximate log pi(Z), Beta normalizers included
  Eigen::VectorXd mode;    // w-hat in (0,1)^p
  Eigen::VectorXd theta;   // logit(w-hat)
  int newton_iters = 0;
  bool converged = false;
  double hessian_logdet = 0.0;  // log det(-Hessian of g) at the mode
  double gradient_norm = 0.0;   // max-norm of the logit-scale gradient at termination
};

struct LaplaceOptions {
  int max_iters = 200;
  double gradient_tol = 1e-8;
  // Warm start on the logit scale; default is the moment-style guess
  // w_j = (alpha1 + deg_j) / (alpha1 + alpha2 + p).
  std::optional<Eigen::VectorXd> initial_theta;
};

namespace detail {

struct NewtonOutcome {
  Eigen::VectorXd theta;
  IntegrandEval eval;
  int iters = 0;
  bool converged = false;
};

inline NewtonOutcome newton_maximize(const LogitIntegrand& g, Eigen::VectorXd theta, const LaplaceOptions& opt) {
  NewtonOutcome out;
  const int p = g.dim();
  out.eval = g.evaluate(theta);
  for (int it = 0; it < opt.max_iters; ++it) {
    if (out.eval.gradient.cwiseAbs().maxCoeff() < opt.gradient_tol) {
      out.converged = true;
      break;
    }
    // Newton direction from -H; shift the spectrum if -H is not PD.
    Eigen::MatrixXd negH = -out.eval.hessian;
    Eigen::LLT<Eigen::MatrixXd> llt(negH);
    double shift = 1e-8 * std::max(1.0, negH.diagonal().cwiseAbs().maxCoeff());
    while (llt.info() != Eigen::Success) {
      llt.compute(negH + shift * Eigen::MatrixXd::Identity(p, p));
      shift *= 10.0;
    }
    const Eigen::VectorXd step = llt.solve(out.eval.gradient);
    // Near the mode the gain is below the resolution of the objective, so
    // the comparison allows roundoff slack rather than shrinking the step.
    double t = 1.0;
    const double g0 = out.eval.value;
    const double slack = 1e-12 * std::max(1.0, std::abs(g0));
    Eigen::VectorXd next = theta + step;
    while (g.value(next) < g0 - slack && t > 1e-12) {
      t *= 0.5;
      next = theta + t * step;
    }
    theta = next;
    out.eval = g.evaluate(theta);
    out.iters = it + 1;
  }
  if (!out.converged && out.eval.gradient.cwiseAbs().maxCoeff() < opt.gradient_tol) out.converged = true;
  out.theta = std::move(theta);
  return out;
}

}  // namespace detail

// Laplace approximation of the multiplicative-prior pattern mass, computed on
// the logit scale where the Jacobian keeps the mode interior for alpha1 < 1.
inline LaplaceResult log_prior_multiplicative_laplace(const SparsityPattern& z, double alpha1, double alpha2,
                                                      const LaplaceOptions& opt = {}) {
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw InvalidArgument("alpha1 and alpha2 must be positive");
  const LogitIntegrand g(z, alpha1, alpha2);
  const int p = z.dim();

  Eigen::VectorXd init(p);
  if (opt.initial_theta && opt.initial_theta->size() == p) {
    init = *opt.initial_theta;
  } else {
    for (int j = 0; j < p; ++j) {
      const double w = (alpha1 + g.degrees()(j)) / (alpha1 + alpha2 + p);
      init(j) = std::log(w) - std::log1p(-w);
    }
  }
  auto run = detail::newton_maximize(g, init, opt);
  int iters = run.iters;
  if (!run.converged) {
    run = detail::newton_maximize(g, Eigen::VectorXd::Zero(p), opt);
    iters += run.iters;
  }

  LaplaceResult res;
  res.theta = run.theta;
  res.mode = run.theta.unaryExpr([](double t) { return std::exp(detail::log_sigmoid(t)); });
  res.newton_iters = iters;
  res.converged = run.converged;
  res.gradient_norm = run.eval.gradient.cwiseAbs().maxCoeff();
  Eigen::LLT<Eigen::MatrixXd> llt(-run.eval.hessian);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("Laplace Hessian is not negative definite at the terminal point");
  res.hessian_logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  res.log_value = run.eval.value + 0.5 * p * std::log(2.0 * std::numbers::pi) - 0.5 * res.hessian_logdet -
                  p * log_beta(alpha1, alpha2);
  return res;
}

// ---------------------------------------------------------------------------
// Tensor-product Gauss-Legendre oracle for the multiplicative-prior mass.

struct QuadratureRule {
  std::vector<double> nodes;    // on (0,1)
  std::vector<double> weights;  // sum to 1
};

// Gauss-Legendre rule with `count` nodes mapped to (0,1).
inline QuadratureRule gauss_legendre_unit(int count) {
  if (count < 1) throw InvalidArgument("quadrature needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(count);
  rule.weights.resize(count);
  const int half = (count + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= count; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = count * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= count; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
    }
    dp = count * (x * p0 - p1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.nodes[count - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = rule.weights[count - 1 - i] = 0.5 * w;
  }
  return rule;
}

struct QuadratureResult {
  double log_value = 0.0;  // log pi(Z), Beta normalizers included
  int nodes = 0;           // per-dimension nodes of the accepted rule
  double relative_change = 0.0;
  bool converged = false;
};

namespace detail {

// One-dimensional rule for integrals of w^{alpha1-1} (1-w)^{alpha2-1} f(w):
// power maps on each half of (0,1) absorb endpoint singularities.
struct WeightNodes {
  std::vector<double> w, log_w, log_1mw, log_weight;
};

inline WeightNodes weight_nodes(int nodes, double alpha1, double alpha2) {
  const int half = std::max(1, nodes / 2);
  const auto gl = gauss_legendre_unit(half);
  const double a = std::min(alpha1, 1.0), b = std::min(alpha2, 1.0);
  WeightNodes out;
  for (int i = 0; i < half; ++i) {  // w = u^{1/a} / 2
    const double lu = std::log(gl.nodes[i]);
    const double lw = std::log(0.5) + lu / a;
    out.w.push_back(std::exp(lw));
    out.log_w.push_back(lw);
    out.log_1mw.push_back(std::log1p(-std::exp(lw)));
    out.log_weight.push_back(std::log(gl.weights[i]) + std::log(0.5 / a) + (1.0 / a - 1.0) * lu);
  }
  for (int i = 0; i < half; ++i) {  // 1 - w = v^{1/b} / 2
    const double lv = std::log(gl.nodes[i]);
    const double l1w = std::log(0.5) + lv / b;
    const double w = -std::expm1(l1w);
    out.w.push_back(w);
    out.log_w.push_back(std::log1p(-std::exp(l1w)));
    out.log_1mw.push_back(l1w);
    out.log_weight.push_back(std::log(gl.weights[i]) + std::log(0.5 / b) + (1.0 / b - 1.0) * lv);
  }
  return out;
}

inline double quadrature_log_integral(const SparsityPattern& z, double alpha1, double alpha2, int nodes) {
  const int p = z.dim();
  const auto wn = weight_nodes(nodes, alpha1, alpha2);
  const int m = static_cast<int>(wn.w.size());
  const auto adj = adjacency(z);
  std::vector<double> node_term(m);
  for (int i = 0; i < m; ++i)
    node_term[i] = wn.log_weight[i] + (alpha1 - 1.0) * wn.log_w[i] + (alpha2 - 1.0) * wn.log_1mw[i];

  std::vector<int> idx(p, 0);
  double mx = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (;;) {
    double v = 0.0;
    for (int j = 0; j < p; ++j) v += node_term[idx[j]];
    for (int j = 0; j < p; ++j)
      for (int k = j + 1; k < p; ++k)
        v += adj[static_cast<std::size_t>(k) * p + j] ? wn.log_w[idx[j]] + wn.log_w[idx[k]]
                                                      : std::log1p(-wn.w[idx[j]] * wn.w[idx[k]]);
    if (v > mx) {
      acc = acc * std::exp(mx - v) + 1.0;
      mx = v;
    } else {
      acc += std::exp(v - mx);
    }
    int d = 0;
    while (d < p && ++idx[d] == m) idx[d++] = 0;
    if (d == p) break;
  }
  return mx + std::log(acc);
}

}  // namespace detail

inline constexpr int kMaxQuadratureDim = 6;

// Doubles the node count from `nodes` until consecutive estimates agree to
// 1e-6 relative (or `max_nodes` is reached).
inline QuadratureResult log_prior_multiplicative_quadrature_detailed(const SparsityPattern& z, double alpha1,
                                                                     double alpha2, int nodes = 64,
                                                                     int max_nodes = 512) {
  if (z.dim() > kMaxQuadratureDim)
    throw InvalidArgument("quadrature oracle supports p <= " + std::to_string(kMaxQuadratureDim) + ", got " +
                          std::to_string(z.dim()));
  if (nodes < 64) throw InvalidArgument("quadrature needs at least 64 nodes per dimension");
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw InvalidArgument("alpha1 and alpha2 must be positive");
  const double norm = z.dim() * log_beta(alpha1, alpha2);
  QuadratureResult res;
  double prev = detail::quadrature_log_integral(z, alpha1, alpha2, nodes);
  for (int n = nodes; n < max_nodes; n *= 2) {
    const double next = detail::quadrature_log_integral(z, alpha1, alpha2, 2 * n);
    res.relative_change = std::abs(std::expm1(next - prev));
    res.nodes = 2 * n;
    res.log_value = next - norm;
    prev = next;
    if (res.relative_change <= 1e-6) {
      res.converged = true;
      return res;
    }
  }
  if (res.nodes == 0) {
    res.nodes = nodes;
    res.log_value = prev - norm;
  }
  return res;
}

inline double log_prior_multiplicative_quadrature(const SparsityPattern& z, double alpha1, double alpha2,
                                                  int nodes = 64) {
  return log_prior_multiplicative_quadrature_detailed(z, alpha1, alpha2, nodes).log_value;
}

// ---------------------------------------------------------------------------
// Hyperparameter diagnostics against the asymptotic rate conditions.

struct Diagnostic {
  std::string assumption;  // e.g. "A4"
  std::string message;

  std::string render() const { return "WARN " + assumption + ": " + message; }
};

namespace detail {
inline std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}
}  // namespace detail

// Rates are compared at the given (n, p, d) only up to a factor of 10; the
// kappa of the slab-variance condition is fixed at 2.
inline std::vector<Diagnostic> check_hyperparameters(const Hyperparameters& h, int p, int n, int d_estimate) {
  using detail::num;
  std::vector<Diagnostic> out;
  const double logn = std::log(std::max(n, 2));
  const double logp = std::log(std::max(p, 2));
  const double rn = n / logn;
  if (h.max_col_support > rn)
    out.push_back({"A4", "max_col_support=" + std::to_string(h.max_col_support) + " exceeds n/log n=" + num(rn)});

  const double kappa = 2.0;
  const double d = std::max(d_estimate, 1);
  if (d / (h.tau_sq * logp) >= 1.0)
    out.push_back({"A5", "tau_sq=" + num(h.tau_sq) + " too small: d/(tau_sq log p)=" + num(d / (h.tau_sq * logp)) +
                             " should be well below 1"});
  const double slab = std::sqrt(n / h.tau_sq) / (std::pow(p, (1.0 - 1.0 / kappa) * h.c / 2.0) * logn);
  if (slab >= 1.0)
    out.push_back({"A5", "tau_sq=" + num(h.tau_sq) + " too small: sqrt(n/tau_sq)/(p^((1-1/kappa)c/2) log n)=" +
                             num(slab) + " should be well below 1"});

  auto off_by_10 = [](double v, double target) { return v > 10.0 * target || v < target / 10.0; };
  if (h.prior_kind == PriorKind::multiplicative) {
    if (h.lambda1 >= h.c || h.lambda2 >= h.c || h.alpha1 >= h.c)
      out.push_back({"A6", "lambda1, lambda2 and alpha1 should stay below c=" + num(h.c)});
    if (h.c <= 2.0) {
      out.push_back({"A6", "c=" + num(h.c) + " but the multiplicative prior needs c > 2 (c > 2 kappa)"});
    } else {
      const double target = std::max(std::pow(p, h.c), std::pow(d, 2.0 * h.c / (h.c - 2.0)));
      if (off_by_10(h.alpha2, target))
        out.push_back({"A6", "alpha2=" + num(h.alpha2) + " deviates from max{p^c, d^(2c/(c-2))}=" + num(target) +
                                 " by more than a factor of 10"});
    }
  } else if (h.prior_kind == PriorKind::beta_mixture) {
    if (h.lambda1 >= h.c || h.lambda2 >= h.c || h.alpha1 >= h.c)
      out.push_back({"A7", "lambda1, lambda2 and alpha1 should stay below c=" + num(h.c)});
    const double target = std::pow(p, h.c);
    if (off_by_10(h.alpha2, target))
      out.push_back({"A7", "alpha2=" + num(h.alpha2) + " deviates from p^c=" + num(target) +
                               " by more than a factor of 10"});
  }
  return out;
}

}  // namespace cholsel
