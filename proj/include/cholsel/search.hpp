#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "hyperparameters.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "pattern.hpp"
#include "priors.hpp"
#include "random.hpp"
#include "scoring.hpp"

namespace cholsel {

struct SearchConfig {
  double grid_start = 0.1;
  double grid_end = 0.5;
  double grid_step = 1e-4;
  double ridge = 0.5;          // added to S before inversion
  int sss_iterations = 1000;   // max hill-climbing steps per walk
  int sss_top_m = 10;          // size of the retained model list
  int sss_seeds = 5;           // best threshold candidates used as walk starts
  int rescore_width = 8;       // multiplicative prior: surrogate-ranked moves re-scored exactly
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (!(grid_start < grid_end)) throw InvalidArgument("grid_start must be below grid_end");
    if (!(grid_step > 0.0)) throw InvalidArgument("grid_step must be positive");
    if (!(ridge > 0.0)) throw InvalidArgument("ridge must be positive");
    if (sss_iterations < 0) throw InvalidArgument("sss_iterations must be nonnegative");
    if (sss_top_m < 1) throw InvalidArgument("sss_top_m must be at least 1");
    if (sss_seeds < 1) throw InvalidArgument("sss_seeds must be at least 1");
    if (rescore_width < 1) throw InvalidArgument("rescore_width must be at least 1");
  }

  std::size_t grid_size() const { return static_cast<std::size_t>(std::llround((grid_end - grid_start) / grid_step)); }
};

// Ranking used everywhere a "best" pattern is chosen: higher total first,
// then fewer edges, then lexicographically smaller edge list.
inline bool ranks_before(const ScoredPattern& a, const ScoredPattern& b) {
  if (a.total != b.total) return a.total > b.total;
  if (a.pattern.edge_count() != b.pattern.edge_count()) return a.pattern.edge_count() < b.pattern.edge_count();
  return lexicographic_less(a.pattern, b.pattern);
}

// Bounded list of the best distinct patterns seen, kept in rank order.
class TopModels {
 public:
  explicit TopModels(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

  bool admits(double total) const { return items_.size() < capacity_ || total >= items_.back().total; }

  void insert(ScoredPattern s) {
    if (!admits(s.total) || seen_.count(s.pattern)) return;
    auto at = std::upper_bound(items_.begin(), items_.end(), s, ranks_before);
    if (at == items_.end() && items_.size() >= capacity_) return;
    seen_.insert(s.pattern);
    items_.insert(at, std::move(s));
    if (items_.size() > capacity_) {
      seen_.erase(items_.back().pattern);
      items_.pop_back();
    }
  }

  const std::vector<ScoredPattern>& items() const noexcept { return items_; }
  bool empty() const noexcept { return items_.empty(); }

 private:
  std::size_t capacity_;
  std::vector<ScoredPattern> items_;
  std::unordered_set<SparsityPattern, SparsityPatternHash> seen_;
};

struct SearchResult {
  ScoredPattern best;
  std::vector<ScoredPattern> top_m;    // rank order; top_m[0] == best
  std::size_t candidates_evaluated = 0;
  std::vector<double> trace;           // best total after each step
  std::size_t moves = 0;
  std::size_t skipped_neighbors = 0;   // neighbors whose scoring failed
  std::vector<std::string> errors;
};

// ---------------------------------------------------------------------------
// Threshold path of the modified Cholesky factor of (S + ridge I)^{-1}.

struct ThresholdCandidate {
  SparsityPattern pattern;
  double threshold = 0.0;  // first grid value producing this pattern
  bool truncated = false;  // some column was cut back to max_col_support
};

inline std::vector<ThresholdCandidate> threshold_candidates(const SampleStats& stats, const SearchConfig& cfg,
                                                            int max_col_support) {
  cfg.validate();
  const int p = stats.p;
  const Eigen::MatrixXd ridged = stats.S + cfg.ridge * Eigen::MatrixXd::Identity(p, p);
  const Eigen::LLT<Eigen::MatrixXd> llt(ridged);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("S + ridge I is not positive definite");
  const Eigen::MatrixXd W = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const CholeskyFactor factor = modified_cholesky(0.5 * (W + W.transpose()));

  struct Entry {
    double magnitude;
    Edge edge;
  };
  std::vector<Entry> entries;
  entries.reserve(position_count(p));
  for (int j = 0; j < p - 1; ++j)
    for (int k = j + 1; k < p; ++k) entries.push_back({std::abs(factor.L(k, j)), {k, j}});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.magnitude > b.magnitude; });

  std::vector<ThresholdCandidate> out;
  std::unordered_set<SparsityPattern, SparsityPatternHash> seen;
  std::size_t last_count = entries.size() + 1;
  const std::size_t steps = cfg.grid_size();
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = cfg.grid_start + static_cast<double>(i) * cfg.grid_step;
    // Entries strictly above t form a prefix of the sorted list.
    const auto count = static_cast<std::size_t>(
        std::partition_point(entries.begin(), entries.end(), [t](const Entry& e) { return e.magnitude > t; }) -
        entries.begin());
    if (count == last_count) continue;
    last_count = count;
    std::vector<SparsityPattern::Support> supports(p - 1);
    bool truncated = false;
    for (std::size_t e = 0; e < count; ++e) {
      auto& s = supports[entries[e].edge.col];
      if (s.size() < static_cast<std::size_t>(max_col_support))
        s.push_back(entries[e].edge.row);
      else
        truncated = true;
    }
    for (auto& s : supports) std::sort(s.begin(), s.end());
    SparsityPattern z(p, std::move(supports));
    if (!seen.insert(z).second) continue;
    out.push_back({std::move(z), t, truncated});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shotgun stochastic search: best-improvement hill climbing over
// add / delete / within-column swap neighborhoods.

namespace detail {

enum class MoveKind : int { remove = 0, swap = 1, add = 2 };

struct Move {
  MoveKind kind;
  int col;
  int out_row;  // removed row (remove, swap), -1 otherwise
  int in_row;   // added row (add, swap), -1 otherwise
  double likelihood_delta;
  double column_term;  // new term of the changed column
};

// Deterministic total order among equally scored moves.
inline auto move_key(const Move& m) { return std::make_tuple(static_cast<int>(m.kind), m.col, m.out_row, m.in_row); }

struct ColumnState {
  double term = 0.0;
  std::vector<Move> moves;
  std::size_t failures = 0;
  std::string last_error;
};

class SssWalker {
 public:
  SssWalker(const Scorer& scorer, const SearchConfig& cfg)
      : scorer_(scorer), cfg_(cfg), p_(scorer.dim()), m_(position_count(p_)) {}

  // Column term and full move list of column j with support z.
  ColumnState column_moves(int j, const std::vector<int>& z, std::uint64_t walk_id) const {
    ColumnState st;
    const auto& St = scorer_.stats().S_tilde;
    std::vector<int> absent;
    for (int k = j + 1; k < p_; ++k)
      if (!std::binary_search(z.begin(), z.end(), k)) absent.push_back(k);

    ColumnExtender full(St, j, z);
    st.term = scorer_.column_term(j, z.size(), full.base());
    auto guarded = [&st](auto&& f) {
      try {
        f();
      } catch (const ConditioningError& e) {
        ++st.failures;
        st.last_error = e.what();
      }
    };

    if (!scorer_.exceeds_cap(z.size() + 1)) {
      for (int k : absent)
        guarded([&] {
          const double t = scorer_.column_term(j, z.size() + 1, full.extended(k));
          st.moves.push_back({MoveKind::add, j, -1, k, t - st.term, t});
        });
    }

    // Swap pairs, subsampled when the column's swap neighborhood is large.
    const std::size_t pair_count = z.size() * absent.size();
    const std::size_t cutoff = 10 * static_cast<std::size_t>(p_);
    std::vector<std::vector<int>> swap_in(z.size());
    if (pair_count <= cutoff) {
      for (auto& v : swap_in) v = absent;
    } else {
      std::vector<std::size_t> all(pair_count), picked;
      for (std::size_t i = 0; i < pair_count; ++i) all[i] = i;
      Rng rng = make_rng(cfg_.seed, {walk_id, static_cast<std::uint64_t>(j), support_hash(j, z)});
      std::sample(all.begin(), all.end(), std::back_inserter(picked), cutoff, rng);
      for (std::size_t idx : picked) swap_in[idx / absent.size()].push_back(absent[idx % absent.size()]);
    }

    for (std::size_t i = 0; i < z.size(); ++i) {
      std::vector<int> reduced = z;
      reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(i));
      guarded([&] {
        ColumnExtender ext(St, j, reduced);
        const double t = scorer_.column_term(j, reduced.size(), ext.base());
        st.moves.push_back({MoveKind::remove, j, z[i], -1, t - st.term, t});
        for (int k : swap_in[i])
          guarded([&] {
            const double ts = scorer_.column_term(j, z.size(), ext.extended(k));
            st.moves.push_back({MoveKind::swap, j, z[i], k, ts - st.term, ts});
          });
      });
    }
    return st;
  }

  std::uint64_t support_hash(int j, const std::vector<int>& z) const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(j) + 1);
    for (int k : z) h = mix64(h ^ static_cast<std::uint64_t>(k));
    return h;
  }

  const Scorer& scorer() const noexcept { return scorer_; }
  const SearchConfig& config() const noexcept { return cfg_; }
  int dim() const noexcept { return p_; }
  std::size_t positions() const noexcept { return m_; }

 private:
  const Scorer& scorer_;
  const SearchConfig& cfg_;
  int p_;
  std::size_t m_;
};

inline SparsityPattern apply_move(const std::vector<std::vector<int>>& supports, int p, const Move& mv,
                                  std::vector<std::vector<int>>* out = nullptr) {
  auto next = supports;
  auto& s = next[mv.col];
  if (mv.out_row >= 0) s.erase(std::lower_bound(s.begin(), s.end(), mv.out_row));
  if (mv.in_row >= 0) s.insert(std::upper_bound(s.begin(), s.end(), mv.in_row), mv.in_row);
  SparsityPattern z(p, next);
  if (out) *out = std::move(next);
  return z;
}

}  // namespace detail

inline SearchResult sss_refine(const std::vector<SparsityPattern>& seeds, const SampleStats& stats,
                               const Hyperparameters& hyper, const SearchConfig& cfg) {
  using detail::Move;
  using detail::MoveKind;
  cfg.validate();
  if (seeds.empty()) throw InvalidArgument("stochastic search needs at least one seed");
  const Scorer scorer(stats, hyper);
  const detail::SssWalker walker(scorer, cfg);
  const int p = stats.p;
  const auto kind = hyper.prior_kind;

  SearchResult result;
  TopModels top(static_cast<std::size_t>(cfg.sss_top_m));
  double best_so_far = kNegInf;

  std::vector<SparsityPattern> unique;
  for (const auto& s : seeds) {
    if (s.dim() != p) throw DimensionMismatch("seed dimension does not match data");
    if (std::find(unique.begin(), unique.end(), s) == unique.end()) unique.push_back(s);
  }

  for (std::size_t walk = 0; walk < unique.size(); ++walk) {
    LaplaceResult laplace;
    ScoredPattern current;
    try {
      current = scorer.score(unique[walk], &laplace);
    } catch (const Error& e) {
      result.errors.push_back("seed " + std::to_string(walk) + ": " + e.what());
      continue;
    }
    ++result.candidates_evaluated;
    top.insert(current);
    best_so_far = std::max(best_so_far, current.total);
    if (current.cap_violated) {
      result.errors.push_back("seed " + std::to_string(walk) + " exceeds max_col_support");
      continue;
    }

    auto supports = current.pattern.supports();
    std::vector<detail::ColumnState> columns(static_cast<std::size_t>(p - 1));
    parallel_for(columns.size(), cfg.threads, [&](std::size_t j) {
      columns[j] = walker.column_moves(static_cast<int>(j), supports[j], walk);
    });

    for (int step = 0; step < cfg.sss_iterations; ++step) {
      const std::size_t edges = current.pattern.edge_count();
      // Prior change per move; exact for beta-mixture and Erdos-Renyi, a
      // plug-in surrogate at the current Laplace mode for multiplicative.
      double add_delta = 0.0, remove_delta = 0.0;
      if (kind == PriorKind::beta_mixture) {
        const double now = current.prior_term;
        add_delta = edges < walker.positions()
                        ? log_prior_beta_mixture_count(p, edges + 1, hyper.alpha1, hyper.alpha2) - now
                        : kNegInf;
        remove_delta =
            edges > 0 ? log_prior_beta_mixture_count(p, edges - 1, hyper.alpha1, hyper.alpha2) - now : kNegInf;
      } else if (kind == PriorKind::erdos_renyi) {
        add_delta = std::log(hyper.q) - std::log1p(-hyper.q);
        remove_delta = -add_delta;
      }
      auto edge_odds = [&](int k, int j) {
        const double q = laplace.mode(k) * laplace.mode(j);
        return std::log(q) - std::log1p(-q);
      };
      auto prior_delta = [&](const Move& mv) {
        if (kind != PriorKind::multiplicative)
          return mv.kind == MoveKind::add ? add_delta : mv.kind == MoveKind::remove ? remove_delta : 0.0;
        double d = 0.0;
        if (mv.in_row >= 0) d += edge_odds(mv.in_row, mv.col);
        if (mv.out_row >= 0) d -= edge_odds(mv.out_row, mv.col);
        return d;
      };

      // Rank all neighbors; keep the best `keep` in move order.
      struct Ranked {
        double score;
        const Move* move;
      };
      auto better = [](const Ranked& a, const Ranked& b) {
        if (a.score != b.score) return a.score > b.score;
        return detail::move_key(*a.move) < detail::move_key(*b.move);
      };
      const std::size_t keep = static_cast<std::size_t>(
          kind == PriorKind::multiplicative ? std::max(cfg.rescore_width, cfg.sss_top_m) : cfg.sss_top_m);
      std::vector<Ranked> best;
      best.reserve(keep + 1);
      std::size_t neighbors = 0;
      for (const auto& col : columns) {
        for (const Move& mv : col.moves) {
          const double pd = prior_delta(mv);
          if (pd == kNegInf) continue;
          ++neighbors;
          Ranked r{current.total + pd + mv.likelihood_delta, &mv};
          if (best.size() < keep || better(r, best.back())) {
            best.insert(std::upper_bound(best.begin(), best.end(), r, better), r);
            if (best.size() > keep) best.pop_back();
          }
        }
      }
      result.candidates_evaluated += neighbors;
      if (best.empty()) break;

      // Materialize the best neighbors; multiplicative moves get their exact
      // Laplace prior here.
      struct Materialized {
        ScoredPattern scored;
        LaplaceResult laplace;
        const Move* move;
      };
      std::vector<Materialized> mats;
      const std::size_t exact_count =
          kind == PriorKind::multiplicative ? std::min<std::size_t>(best.size(), cfg.rescore_width) : best.size();
      for (std::size_t i = 0; i < best.size(); ++i) {
        const Move& mv = *best[i].move;
        if (kind != PriorKind::multiplicative && !top.admits(best[i].score) && i > 0) break;
        if (kind == PriorKind::multiplicative && i >= exact_count) break;
        Materialized m{{}, {}, &mv};
        m.scored.pattern = detail::apply_move(supports, p, mv);
        m.scored.context = current.context;
        m.scored.column_terms = current.column_terms;
        m.scored.column_terms[mv.col] = mv.column_term;
        if (kind == PriorKind::multiplicative) {
          try {
            LaplaceOptions opt;
            opt.initial_theta = laplace.theta;
            m.scored.prior_term = scorer.prior(m.scored.pattern, &m.laplace, opt);
          } catch (const Error& e) {
            ++result.skipped_neighbors;
            result.errors.push_back(e.what());
            continue;
          }
          double lik = 0.0;
          for (double t : m.scored.column_terms) lik += t;
          m.scored.total = m.scored.prior_term + lik;
        } else {
          m.scored.prior_term = current.prior_term + prior_delta(mv);
          m.scored.total = best[i].score;
        }
        top.insert(m.scored);
        mats.push_back(std::move(m));
      }

      const Materialized* chosen = nullptr;
      for (const auto& m : mats) {
        if (!chosen || m.scored.total > chosen->scored.total ||
            (m.scored.total == chosen->scored.total && detail::move_key(*m.move) < detail::move_key(*chosen->move)))
          chosen = &m;
      }
      if (!chosen || !(chosen->scored.total > current.total)) break;

      const Move mv = *chosen->move;
      current = chosen->scored;
      if (kind == PriorKind::multiplicative) laplace = chosen->laplace;
      detail::apply_move(supports, p, mv, &supports);
      columns[mv.col] = walker.column_moves(mv.col, supports[mv.col], walk);
      ++result.moves;
      best_so_far = std::max(best_so_far, current.total);
      result.trace.push_back(best_so_far);
    }
    for (const auto& col : columns) {
      result.skipped_neighbors += col.failures;
      if (!col.last_error.empty()) result.errors.push_back(col.last_error);
    }
  }

  if (top.empty()) throw ConditioningError("stochastic search could not score any seed");
  result.top_m = top.items();
  result.best = result.top_m.front();
  return result;
}

// ---------------------------------------------------------------------------
// Exhaustive posterior mode over all 2^{p(p-1)/2} patterns.

inline constexpr std::size_t kDefaultExhaustivePositions = 15;

namespace detail {
inline SparsityPattern pattern_from_mask(int p, std::uint64_t mask) {
  std::vector<Edge> edges;
  for (std::size_t pos = 0; pos < position_count(p); ++pos)
    if (mask >> pos & 1U) edges.push_back(edge_at(p, pos));
  return SparsityPattern::from_edges(p, edges);
}
}  // namespace detail

// Scores of every pattern, indexed by the bitmask over column-major positions.
inline std::vector<ScoredPattern> enumerate_scores(const SampleStats& stats, const Hyperparameters& hyper,
                                                   std::size_t max_positions = kDefaultExhaustivePositions,
                                                   int threads = 1) {
  const int p = stats.p;
  const std::size_t m = position_count(p);
  if (m > max_positions || m >= 63)
    throw InvalidArgument("exhaustive enumeration over 2^" + std::to_string(m) + " patterns exceeds the guard 2^" +
                          std::to_string(max_positions));
  const Scorer scorer(stats, hyper);
  std::vector<ScoredPattern> out(std::size_t{1} << m);
  parallel_for(out.size(), threads, [&](std::size_t mask) {
    out[mask] = scorer.score(detail::pattern_from_mask(p, mask));
  });
  return out;
}

inline ScoredPattern exhaustive_mode(const SampleStats& stats, const Hyperparameters& hyper,
                                     std::size_t max_positions = kDefaultExhaustivePositions, int threads = 1) {
  auto all = enumerate_scores(stats, hyper, max_positions, threads);
  auto best = std::min_element(all.begin(), all.end(), ranks_before);
  return std::move(*best);
}

// ---------------------------------------------------------------------------
// Full selection pipeline: threshold path, scoring, and SSS from the best
// candidates.

struct SelectionOutcome {
  SearchResult search;
  std::size_t threshold_count = 0;
  std::size_t truncated_count = 0;
};

inline SelectionOutcome select_pattern(const SampleStats& stats, const Hyperparameters& hyper,
                                       const SearchConfig& cfg) {
  const auto cands = threshold_candidates(stats, cfg, hyper.max_col_support);
  const Scorer scorer(stats, hyper);
  std::vector<std::optional<ScoredPattern>> scored(cands.size());
  parallel_for(cands.size(), cfg.threads, [&](std::size_t i) {
    try {
      scored[i] = scorer.score(cands[i].pattern);
    } catch (const ConditioningError&) {
      scored[i].reset();
    }
  });

  SelectionOutcome out;
  out.threshold_count = cands.size();
  for (const auto& c : cands) out.truncated_count += c.truncated ? 1 : 0;

  std::vector<ScoredPattern> ranked;
  for (auto& s : scored)
    if (s) ranked.push_back(std::move(*s));
  std::sort(ranked.begin(), ranked.end(), ranks_before);

  std::vector<SparsityPattern> seeds;
  for (std::size_t i = 0; i < ranked.size() && seeds.size() < static_cast<std::size_t>(cfg.sss_seeds); ++i)
    seeds.push_back(ranked[i].pattern);
  if (seeds.empty()) seeds.push_back(SparsityPattern(stats.p));

  out.search = sss_refine(seeds, stats, hyper, cfg);
  TopModels top(static_cast<std::size_t>(cfg.sss_top_m));
  for (auto& s : out.search.top_m) top.insert(s);
  for (auto& s : ranked) top.insert(s);
  out.search.candidates_evaluated += ranked.size();
  out.search.top_m = top.items();
  out.search.best = out.search.top_m.front();
  return out;
}

}  // namespace cholsel
