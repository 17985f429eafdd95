#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "hyperparameters.hpp"
#include "linalg.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "pattern.hpp"
#include "random.hpp"
#include "scoring.hpp"
#include "search.hpp"

namespace cholsel {

struct TruthSpec {
  int p = 10;
  double sparsity = 0.03;  // fraction of below-diagonal positions that are nonzero
  double signal = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (p < 2) throw InvalidArgument("p must be at least 2");
    if (!(sparsity > 0.0 && sparsity < 1.0)) throw InvalidArgument("sparsity must lie in (0,1)");
    if (!(signal != 0.0) || !std::isfinite(signal)) throw InvalidArgument("signal must be finite and nonzero");
  }

  std::size_t edge_count() const {
    return static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(position_count(p))));
  }
};

struct Truth {
  CholeskyFactor L0;
  SparsityPattern Z0;
};

// Unit lower-triangular L0 with D = I and exactly round(sparsity * p(p-1)/2)
// entries equal to `signal`, placed uniformly without replacement.
inline Truth generate_truth(const TruthSpec& spec) {
  spec.validate();
  const std::size_t count = spec.edge_count();
  if (count < 1)
    throw InvalidArgument("sparsity " + std::to_string(spec.sparsity) + " gives no edges at p = " +
                          std::to_string(spec.p));
  std::vector<std::size_t> pool(position_count(spec.p));
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  Rng rng = make_rng(spec.seed, {0x7472757468ULL});
  const auto picked = detail::sample_positions(pool, count, rng);
  Truth t{CholeskyFactor::identity(spec.p), detail::pattern_from_positions(spec.p, picked)};
  for (std::size_t pos : picked) {
    const Edge e = edge_at(spec.p, pos);
    t.L0.L(e.row, e.col) = spec.signal;
  }
  return t;
}

inline int experiment_sample_size(int p) { return std::max(2, p / 3); }

// Seeds of one (p, rep) job: truth, data, and each perturbation case.
inline std::uint64_t job_seed(std::uint64_t master, int p, int rep, std::uint64_t stream) {
  return derive_seed(master, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(rep), stream});
}

struct SimulatedInstance {
  Truth truth;
  Eigen::MatrixXd Y;
  int n = 0;
};

inline SimulatedInstance simulate_instance(int p, int n, double sparsity, double signal, std::uint64_t master,
                                           int rep) {
  SimulatedInstance inst;
  inst.n = n;
  inst.truth = generate_truth({p, sparsity, signal, job_seed(master, p, rep, 0)});
  Rng rng = make_rng(job_seed(master, p, rep, 1), {});
  inst.Y = sample_gaussian(inst.truth.L0, n, rng);
  return inst;
}

// ---------------------------------------------------------------------------
// Posterior ratio experiment.

struct RatioRow {
  int p = 0;
  int n = 0;
  int perturb = 0;  // case 1..4
  PriorKind prior = PriorKind::beta_mixture;
  int rep = 0;
  double log_ratio = 0.0;
};

inline bool operator<(const RatioRow& a, const RatioRow& b) {
  return std::make_tuple(a.p, a.perturb, static_cast<int>(a.prior), a.rep) <
         std::make_tuple(b.p, b.perturb, static_cast<int>(b.prior), b.rep);
}

struct RatioExperimentConfig {
  std::vector<int> p_list{150, 300, 450};
  double sparsity = 0.03;
  double signal = 0.5;
  int reps = 20;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<PriorKind> priors{PriorKind::beta_mixture, PriorKind::multiplicative};
  // Applied to the simulation defaults of every job.
  std::function<void(Hyperparameters&, int p)> adjust;
};

inline std::vector<RatioRow> ratio_experiment(const RatioExperimentConfig& cfg) {
  if (cfg.reps < 1) throw InvalidArgument("reps must be at least 1");
  struct Job {
    int p;
    int rep;
  };
  std::vector<Job> jobs;
  for (int p : cfg.p_list)
    for (int rep = 0; rep < cfg.reps; ++rep) jobs.push_back({p, rep});
  std::vector<std::vector<RatioRow>> slots(jobs.size());

  parallel_for(jobs.size(), cfg.threads, [&](std::size_t idx) {
    const auto [p, rep] = jobs[idx];
    const int n = experiment_sample_size(p);
    const auto inst = simulate_instance(p, n, cfg.sparsity, cfg.signal, cfg.seed, rep);
    std::vector<SparsityPattern> perturbed;
    for (int c = 1; c <= 4; ++c) {
      Rng rng = make_rng(job_seed(cfg.seed, p, rep, 1 + static_cast<std::uint64_t>(c)), {});
      perturbed.push_back(perturb_case(inst.truth.Z0, static_cast<PerturbCase>(c), rng));
    }
    for (PriorKind kind : cfg.priors) {
      auto hyper = Hyperparameters::simulation_defaults(n, p, kind);
      if (cfg.adjust) cfg.adjust(hyper, p);
      const auto stats = sample_covariance(inst.Y, hyper.tau_sq);
      const Scorer scorer(stats, hyper);
      try {
        const auto base = scorer.score(inst.truth.Z0);
        for (int c = 1; c <= 4; ++c) {
          const auto alt = scorer.score(perturbed[c - 1]);
          slots[idx].push_back({p, n, c, kind, rep, score_difference(alt, base)});
        }
      } catch (const Error& e) {
        throw Error("ratio experiment p=" + std::to_string(p) + " rep=" + std::to_string(rep) + " prior=" +
                    std::string(to_string(kind)) + ": " + e.what());
      }
    }
  });

  std::vector<RatioRow> rows;
  for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

// ---------------------------------------------------------------------------
// Selection experiment.

struct SelectionRow {
  int p = 0;
  int n = 0;
  int rep = 0;
  PriorKind prior = PriorKind::beta_mixture;
  MetricsRow metrics;
  std::size_t selected_edges = 0;
  double best_total = 0.0;
};

struct SelectionSummary {
  int p = 0;
  PriorKind prior = PriorKind::beta_mixture;
  double ppv = 0.0;
  double tpr = 0.0;
  double mcc = 0.0;
  int reps = 0;
};

struct SelectionExperimentConfig {
  std::vector<int> p_list{300};
  double sparsity = 0.03;
  double signal = 0.5;
  int reps = 5;
  std::uint64_t seed = 1;
  int threads = 1;
  PriorKind prior = PriorKind::beta_mixture;
  SearchConfig search;
  std::function<void(Hyperparameters&, int p)> adjust;
};

struct SelectionTable {
  std::vector<SelectionRow> rows;
  std::vector<SelectionSummary> summary;
};

inline SelectionTable selection_experiment(const SelectionExperimentConfig& cfg) {
  if (cfg.reps < 1) throw InvalidArgument("reps must be at least 1");
  cfg.search.validate();
  struct Job {
    int p;
    int rep;
  };
  std::vector<Job> jobs;
  for (int p : cfg.p_list)
    for (int rep = 0; rep < cfg.reps; ++rep) jobs.push_back({p, rep});
  std::vector<SelectionRow> slots(jobs.size());

  // Jobs run serially when the search itself is threaded.
  parallel_for(jobs.size(), 1, [&](std::size_t idx) {
    const auto [p, rep] = jobs[idx];
    const int n = experiment_sample_size(p);
    const auto inst = simulate_instance(p, n, cfg.sparsity, cfg.signal, cfg.seed, rep);
    auto hyper = Hyperparameters::simulation_defaults(n, p, cfg.prior);
    if (cfg.adjust) cfg.adjust(hyper, p);
    const auto stats = sample_covariance(inst.Y, hyper.tau_sq);
    SearchConfig search = cfg.search;
    search.seed = job_seed(cfg.seed, p, rep, 6);
    search.threads = cfg.threads;
    SelectionOutcome out;
    try {
      out = select_pattern(stats, hyper, search);
    } catch (const Error& e) {
      throw Error("selection experiment p=" + std::to_string(p) + " rep=" + std::to_string(rep) + ": " + e.what());
    }
    SelectionRow& row = slots[idx];
    row.p = p;
    row.n = n;
    row.rep = rep;
    row.prior = cfg.prior;
    row.metrics = metrics(compare(out.search.best.pattern, inst.truth.Z0));
    row.selected_edges = out.search.best.pattern.edge_count();
    row.best_total = out.search.best.total;
  });

  SelectionTable table;
  table.rows = std::move(slots);
  std::sort(table.rows.begin(), table.rows.end(), [](const SelectionRow& a, const SelectionRow& b) {
    return std::make_tuple(a.p, a.rep) < std::make_tuple(b.p, b.rep);
  });
  for (int p : cfg.p_list) {
    SelectionSummary s{p, cfg.prior};
    for (const auto& r : table.rows)
      if (r.p == p) {
        s.ppv += r.metrics.ppv;
        s.tpr += r.metrics.tpr;
        s.mcc += r.metrics.mcc;
        ++s.reps;
      }
    if (s.reps > 0) {
      s.ppv /= s.reps;
      s.tpr /= s.reps;
      s.mcc /= s.reps;
    }
    table.summary.push_back(s);
  }
  return table;
}

}  // namespace cholsel
