// Command-line front end: simulation, scoring, search and experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cholsel/cholsel.hpp"

namespace {

using namespace cholsel;

struct HyperFlags {
  std::string prior = "beta-mixture";
  std::optional<double> tau_sq, lambda1, lambda2, alpha1, alpha2, c, q;
  std::optional<int> max_col_support;
};

void add_hyper_flags(CLI::App* sub, HyperFlags& h, const std::string& prior_help) {
  sub->add_option("--prior", h.prior, prior_help)->capture_default_str();
  sub->add_option("--tau-sq", h.tau_sq, "slab variance scale (default n)");
  sub->add_option("--lambda1", h.lambda1, "inverse-gamma shape (default 0.05)");
  sub->add_option("--lambda2", h.lambda2, "inverse-gamma scale (default 0.05)");
  sub->add_option("--alpha1", h.alpha1, "beta prior first parameter (default 0.05)");
  sub->add_option("--alpha2", h.alpha2, "beta prior second parameter (default p^c)");
  sub->add_option("--c", h.c, "sparsity rate exponent (default 2)");
  sub->add_option("--q", h.q, "edge probability for erdos-renyi (default 0.5)");
  sub->add_option("--max-col-support", h.max_col_support, "column support cap (default floor(n/log n))");
}

// Simulation defaults for (n, p), then any explicit flags.
void apply_hyper_flags(const HyperFlags& f, int p, Hyperparameters& h) {
  if (f.c) {
    h.c = *f.c;
    h.alpha2 = std::pow(static_cast<double>(p), h.c);
  }
  if (f.tau_sq) h.tau_sq = *f.tau_sq;
  if (f.lambda1) h.lambda1 = *f.lambda1;
  if (f.lambda2) h.lambda2 = *f.lambda2;
  if (f.alpha1) h.alpha1 = *f.alpha1;
  if (f.alpha2) h.alpha2 = *f.alpha2;
  if (f.q) h.q = *f.q;
  if (f.max_col_support) h.max_col_support = *f.max_col_support;
}

Hyperparameters build_hyper(const HyperFlags& f, int n, int p) {
  auto h = Hyperparameters::simulation_defaults(n, p, parse_prior_kind(f.prior));
  apply_hyper_flags(f, p, h);
  h.validate();
  return h;
}

void add_search_flags(CLI::App* sub, SearchConfig& cfg) {
  sub->add_option("--grid-start", cfg.grid_start, "first threshold")->capture_default_str();
  sub->add_option("--grid-end", cfg.grid_end, "threshold grid end (exclusive)")->capture_default_str();
  sub->add_option("--grid-step", cfg.grid_step, "threshold spacing")->capture_default_str();
  sub->add_option("--ridge", cfg.ridge, "ridge added to S before inversion")->capture_default_str();
  sub->add_option("--sss-iters", cfg.sss_iterations, "max search steps per walk")->capture_default_str();
  sub->add_option("--top-m", cfg.sss_top_m, "retained models")->capture_default_str();
  sub->add_option("--sss-seeds", cfg.sss_seeds, "threshold candidates used as walk starts")->capture_default_str();
  sub->add_option("--rescore-width", cfg.rescore_width, "multiplicative: moves re-scored exactly per step")
      ->capture_default_str();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

SparsityPattern load_pattern(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pattern file '" + path + "'");
  return read_pattern(in);
}

// Flat "key = value" lines; '#' starts a comment; [sections] are ignored.
// Keys mirror long flag names. Values already given on the command line win.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");

  auto given = [&args](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };

  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + " is not key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    extra.push_back(flag);
    extra.push_back(value);
  }
  // Subcommand options must follow the subcommand name.
  const auto insert_at = args.size() > 1 ? 2 : args.size();
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), extra.begin(), extra.end());
  return args;
}

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  int threads = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "master random seed")->capture_default_str();
  sub->add_option("--out", c.out, "output path (default stdout)");
  sub->add_option("--threads", c.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  int p = 0;
  std::optional<int> n;
  double sparsity = 0.03;
  double signal = 0.5;
  std::string truth;
};

void run_simulate(const SimulateArgs& a) {
  const int n = a.n.value_or(experiment_sample_size(a.p));
  const auto inst = simulate_instance(a.p, n, a.sparsity, a.signal, a.common.seed, 0);
  std::ostringstream os;
  write_data_csv(os, inst.Y);
  emit(os.str(), a.common.out);
  if (!a.truth.empty()) emit(pattern_to_string(inst.truth.Z0), a.truth);
}

struct ScoreArgs {
  Common common;
  HyperFlags hyper;
  std::string data;
  std::vector<std::string> patterns;
  std::string json;
};

void run_score(const ScoreArgs& a) {
  const Eigen::MatrixXd Y = read_data_csv(a.data);
  const int n = static_cast<int>(Y.rows()), p = static_cast<int>(Y.cols());
  const auto hyper = build_hyper(a.hyper, n, p);
  const auto stats = sample_covariance(Y, hyper.tau_sq);
  const Scorer scorer(stats, hyper);

  std::vector<SparsityPattern> pats;
  for (const auto& path : a.patterns) pats.push_back(load_pattern(path));
  std::vector<ScoredPattern> scored(pats.size());
  parallel_for(pats.size(), a.common.threads, [&](std::size_t i) { scored[i] = scorer.score(pats[i]); });

  CsvTable t({"pattern", "edges", "prior", "likelihood", "total", "cap_violated"});
  nlohmann::json js = nlohmann::json::array();
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const auto& s = scored[i];
    double lik = 0.0;
    for (double c : s.column_terms) lik += c;
    t.row().add(a.patterns[i]).add(s.pattern.edge_count()).add(s.prior_term).add(lik).add(s.total).add(
        s.cap_violated ? "true" : "false");
    js.push_back(to_json(s));
  }
  emit(t.str(), a.common.out);
  if (!a.json.empty()) emit(js.dump(2) + "\n", a.json);
}

struct RatioArgs {
  Common common;
  HyperFlags hyper;
  std::vector<int> p_list{150, 300, 450};
  double sparsity = 0.03;
  double signal = 0.5;
  int reps = 20;
};

void run_ratio(const RatioArgs& a) {
  RatioExperimentConfig cfg;
  cfg.p_list = a.p_list;
  cfg.sparsity = a.sparsity;
  cfg.signal = a.signal;
  cfg.reps = a.reps;
  cfg.seed = a.common.seed;
  cfg.threads = a.common.threads;
  if (a.hyper.prior != "both") cfg.priors = {parse_prior_kind(a.hyper.prior)};
  const HyperFlags flags = a.hyper;
  cfg.adjust = [flags](Hyperparameters& h, int p) { apply_hyper_flags(flags, p, h); };
  const auto rows = ratio_experiment(cfg);
  CsvTable t({"p", "n", "case", "prior", "rep", "log_ratio"});
  for (const auto& r : rows)
    t.row().add(r.p).add(r.n).add(r.perturb).add(std::string(to_string(r.prior))).add(r.rep).add(r.log_ratio);
  emit(t.str(), a.common.out);
}

struct SelectArgs {
  Common common;
  HyperFlags hyper;
  SearchConfig search;
  std::string data;
  std::string pattern_out;
  std::string json;
  std::vector<int> p_list{300};
  double sparsity = 0.03;
  double signal = 0.5;
  int reps = 5;
};

void run_select_data(const SelectArgs& a) {
  const Eigen::MatrixXd Y = read_data_csv(a.data);
  const int n = static_cast<int>(Y.rows()), p = static_cast<int>(Y.cols());
  const auto hyper = build_hyper(a.hyper, n, p);
  const auto stats = sample_covariance(Y, hyper.tau_sq);
  SearchConfig cfg = a.search;
  cfg.seed = a.common.seed;
  cfg.threads = a.common.threads;
  const auto out = select_pattern(stats, hyper, cfg);

  CsvTable t({"rank", "edges", "total", "prior", "likelihood", "pattern"});
  for (std::size_t i = 0; i < out.search.top_m.size(); ++i) {
    const auto& s = out.search.top_m[i];
    t.row().add(i + 1).add(s.pattern.edge_count()).add(s.total).add(s.prior_term).add(s.total - s.prior_term).add(
        edges_compact(s.pattern));
  }
  emit(t.str(), a.common.out);
  if (!a.pattern_out.empty()) emit(pattern_to_string(out.search.best.pattern), a.pattern_out);
  if (!a.json.empty()) {
    auto js = to_json(out.search);
    js["threshold_candidates"] = out.threshold_count;
    js["truncated_candidates"] = out.truncated_count;
    emit(js.dump(2) + "\n", a.json);
  }
}

void run_select_experiment(const SelectArgs& a) {
  SelectionExperimentConfig cfg;
  cfg.p_list = a.p_list;
  cfg.sparsity = a.sparsity;
  cfg.signal = a.signal;
  cfg.reps = a.reps;
  cfg.seed = a.common.seed;
  cfg.threads = a.common.threads;
  cfg.prior = parse_prior_kind(a.hyper.prior);
  cfg.search = a.search;
  const HyperFlags flags = a.hyper;
  cfg.adjust = [flags](Hyperparameters& h, int p) { apply_hyper_flags(flags, p, h); };
  const auto table = selection_experiment(cfg);
  CsvTable t({"p", "n", "rep", "prior", "edges", "tp", "fp", "fn", "tn", "ppv", "tpr", "mcc"});
  for (const auto& r : table.rows) {
    const auto& c = r.metrics.counts;
    t.row().add(r.p).add(r.n).add(r.rep).add(std::string(to_string(r.prior))).add(r.selected_edges).add(c.tp).add(
        c.fp).add(c.fn).add(c.tn).add(r.metrics.ppv).add(r.metrics.tpr).add(r.metrics.mcc);
  }
  for (const auto& s : table.summary)
    t.row().add(s.p).add(experiment_sample_size(s.p)).add("mean").add(std::string(to_string(s.prior))).add("")
        .add("").add("").add("").add("").add(s.ppv).add(s.tpr).add(s.mcc);
  emit(t.str(), a.common.out);
}

struct MetricsArgs {
  Common common;
  std::string estimate, truth;
  std::optional<long long> tp, fp, fn, tn;
};

void run_metrics(const MetricsArgs& a) {
  ConfusionCounts c;
  if (!a.estimate.empty() || !a.truth.empty()) {
    if (a.estimate.empty() || a.truth.empty()) throw InvalidArgument("--estimate and --truth go together");
    c = compare(load_pattern(a.estimate), load_pattern(a.truth));
  } else {
    if (!a.tp || !a.fp || !a.fn || !a.tn) throw InvalidArgument("give --estimate/--truth or all of --tp --fp --fn --tn");
    for (auto v : {*a.tp, *a.fp, *a.fn, *a.tn})
      if (v < 0) throw InvalidArgument("confusion counts must be nonnegative");
    c = {static_cast<std::size_t>(*a.tp), static_cast<std::size_t>(*a.fp), static_cast<std::size_t>(*a.fn),
         static_cast<std::size_t>(*a.tn)};
  }
  if (c.total() == 0) throw InvalidArgument("confusion counts are all zero");
  const auto m = metrics(c);
  CsvTable t({"tp", "fp", "fn", "tn", "ppv", "tpr", "mcc"});
  t.row().add(c.tp).add(c.fp).add(c.fn).add(c.tn).add(m.ppv).add(m.tpr).add(m.mcc);
  emit(t.str(), a.common.out);
}

struct CheckArgs {
  Common common;
  HyperFlags hyper;
  int p = 0;
  int n = 0;
  int d = 1;
  std::string format = "text";
};

void run_check(const CheckArgs& a) {
  const auto hyper = build_hyper(a.hyper, a.n, a.p);
  const auto diags = check_hyperparameters(hyper, a.p, a.n, a.d);
  if (a.format == "csv") {
    CsvTable t({"assumption", "message"});
    for (const auto& d : diags) t.row().add(d.assumption).add(d.message);
    emit(t.str(), a.common.out);
    return;
  }
  std::string text;
  for (const auto& d : diags) text += d.render() + "\n";
  emit(text, a.common.out);
  if (diags.empty()) std::cerr << "no warnings\n";
}

struct LaplaceDiagArgs {
  Common common;
  int p = 3;
  double alpha1 = 0.05;
  std::optional<double> alpha2;
  int nodes = 64;
};

void run_laplace_diag(const LaplaceDiagArgs& a) {
  if (a.p < 2 || a.p > kMaxQuadratureDim) throw InvalidArgument("laplace-diag needs 2 <= p <= 6");
  const double alpha2 = a.alpha2.value_or(static_cast<double>(a.p) * a.p);
  const std::size_t m = position_count(a.p);
  const std::size_t count = std::size_t{1} << m;
  struct Row {
    double laplace = 0.0, quadrature = 0.0;
    bool converged = false;
  };
  std::vector<Row> rows(count);
  parallel_for(count, a.common.threads, [&](std::size_t mask) {
    const auto z = detail::pattern_from_mask(a.p, mask);
    rows[mask].laplace = log_prior_multiplicative_laplace(z, a.alpha1, alpha2).log_value;
    const auto q = log_prior_multiplicative_quadrature_detailed(z, a.alpha1, alpha2, a.nodes);
    rows[mask].quadrature = q.log_value;
    rows[mask].converged = q.converged;
  });
  CsvTable t({"pattern_index", "edges", "pattern", "laplace", "quadrature", "abs_error", "quadrature_converged"});
  for (std::size_t mask = 0; mask < count; ++mask) {
    const auto z = detail::pattern_from_mask(a.p, mask);
    const auto& r = rows[mask];
    t.row().add(mask).add(z.edge_count()).add(edges_compact(z)).add(r.laplace).add(r.quadrature).add(
        std::abs(r.laplace - r.quadrature)).add(r.converged ? "true" : "false");
  }
  emit(t.str(), a.common.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian sparsity selection for the Cholesky factor of a precision matrix"};
  app.require_subcommand(1);
  std::string config_help;
  app.add_option("--config", config_help,
                 "flat key = value file mirroring long flags; explicit flags win (may follow the subcommand)");

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "simulate data from a sparse unit-triangular factor");
  add_common(s_sim, sim.common);
  s_sim->add_option("--p", sim.p, "dimension")->required()->check(CLI::Range(2, 100000));
  s_sim->add_option("--n", sim.n, "sample size (default floor(p/3))")->check(CLI::PositiveNumber);
  s_sim->add_option("--sparsity", sim.sparsity, "fraction of nonzero below-diagonal entries")->capture_default_str();
  s_sim->add_option("--signal", sim.signal, "value of nonzero entries")->capture_default_str();
  s_sim->add_option("--truth", sim.truth, "write the true pattern here");

  ScoreArgs score;
  auto* s_score = app.add_subcommand("score", "score patterns against data");
  add_common(s_score, score.common);
  add_hyper_flags(s_score, score.hyper, "pattern prior: beta-mixture, multiplicative, erdos-renyi");
  s_score->add_option("--data", score.data, "data CSV")->required();
  s_score->add_option("--pattern", score.patterns, "pattern file (repeatable)")->required();
  s_score->add_option("--json", score.json, "also write JSON scores here");

  RatioArgs ratio;
  ratio.hyper.prior = "both";
  auto* s_ratio = app.add_subcommand("ratio-experiment", "log posterior ratio of perturbed vs true patterns");
  add_common(s_ratio, ratio.common);
  add_hyper_flags(s_ratio, ratio.hyper, "prior: beta-mixture, multiplicative, erdos-renyi or both");
  s_ratio->add_option("--p", ratio.p_list, "dimensions (comma separated)")->delimiter(',')->capture_default_str();
  s_ratio->add_option("--sparsity", ratio.sparsity, "fraction of nonzero entries")->capture_default_str();
  s_ratio->add_option("--signal", ratio.signal, "value of nonzero entries")->capture_default_str();
  s_ratio->add_option("--reps", ratio.reps, "replications per p")->capture_default_str();

  SelectArgs sel;
  auto* s_sel = app.add_subcommand("select", "threshold + stochastic search model selection");
  add_common(s_sel, sel.common);
  add_hyper_flags(s_sel, sel.hyper, "pattern prior: beta-mixture, multiplicative, erdos-renyi");
  add_search_flags(s_sel, sel.search);
  s_sel->add_option("--data", sel.data, "data CSV; without it a simulated selection experiment runs");
  s_sel->add_option("--pattern-out", sel.pattern_out, "write the best pattern here (data mode)");
  s_sel->add_option("--json", sel.json, "write the search result as JSON (data mode)");
  s_sel->add_option("--p", sel.p_list, "experiment dimensions (comma separated)")->delimiter(',')->capture_default_str();
  s_sel->add_option("--sparsity", sel.sparsity, "experiment sparsity")->capture_default_str();
  s_sel->add_option("--signal", sel.signal, "experiment signal")->capture_default_str();
  s_sel->add_option("--reps", sel.reps, "experiment replications")->capture_default_str();

  MetricsArgs met;
  auto* s_met = app.add_subcommand("metrics", "PPV, TPR and MCC of an estimate");
  add_common(s_met, met.common);
  s_met->add_option("--estimate", met.estimate, "estimated pattern file");
  s_met->add_option("--truth", met.truth, "true pattern file");
  s_met->add_option("--tp", met.tp, "true positives");
  s_met->add_option("--fp", met.fp, "false positives");
  s_met->add_option("--fn", met.fn, "false negatives");
  s_met->add_option("--tn", met.tn, "true negatives");

  CheckArgs chk;
  auto* s_chk = app.add_subcommand("check-hyper", "compare hyperparameters with the rate conditions");
  add_common(s_chk, chk.common);
  add_hyper_flags(s_chk, chk.hyper, "pattern prior: beta-mixture, multiplicative, erdos-renyi");
  s_chk->add_option("--p", chk.p, "dimension")->required()->check(CLI::Range(2, 1000000));
  s_chk->add_option("--n", chk.n, "sample size")->required()->check(CLI::PositiveNumber);
  s_chk->add_option("--d", chk.d, "estimated max column support of the truth")->capture_default_str();
  s_chk->add_option("--format", chk.format, "text or csv")->check(CLI::IsMember({"text", "csv"}))->capture_default_str();

  LaplaceDiagArgs lap;
  auto* s_lap = app.add_subcommand("laplace-diag", "Laplace vs quadrature multiplicative prior masses");
  add_common(s_lap, lap.common);
  s_lap->add_option("--p", lap.p, "dimension (2..6)")->capture_default_str();
  s_lap->add_option("--alpha1", lap.alpha1, "beta prior first parameter")->capture_default_str();
  s_lap->add_option("--alpha2", lap.alpha2, "beta prior second parameter (default p^2)");
  s_lap->add_option("--nodes", lap.nodes, "initial quadrature nodes per dimension (>= 64)")->capture_default_str();

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = merge_config(std::move(args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (s_sim->parsed()) run_simulate(sim);
    if (s_score->parsed()) run_score(score);
    if (s_ratio->parsed()) run_ratio(ratio);
    if (s_sel->parsed()) sel.data.empty() ? run_select_experiment(sel) : run_select_data(sel);
    if (s_met->parsed()) run_metrics(met);
    if (s_chk->parsed()) run_check(chk);
    if (s_lap->parsed()) run_laplace_diag(lap);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
