#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "random.hpp"

namespace cholsel {

// Below-diagonal position of the Cholesky factor, 0-based, row > col.
struct Edge {
  int row;
  int col;

  friend bool operator==(const Edge&, const Edge&) = default;
  // Column-major order: (col, row).
  friend bool operator<(const Edge& a, const Edge& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  }
};

// Number of below-diagonal positions of a p x p factor.
constexpr std::size_t position_count(int p) noexcept {
  return p < 2 ? 0 : static_cast<std::size_t>(p) * static_cast<std::size_t>(p - 1) / 2;
}

// Column-major linear index of a below-diagonal position.
constexpr std::size_t position_of(int p, Edge e) noexcept {
  // Columns 0..col-1 hold (p-1) + (p-2) + ... + (p-col) positions.
  const auto c = static_cast<std::size_t>(e.col);
  const auto P = static_cast<std::size_t>(p);
  return c * (P - 1) - c * (c - 1) / 2 + static_cast<std::size_t>(e.row - e.col - 1);
}

inline Edge edge_at(int p, std::size_t pos) noexcept {
  int col = 0;
  auto len = static_cast<std::size_t>(p - 1);
  while (pos >= len) {
    pos -= len;
    --len;
    ++col;
  }
  return {col + 1 + static_cast<int>(pos), col};
}

// Per-column supports Z_j of the strictly lower triangle of L. Column j
// (0-based, j < p-1) lists the rows k > j with a free entry L_kj, strictly
// increasing. Immutable once built; "with_*" members return modified copies.
class SparsityPattern {
 public:
  using Support = std::vector<int>;

  SparsityPattern() = default;

  explicit SparsityPattern(int p) : p_(p), supports_(p > 1 ? p - 1 : 0) {
    if (p < 2) throw InvalidArgument("pattern dimension must be at least 2, got " + std::to_string(p));
  }

  SparsityPattern(int p, std::vector<Support> supports) : p_(p), supports_(std::move(supports)) {
    if (p < 2) throw InvalidArgument("pattern dimension must be at least 2, got " + std::to_string(p));
    if (supports_.size() != static_cast<std::size_t>(p - 1))
      throw InvalidArgument("pattern needs p-1 = " + std::to_string(p - 1) + " supports, got " +
                            std::to_string(supports_.size()));
    for (int j = 0; j < p - 1; ++j) {
      const auto& s = supports_[j];
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] <= j || s[i] >= p)
          throw InvalidArgument("support of column " + std::to_string(j) + " holds out-of-range row " +
                                std::to_string(s[i]));
        if (i > 0 && s[i] <= s[i - 1])
          throw InvalidArgument("support of column " + std::to_string(j) + " is not strictly increasing");
      }
      edges_ += s.size();
    }
  }

  static SparsityPattern from_edges(int p, std::span<const Edge> edges) {
    std::vector<Support> supports(p > 1 ? p - 1 : 0);
    for (const Edge& e : edges) {
      if (e.col < 0 || e.col >= p - 1 || e.row <= e.col || e.row >= p)
        throw InvalidArgument("edge (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                              ") outside the strict lower triangle of dimension " + std::to_string(p));
      supports[e.col].push_back(e.row);
    }
    for (auto& s : supports) {
      std::sort(s.begin(), s.end());
      if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw InvalidArgument("duplicate edge");
    }
    return SparsityPattern(p, std::move(supports));
  }

  static SparsityPattern full(int p) {
    std::vector<Support> supports(p > 1 ? p - 1 : 0);
    for (int j = 0; j < p - 1; ++j) {
      supports[j].resize(p - j - 1);
      std::iota(supports[j].begin(), supports[j].end(), j + 1);
    }
    return SparsityPattern(p, std::move(supports));
  }

  int dim() const noexcept { return p_; }
  int columns() const noexcept { return p_ - 1; }
  std::size_t edge_count() const noexcept { return edges_; }
  const Support& support(int j) const { return supports_.at(j); }
  const std::vector<Support>& supports() const noexcept { return supports_; }

  bool contains(Edge e) const {
    if (e.col < 0 || e.col >= p_ - 1) return false;
    const auto& s = supports_[e.col];
    return std::binary_search(s.begin(), s.end(), e.row);
  }

  std::size_t max_support() const noexcept {
    std::size_t m = 0;
    for (const auto& s : supports_) m = std::max(m, s.size());
    return m;
  }

  // Edges sorted by (col, row).
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edges_);
    for (int j = 0; j < p_ - 1; ++j)
      for (int k : supports_[j]) out.push_back({k, j});
    return out;
  }

  SparsityPattern with_support(int j, Support s) const {
    auto supports = supports_;
    supports.at(j) = std::move(s);
    return SparsityPattern(p_, std::move(supports));
  }

  SparsityPattern with_edge(Edge e) const {
    if (contains(e)) return *this;
    auto s = supports_.at(e.col);
    s.insert(std::upper_bound(s.begin(), s.end(), e.row), e.row);
    return with_support(e.col, std::move(s));
  }

  SparsityPattern without_edge(Edge e) const {
    if (!contains(e)) return *this;
    auto s = supports_.at(e.col);
    s.erase(std::lower_bound(s.begin(), s.end(), e.row));
    return with_support(e.col, std::move(s));
  }

  bool is_subset_of(const SparsityPattern& other) const {
    if (other.p_ != p_) return false;
    for (int j = 0; j < p_ - 1; ++j)
      if (!std::includes(other.supports_[j].begin(), other.supports_[j].end(), supports_[j].begin(),
                         supports_[j].end()))
        return false;
    return true;
  }

  std::uint64_t hash() const noexcept {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(p_));
    for (int j = 0; j < p_ - 1; ++j)
      for (int k : supports_[j]) h = mix64(h ^ position_of(p_, {k, j}));
    return h;
  }

  friend bool operator==(const SparsityPattern& a, const SparsityPattern& b) {
    return a.p_ == b.p_ && a.supports_ == b.supports_;
  }

  // Lexicographic order on the sorted edge list; used for tie-breaking.
  friend bool lexicographic_less(const SparsityPattern& a, const SparsityPattern& b) {
    const auto ea = a.edges();
    const auto eb = b.edges();
    return std::lexicographical_compare(ea.begin(), ea.end(), eb.begin(), eb.end());
  }

 private:
  int p_ = 0;
  std::vector<Support> supports_;
  std::size_t edges_ = 0;
};

struct SparsityPatternHash {
  std::size_t operator()(const SparsityPattern& z) const noexcept { return static_cast<std::size_t>(z.hash()); }
};

// Modified Cholesky factor of a precision matrix: Omega = L D^{-1} L^T with
// L unit lower triangular and D = diag(d) positive.
struct CholeskyFactor {
  Eigen::MatrixXd L;
  Eigen::VectorXd d;

  int dim() const noexcept { return static_cast<int>(L.rows()); }

  static CholeskyFactor identity(int p) {
    return {Eigen::MatrixXd::Identity(p, p), Eigen::VectorXd::Ones(p)};
  }

  void validate() const {
    const auto p = L.rows();
    if (L.cols() != p || d.size() != p) throw DimensionMismatch("Cholesky factor shapes disagree");
    for (Eigen::Index i = 0; i < p; ++i) {
      if (L(i, i) != 1.0) throw InvalidArgument("Cholesky factor diagonal must be exactly 1");
      if (!(d(i) > 0.0)) throw InvalidArgument("Cholesky factor D must be strictly positive");
      for (Eigen::Index j = i + 1; j < p; ++j)
        if (L(i, j) != 0.0) throw InvalidArgument("Cholesky factor must be lower triangular");
    }
  }
};

// Support of L: k in Z_j iff |L_kj| > threshold.
inline SparsityPattern pattern_of_factor(const CholeskyFactor& f, double threshold) {
  if (!(threshold >= 0.0)) throw InvalidArgument("threshold must be nonnegative");
  const int p = f.dim();
  std::vector<SparsityPattern::Support> supports(p - 1);
  for (int j = 0; j < p - 1; ++j)
    for (int k = j + 1; k < p; ++k)
      if (std::abs(f.L(k, j)) > threshold) supports[j].push_back(k);
  return SparsityPattern(p, std::move(supports));
}

// Unit lower-triangular factor with `value` on every pattern position, D = I.
inline CholeskyFactor factor_of_pattern(const SparsityPattern& z, double value = 1.0) {
  auto f = CholeskyFactor::identity(z.dim());
  for (const Edge& e : z.edges()) f.L(e.row, e.col) = value;
  return f;
}

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Counts over the p(p-1)/2 below-diagonal positions, `estimate` against `truth`.
inline ConfusionCounts compare(const SparsityPattern& estimate, const SparsityPattern& truth) {
  if (estimate.dim() != truth.dim())
    throw DimensionMismatch("cannot compare patterns of dimension " + std::to_string(estimate.dim()) + " and " +
                            std::to_string(truth.dim()));
  ConfusionCounts c;
  for (int j = 0; j < estimate.columns(); ++j) {
    const auto& a = estimate.support(j);
    const auto& b = truth.support(j);
    std::size_t both = 0;
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
      if (a[ia] == b[ib]) {
        ++both, ++ia, ++ib;
      } else if (a[ia] < b[ib]) {
        ++ia;
      } else {
        ++ib;
      }
    }
    c.tp += both;
    c.fp += a.size() - both;
    c.fn += b.size() - both;
  }
  c.tn = position_count(estimate.dim()) - c.tp - c.fp - c.fn;
  return c;
}

// Perturbations of a true pattern used by the posterior-ratio experiment.
enum class PerturbCase : int {
  half_submodel = 1,    // submodel with ceil(E/2) edges
  double_supermodel = 2,  // supermodel with 2E edges
  half_random = 3,      // any pattern with ceil(E/2) edges, != truth
  double_random = 4,    // any pattern with 2E edges
};

namespace detail {

inline std::vector<std::size_t> sample_positions(std::span<const std::size_t> pool, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(count);
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), count, rng);
  return out;
}

inline SparsityPattern pattern_from_positions(int p, std::span<const std::size_t> positions) {
  std::vector<Edge> edges;
  edges.reserve(positions.size());
  for (std::size_t pos : positions) edges.push_back(edge_at(p, pos));
  return SparsityPattern::from_edges(p, edges);
}

}  // namespace detail

inline SparsityPattern perturb_case(const SparsityPattern& truth, PerturbCase which, Rng& rng) {
  const int p = truth.dim();
  const std::size_t edges = truth.edge_count();
  const std::size_t capacity = position_count(p);
  if (edges == 0) throw InvalidArgument("cannot perturb an empty pattern");
  const std::size_t half = (edges + 1) / 2;
  const std::size_t twice = 2 * edges;

  std::vector<std::size_t> present, absent, all(capacity);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t pos = 0; pos < capacity; ++pos)
    (truth.contains(edge_at(p, pos)) ? present : absent).push_back(pos);

  auto infeasible = [&](std::size_t want) {
    return InvalidArgument("perturbation needs " + std::to_string(want) + " edges but dimension " +
                           std::to_string(p) + " only has " + std::to_string(capacity) + " positions");
  };

  switch (which) {
    case PerturbCase::half_submodel:
      return detail::pattern_from_positions(p, detail::sample_positions(present, half, rng));
    case PerturbCase::double_supermodel: {
      if (twice > capacity) throw infeasible(twice);
      auto extra = detail::sample_positions(absent, edges, rng);
      extra.insert(extra.end(), present.begin(), present.end());
      return detail::pattern_from_positions(p, extra);
    }
    case PerturbCase::half_random:
    case PerturbCase::double_random: {
      const std::size_t want = which == PerturbCase::half_random ? half : twice;
      if (want > capacity) throw infeasible(want);
      // The only pattern of size `want` equal to the truth is the truth itself;
      // when it is the only one of that size there is nothing to resample to.
      if (want == edges && want == capacity) throw infeasible(want + 1);
      for (;;) {
        auto z = detail::pattern_from_positions(p, detail::sample_positions(all, want, rng));
        if (!(z == truth)) return z;
      }
    }
  }
  throw InvalidArgument("unknown perturbation case " + std::to_string(static_cast<int>(which)));
}

// Text format: "p=<int>" then one "k,j" line per edge (1-based, k > j),
// sorted by (j, k).
inline void write_pattern(std::ostream& os, const SparsityPattern& z) {
  os << "p=" << z.dim() << '\n';
  for (const Edge& e : z.edges()) os << (e.row + 1) << ',' << (e.col + 1) << '\n';
}

inline std::string pattern_to_string(const SparsityPattern& z) {
  std::ostringstream os;
  write_pattern(os, z);
  return os.str();
}

namespace detail {

inline int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("bad integer '" + std::string(s) + "' in " + std::string(what));
  return v;
}

}  // namespace detail

inline SparsityPattern read_pattern(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("p=", 0) != 0) throw ParseError("pattern must start with 'p=<int>'");
  const int p = detail::parse_int(std::string_view(line).substr(2), "pattern header");
  if (p < 2) throw ParseError("pattern dimension must be at least 2");
  std::vector<Edge> edges;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("line " + std::to_string(lineno) + ": expected 'k,j'");
    const std::string_view sv(line);
    const int k = detail::parse_int(sv.substr(0, comma), "edge row");
    const int j = detail::parse_int(sv.substr(comma + 1), "edge column");
    if (j < 1 || k <= j || k > p)
      throw ParseError("line " + std::to_string(lineno) + ": edge " + line + " outside the lower triangle");
    const Edge e{k - 1, j - 1};
    if (!edges.empty() && !(edges.back() < e))
      throw ParseError("line " + std::to_string(lineno) + ": edges must be sorted by (j,k) without duplicates");
    edges.push_back(e);
  }
  return SparsityPattern::from_edges(p, edges);
}

inline SparsityPattern pattern_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_pattern(is);
}

}  // namespace cholsel
