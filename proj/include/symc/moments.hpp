#pragma once

// Multi-index bookkeeping, monomial feature maps and moments of weighted
// point sets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace symc {

/// Exponent vector (a_1, ..., a_m) of the monomial w_1^{a_1} ... w_m^{a_m}.
struct MultiIndex {
  std::vector<int> exponents;

  int degree() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }
  bool operator==(const MultiIndex&) const = default;
};

/// Number of monomials of degree <= k in m variables, C(m+k, k).
/// Throws std::overflow_error instead of wrapping.
inline std::size_t n_basis(std::size_t m, std::size_t k) {
  if (m < 1) throw std::invalid_argument("n_basis: m must be >= 1");
  // C(m+i, i) = C(m+i-1, i-1) * (m+i) / i, exact at every step.
  unsigned __int128 acc = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<unsigned __int128>(m + i);
    acc /= i;
    if (acc > static_cast<unsigned __int128>(SIZE_MAX))
      throw std::overflow_error("n_basis: C(" + std::to_string(m + k) + ", " +
                                std::to_string(k) + ") overflows size_t");
  }
  return static_cast<std::size_t>(acc);
}

/// All multi-indices of degree <= k in graded order: degree ascending, and
/// within a degree descending lexicographic, so (1,0) precedes (0,1).
inline std::vector<MultiIndex> multi_index_basis(std::size_t m, std::size_t k) {
  const std::size_t total = n_basis(m, k);
  std::vector<MultiIndex> out;
  out.reserve(total);
  std::vector<int> cur(m, 0);
  for (int deg = 0; deg <= static_cast<int>(k); ++deg) {
    // Compositions of deg into m parts, emitted in descending lex order.
    std::vector<MultiIndex> level;
    auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
      if (pos + 1 == m) {
        cur[pos] = left;
        level.push_back({cur});
        return;
      }
      for (int a = left; a >= 0; --a) {
        cur[pos] = a;
        self(self, pos + 1, left - a);
      }
    };
    rec(rec, 0, deg);
    for (auto& mi : level) out.push_back(std::move(mi));
  }
  return out;
}

/// A graded monomial basis with a parent table so that each monomial is a
/// single multiplication away from a lower-degree one.
class MonomialBasis {
 public:
  MonomialBasis(std::size_t m, std::size_t k) : m_(m), k_(k), indices_(multi_index_basis(m, k)) {
    parent_.assign(indices_.size(), 0);
    var_.assign(indices_.size(), 0);
    std::map<std::vector<int>, std::size_t> lookup;
    for (std::size_t i = 0; i < indices_.size(); ++i) lookup.emplace(indices_[i].exponents, i);
    for (std::size_t i = 1; i < indices_.size(); ++i) {
      auto e = indices_[i].exponents;
      std::size_t v = 0;
      while (e[v] == 0) ++v;
      --e[v];
      parent_[i] = lookup.at(e);
      var_[i] = v;
    }
  }

  std::size_t dim() const { return m_; }
  std::size_t order() const { return k_; }
  std::size_t size() const { return indices_.size(); }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }

  /// Writes the monomials of w into out (length size()).
  void evaluate(std::span<const double> w, std::span<double> out) const {
    if (w.size() != m_) throw std::invalid_argument("feature_map: point dimension mismatch");
    if (out.size() != indices_.size()) throw std::invalid_argument("feature_map: output size mismatch");
    out[0] = 1.0;
    for (std::size_t i = 1; i < indices_.size(); ++i) out[i] = out[parent_[i]] * w[var_[i]];
  }

 private:
  std::size_t m_;
  std::size_t k_;
  std::vector<MultiIndex> indices_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> var_;
};

inline std::vector<double> feature_map(std::span<const double> w, const MonomialBasis& basis) {
  std::vector<double> out(basis.size());
  basis.evaluate(w, out);
  return out;
}

/// d' points in R^m with nonnegative multiplicities c_j. Compression only
/// ever rewrites the weights.
class WeightedSet {
 public:
  WeightedSet() = default;
  explicit WeightedSet(std::size_t m) : m_(m) {}

  /// points is row-major d x m. Throws on negative or non-finite weights.
  WeightedSet(std::size_t m, std::vector<double> points, std::vector<double> weights)
      : m_(m), points_(std::move(points)), weights_(std::move(weights)) {
    if (m_ == 0) throw std::invalid_argument("WeightedSet: m must be >= 1");
    if (points_.size() != m_ * weights_.size())
      throw std::invalid_argument("WeightedSet: points size is not d*m");
    for (double c : weights_)
      if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("WeightedSet: weights must be finite and >= 0");
  }

  static WeightedSet uniform(std::size_t m, std::vector<double> points) {
    const std::size_t d = m == 0 ? 0 : points.size() / m;
    return WeightedSet(m, std::move(points), std::vector<double>(d, 1.0));
  }

  std::size_t dim() const { return m_; }
  std::size_t size() const { return weights_.size(); }
  std::span<const double> point(std::size_t j) const { return {points_.data() + j * m_, m_}; }
  double weight(std::size_t j) const { return weights_[j]; }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

  void set_weights(std::vector<double> w) {
    if (w.size() != weights_.size()) throw std::invalid_argument("set_weights: size mismatch");
    for (double c : w)
      if (!(c >= 0.0)) throw std::invalid_argument("set_weights: negative weight");
    weights_ = std::move(w);
  }

  void push_back(std::span<const double> w, double c) {
    if (w.size() != m_) throw std::invalid_argument("push_back: dimension mismatch");
    if (!(c >= 0.0)) throw std::invalid_argument("push_back: negative weight");
    points_.insert(points_.end(), w.begin(), w.end());
    weights_.push_back(c);
  }

  std::vector<std::size_t> support() const {
    std::vector<std::size_t> s;
    for (std::size_t j = 0; j < weights_.size(); ++j)
      if (weights_[j] > 0.0) s.push_back(j);
    return s;
  }
  std::size_t support_size() const {
    return static_cast<std::size_t>(std::count_if(weights_.begin(), weights_.end(), [](double c) { return c > 0.0; }));
  }
  double total_weight() const;

  /// Keeps only supported points (compaction for downstream consumers).
  WeightedSet compacted() const {
    WeightedSet out(m_);
    for (std::size_t j : support()) out.push_back(point(j), weights_[j]);
    return out;
  }

 private:
  std::size_t m_ = 0;
  std::vector<double> points_;
  std::vector<double> weights_;
};

namespace detail {

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Supported entries of ws in a canonical order (points lexicographic), with
/// exact duplicates merged. Any permutation of the input, or splitting a
/// weight across duplicate points, yields the same sequence.
inline std::vector<std::pair<std::size_t, double>> canonical_terms(const WeightedSet& ws) {
  std::vector<std::size_t> order = ws.support();
  auto pt_less = [&](std::size_t a, std::size_t b) {
    auto pa = ws.point(a), pb = ws.point(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pt_less(a, b)) return true;
    if (pt_less(b, a)) return false;
    return ws.weight(a) < ws.weight(b);
  });
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    CompensatedSum c;
    while (j < order.size() && !pt_less(order[i], order[j]) && !pt_less(order[j], order[i])) {
      c.add(ws.weight(order[j]));
      ++j;
    }
    out.emplace_back(order[i], c.value());
    i = j;
  }
  return out;
}

}  // namespace detail

inline double WeightedSet::total_weight() const {
  detail::CompensatedSum s;
  for (auto& [j, c] : detail::canonical_terms(*this)) s.add(c);
  return s.value();
}

/// Moments in the graded monomial basis. values[0] is the total weight
/// (or 1 when normalized).
struct MomentVector {
  std::size_t m = 0;
  std::size_t k = 0;
  bool normalized = false;
  std::vector<double> values;
};

inline MomentVector moment_vector(const WeightedSet& ws, std::size_t k, bool normalized) {
  const MonomialBasis basis(ws.dim(), k);
  const auto terms = detail::canonical_terms(ws);
  std::vector<detail::CompensatedSum> acc(basis.size());
  std::vector<double> phi(basis.size());
  for (auto& [j, c] : terms) {
    basis.evaluate(ws.point(j), phi);
    for (std::size_t i = 0; i < phi.size(); ++i) acc[i].add(c * phi[i]);
  }
  MomentVector mv{ws.dim(), k, normalized, std::vector<double>(basis.size())};
  for (std::size_t i = 0; i < acc.size(); ++i) mv.values[i] = acc[i].value();
  if (normalized) {
    const double total = mv.values[0];
    if (!(total > 0.0)) throw std::domain_error("moment_vector: normalized moments need positive total weight");
    for (auto& v : mv.values) v /= total;
    mv.values[0] = 1.0;
  }
  return mv;
}

/// max_alpha |a_alpha - b_alpha| / (1 + |a_alpha|).
inline double max_relative_moment_residual(const MomentVector& reference, const MomentVector& other) {
  if (reference.values.size() != other.values.size())
    throw std::invalid_argument("moment residual: basis size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    const double r = std::abs(reference.values[i] - other.values[i]) / (1.0 + std::abs(reference.values[i]));
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace symc
