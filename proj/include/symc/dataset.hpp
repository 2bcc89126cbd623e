#pragma once

// Labeled regression data, its weighted-set view, and the minibatch sampler
// that treats multiplicities as an unnormalized distribution.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "symc/moments.hpp"
#include "symc/random.hpp"

namespace symc {

struct LabeledDataset {
  Eigen::MatrixXd x;  // rows are inputs
  Eigen::VectorXd y;
  Eigen::VectorXd c;  // multiplicities, ones unless compressed

  LabeledDataset() = default;
  LabeledDataset(Eigen::MatrixXd inputs, Eigen::VectorXd labels)
      : x(std::move(inputs)), y(std::move(labels)), c(Eigen::VectorXd::Ones(x.rows())) {
    if (x.rows() != y.size()) throw std::invalid_argument("LabeledDataset: row count mismatch");
  }

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t in_dim() const { return static_cast<std::size_t>(x.cols()); }
  bool weighted() const { return (c.array() != 1.0).any(); }

  /// Rows as points (x_1, ..., x_in, y) with weights c.
  WeightedSet to_weighted_set() const {
    const std::size_t n = size(), in = in_dim();
    std::vector<double> pts(n * (in + 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < in; ++a) pts[i * (in + 1) + a] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a));
      pts[i * (in + 1) + in] = y[static_cast<Eigen::Index>(i)];
    }
    return WeightedSet(in + 1, std::move(pts), std::vector<double>(c.data(), c.data() + c.size()));
  }

  /// Inverse of to_weighted_set. With drop_zero, unsupported rows are skipped.
  static LabeledDataset from_weighted_set(const WeightedSet& ws, bool drop_zero = false) {
    if (ws.dim() < 2) throw std::invalid_argument("from_weighted_set: need at least one input and one label column");
    const std::size_t in = ws.dim() - 1;
    std::vector<std::size_t> rows;
    for (std::size_t j = 0; j < ws.size(); ++j)
      if (!drop_zero || ws.weight(j) > 0.0) rows.push_back(j);
    LabeledDataset out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(in));
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    out.c.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto p = ws.point(rows[r]);
      const auto ri = static_cast<Eigen::Index>(r);
      for (std::size_t a = 0; a < in; ++a) out.x(ri, static_cast<Eigen::Index>(a)) = p[a];
      out.y[ri] = p[in];
      out.c[ri] = ws.weight(rows[r]);
    }
    return out;
  }

  LabeledDataset subset(const std::vector<std::size_t>& rows) const {
    LabeledDataset out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    out.c.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = static_cast<Eigen::Index>(rows[r]);
      out.x.row(static_cast<Eigen::Index>(r)) = x.row(src);
      out.y[static_cast<Eigen::Index>(r)] = y[src];
      out.c[static_cast<Eigen::Index>(r)] = c[src];
    }
    return out;
  }
};

/// batch_size indices drawn i.i.d. with P(j) = c_j / sum c.
inline std::vector<std::size_t> weighted_minibatch(std::span<const double> c, std::size_t batch_size, Rng& rng) {
  std::vector<double> cum(c.size());
  double run = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (!(c[j] >= 0.0)) throw std::invalid_argument("weighted_minibatch: negative weight");
    run += c[j];
    cum[j] = run;
  }
  if (!(run > 0.0)) throw std::invalid_argument("weighted_minibatch: all weights are zero");
  std::vector<std::size_t> out(batch_size);
  for (auto& o : out) {
    const double u = rng.uniform() * run;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    o = static_cast<std::size_t>(it - cum.begin());
  }
  return out;
}

enum class Sampling { iid, shuffle };

/// Stateful batch source; the index stream depends only on (weights, mode, seed).
/// shuffle enumerates a fresh permutation each pass and is only used for
/// uniformly weighted data; weighted data always falls back to iid.
class MinibatchSampler {
 public:
  MinibatchSampler(const Eigen::VectorXd& c, Sampling mode, std::uint64_t seed)
      : weights_(c.data(), c.data() + c.size()), rng_(seed) {
    if (weights_.empty()) throw std::invalid_argument("MinibatchSampler: empty dataset");
    cum_.resize(weights_.size());
    double run = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      if (!(weights_[j] >= 0.0)) throw std::invalid_argument("MinibatchSampler: negative weight");
      run += weights_[j];
      cum_[j] = run;
    }
    if (!(run > 0.0)) throw std::invalid_argument("MinibatchSampler: all weights are zero");
    const bool uniform = std::all_of(weights_.begin(), weights_.end(), [&](double w) { return w == weights_[0]; });
    mode_ = (mode == Sampling::shuffle && uniform) ? Sampling::shuffle : Sampling::iid;
  }

  Sampling mode() const { return mode_; }

  std::vector<std::size_t> next(std::size_t batch_size) {
    std::vector<std::size_t> out(batch_size);
    if (mode_ == Sampling::iid) {
      const double total = cum_.back();
      for (auto& o : out) {
        auto it = std::upper_bound(cum_.begin(), cum_.end(), rng_.uniform() * total);
        if (it == cum_.end()) --it;
        o = static_cast<std::size_t>(it - cum_.begin());
      }
      return out;
    }
    for (auto& o : out) {
      if (pos_ == perm_.size()) reshuffle();
      o = perm_[pos_++];
    }
    return out;
  }

 private:
  void reshuffle() {
    perm_.resize(weights_.size());
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    for (std::size_t i = perm_.size(); i > 1; --i) std::swap(perm_[i - 1], perm_[rng_.index(i)]);
    pos_ = 0;
  }

  std::vector<double> weights_;
  std::vector<double> cum_;
  Rng rng_;
  Sampling mode_ = Sampling::iid;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

}  // namespace symc
