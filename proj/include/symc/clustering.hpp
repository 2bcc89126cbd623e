#pragma once

// Cluster discovery for the compression loop: Lloyd k-means over the
// current support, and a greedy search for the (approximately) smallest
// cluster of a given size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "symc/moments.hpp"
#include "symc/random.hpp"

namespace symc {

struct ClusterAssignment {
  std::vector<std::size_t> labels;  // one per input index, in input order
  std::vector<double> centers;      // n_clusters x m, row-major
  std::size_t n_clusters = 0;
  std::size_t iterations = 0;
  std::vector<double> inertia_history;  // after every assignment step

  double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

namespace detail {

inline double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Lloyd's algorithm from k-means++ seeding on the points ws.point(idx[i]).
/// Empty clusters are re-seeded at the point farthest from its center.
inline ClusterAssignment kmeans(const WeightedSet& ws, std::span<const std::size_t> idx, std::size_t n_clusters,
                                std::size_t max_iters, std::uint64_t seed) {
  const std::size_t n = idx.size();
  const std::size_t m = ws.dim();
  if (n_clusters == 0) throw std::invalid_argument("kmeans: n_clusters must be >= 1");
  if (n_clusters > n)
    throw std::invalid_argument("kmeans: n_clusters (" + std::to_string(n_clusters) + ") exceeds number of points (" +
                                std::to_string(n) + ")");
  if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");

  Rng rng(seed);
  ClusterAssignment out;
  out.n_clusters = n_clusters;
  out.centers.assign(n_clusters * m, 0.0);
  out.labels.assign(n, 0);
  auto center = [&](std::size_t c) { return std::span<double>(out.centers.data() + c * m, m); };
  auto pt = [&](std::size_t i) { return ws.point(idx[i]); };

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  std::copy_n(pt(first).begin(), m, center(0).begin());
  for (std::size_t c = 1; c < n_clusters; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::sqdist(pt(i), center(c - 1)));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        u -= d2[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    std::copy_n(pt(pick).begin(), m, center(c).begin());
  }

  std::vector<double> dist(n);
  std::vector<std::size_t> counts(n_clusters);
  for (std::size_t it = 0; it < max_iters; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n_clusters; ++c) {
        const double d = detail::sqdist(pt(i), center(c));
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (it == 0 || best != out.labels[i]) changed = true;
      out.labels[i] = best;
      dist[i] = bd;
      inertia += bd;
    }
    out.inertia_history.push_back(inertia);
    out.iterations = it + 1;
    if (!changed) break;

    std::fill(out.centers.begin(), out.centers.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto ctr = center(out.labels[i]);
      auto p = pt(i);
      for (std::size_t a = 0; a < m; ++a) ctr[a] += p[a];
      ++counts[out.labels[i]];
    }
    for (std::size_t c = 0; c < n_clusters; ++c) {
      if (counts[c] == 0) continue;
      for (auto& x : center(c)) x /= static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < n_clusters; ++c) {
      if (counts[c] != 0) continue;
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy_n(pt(far).begin(), m, center(c).begin());
      dist[far] = 0.0;
    }
  }
  return out;
}

/// Exact k-nearest-neighbour queries over a fixed point set, with points
/// switched off as they leave the support.
class KdTree {
 public:
  KdTree(const WeightedSet& ws, std::vector<std::size_t> idx) : ws_(&ws), idx_(std::move(idx)) {
    order_.resize(idx_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    active_.assign(idx_.size(), 1);
    nodes_.reserve(2 * idx_.size() / kLeaf + 2);
    if (!idx_.empty()) build(0, idx_.size());
  }

  void deactivate(std::size_t local) { active_[local] = 0; }

  /// The `count` nearest active points to query (local ids), nearest first,
  /// ties broken by local id.
  std::vector<std::pair<double, std::size_t>> nearest(std::span<const double> query, std::size_t count) const {
    std::vector<std::pair<double, std::size_t>> heap;
    heap.reserve(count + 1);
    if (!nodes_.empty()) search(0, query, count, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

 private:
  static constexpr std::size_t kLeaf = 16;
  struct Node {
    std::size_t begin, end;
    std::size_t axis = 0;
    double split = 0.0;
    std::size_t left = 0, right = 0;  // 0 => leaf
    std::vector<double> lo, hi;       // bounding box
  };

  std::span<const double> pt(std::size_t local) const { return ws_->point(idx_[local]); }

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t m = ws_->dim();
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    std::vector<double> lo(m, std::numeric_limits<double>::infinity()), hi(m, -std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      auto p = pt(order_[i]);
      for (std::size_t a = 0; a < m; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    if (end - begin > kLeaf) {
      std::size_t axis = 0;
      for (std::size_t a = 1; a < m; ++a)
        if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                       order_.begin() + static_cast<std::ptrdiff_t>(mid),
                       order_.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t a, std::size_t b) { return pt(a)[axis] < pt(b)[axis]; });
      const double split = pt(order_[mid])[axis];
      const std::size_t l = build(begin, mid);
      const std::size_t r = build(mid, end);
      nodes_[id].axis = axis;
      nodes_[id].split = split;
      nodes_[id].left = l;
      nodes_[id].right = r;
    }
    nodes_[id].lo = std::move(lo);
    nodes_[id].hi = std::move(hi);
    return id;
  }

  double box_dist(const Node& nd, std::span<const double> q) const {
    double s = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
      double d = 0.0;
      if (q[a] < nd.lo[a])
        d = nd.lo[a] - q[a];
      else if (q[a] > nd.hi[a])
        d = q[a] - nd.hi[a];
      s += d * d;
    }
    return s;
  }

  void search(std::size_t id, std::span<const double> q, std::size_t count,
              std::vector<std::pair<double, std::size_t>>& heap) const {
    const Node& nd = nodes_[id];
    if (heap.size() == count && box_dist(nd, q) > heap.front().first) return;
    if (nd.left == 0) {
      for (std::size_t i = nd.begin; i < nd.end; ++i) {
        const std::size_t local = order_[i];
        if (!active_[local]) continue;
        std::pair<double, std::size_t> cand{detail::sqdist(pt(local), q), local};
        if (heap.size() < count) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const bool go_left = q[nd.axis] < nd.split;
    search(go_left ? nd.left : nd.right, q, count, heap);
    search(go_left ? nd.right : nd.left, q, count, heap);
  }

  const WeightedSet* ws_;
  std::vector<std::size_t> idx_;
  std::vector<std::size_t> order_;
  std::vector<char> active_;
  std::vector<Node> nodes_;
};

/// Greedy smallest-cluster search with state carried across rounds.
///
/// Every candidate point proposes itself plus its size-1 nearest active
/// neighbours; best() returns the proposal of least diameter (lowest
/// candidate wins ties). Radius to the farthest neighbour is a lower bound
/// on the diameter and prunes the scan. After remove(), only the candidates
/// whose neighbourhood contained the removed point are recomputed.
class SmallestClusterSearch {
 public:
  static constexpr std::size_t kBruteForceLimit = 4096;
  // with exact_nn, at most this many active points are searched by enumerating every subset
  static constexpr std::size_t kExhaustiveLimit = 12;

  SmallestClusterSearch(const WeightedSet& ws, std::vector<std::size_t> support, std::size_t size,
                        bool exact_nn = false)
      : ws_(&ws), idx_(std::move(support)), size_(size), exact_(exact_nn) {
    if (size_ == 0) throw std::invalid_argument("greedy_smallest_cluster: size must be >= 1");
    if (idx_.size() < size_)
      throw std::invalid_argument("greedy_smallest_cluster: support (" + std::to_string(idx_.size()) +
                                  ") smaller than cluster size (" + std::to_string(size_) + ")");
    const std::size_t n = idx_.size();
    for (std::size_t i = 0; i < n; ++i) local_of_.emplace(idx_[i], i);
    active_.assign(n, 1);
    n_active_ = n;
    nbrs_.resize(n);
    radius_.assign(n, 0.0);
    diam_.assign(n, -1.0);
    users_.resize(n);
    if (!exact_nn && n > kBruteForceLimit) tree_.emplace(ws, idx_);
    for (std::size_t q = 0; q < n; ++q) refresh(q);
  }

  std::size_t active_count() const { return n_active_; }

  /// Global indices of the smallest proposal, ascending.
  std::vector<std::size_t> best() {
    if (n_active_ < size_) throw std::logic_error("greedy_smallest_cluster: support smaller than cluster size");
    if (exact_ && n_active_ <= kExhaustiveLimit) return exhaustive_best();
    double best_diam = std::numeric_limits<double>::infinity();
    std::size_t best_q = 0;
    for (const auto& [r, q] : by_radius_) {
      if (r > best_diam) break;
      if (diam_[q] < 0.0) diam_[q] = diameter(nbrs_[q]);
      if (diam_[q] < best_diam || (diam_[q] == best_diam && q < best_q)) {
        best_diam = diam_[q];
        best_q = q;
      }
    }
    std::vector<std::size_t> out;
    out.reserve(size_);
    for (std::size_t l : nbrs_[best_q]) out.push_back(idx_[l]);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Diameter of the set best() would return.
  double best_diameter() {
    auto s = best();
    std::vector<std::size_t> locals;
    for (std::size_t g : s) locals.push_back(local_of_.at(g));
    return diameter(locals);
  }

  void remove(std::size_t global) {
    const auto it = local_of_.find(global);
    if (it == local_of_.end()) return;
    const std::size_t p = it->second;
    if (!active_[p]) return;
    active_[p] = 0;
    --n_active_;
    by_radius_.erase({radius_[p], p});
    if (tree_) tree_->deactivate(p);
    std::vector<std::size_t> users;
    users.swap(users_[p]);
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    for (std::size_t q : users) {
      if (!active_[q]) continue;
      if (std::find(nbrs_[q].begin(), nbrs_[q].end(), p) == nbrs_[q].end()) continue;
      if (n_active_ < size_) {
        by_radius_.erase({radius_[q], q});
        continue;
      }
      refresh(q);
    }
  }

 private:
  std::vector<std::size_t> exhaustive_best() const {
    std::vector<std::size_t> act;
    for (std::size_t l = 0; l < idx_.size(); ++l)
      if (active_[l]) act.push_back(l);
    std::vector<char> pick(act.size(), 0);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(size_), 1);
    double best_diam = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best, cur;
    do {
      cur.clear();
      for (std::size_t i = 0; i < act.size(); ++i)
        if (pick[i]) cur.push_back(act[i]);
      const double d = diameter(cur);
      if (d < best_diam) {
        best_diam = d;
        best = cur;
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
    for (auto& l : best) l = idx_[l];
    std::sort(best.begin(), best.end());
    return best;
  }

  std::span<const double> pt(std::size_t local) const { return ws_->point(idx_[local]); }

  double diameter(const std::vector<std::size_t>& locals) const {
    double best = 0.0;
    for (std::size_t i = 0; i < locals.size(); ++i)
      for (std::size_t j = i + 1; j < locals.size(); ++j) best = std::max(best, detail::sqdist(pt(locals[i]), pt(locals[j])));
    return std::sqrt(best);
  }

  void refresh(std::size_t q) {
    by_radius_.erase({radius_[q], q});
    std::vector<std::pair<double, std::size_t>> near;
    if (tree_) {
      near = tree_->nearest(pt(q), size_);
    } else {
      near.reserve(n_active_);
      for (std::size_t l = 0; l < idx_.size(); ++l)
        if (active_[l]) near.emplace_back(detail::sqdist(pt(q), pt(l)), l);
      std::nth_element(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(size_ - 1), near.end());
      near.resize(size_);
      std::sort(near.begin(), near.end());
    }
    nbrs_[q].clear();
    for (auto& [d, l] : near) {
      nbrs_[q].push_back(l);
      users_[l].push_back(q);
    }
    radius_[q] = std::sqrt(near.back().first);
    diam_[q] = -1.0;
    by_radius_.insert({radius_[q], q});
  }

  const WeightedSet* ws_;
  std::vector<std::size_t> idx_;
  std::size_t size_;
  bool exact_;
  std::map<std::size_t, std::size_t> local_of_;
  std::vector<char> active_;
  std::size_t n_active_ = 0;
  std::vector<std::vector<std::size_t>> nbrs_;
  std::vector<double> radius_;
  std::vector<double> diam_;
  std::vector<std::vector<std::size_t>> users_;
  std::set<std::pair<double, std::size_t>> by_radius_;
  std::optional<KdTree> tree_;
};

/// One-shot smallest-cluster search over the given support indices. With
/// exact_nn the neighbour search is brute force at any size, and supports of
/// at most 12 points are solved exactly.
inline std::vector<std::size_t> greedy_smallest_cluster(const WeightedSet& ws, std::vector<std::size_t> support,
                                                        std::size_t size, bool exact_nn = true) {
  SmallestClusterSearch search(ws, std::move(support), size, exact_nn);
  return search.best();
}

}  // namespace symc
