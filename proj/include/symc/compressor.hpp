#pragma once

// The compression loop: cluster the support, moment-match inside each
// cluster, repeat until the support fits the target size.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "symc/caratheodory.hpp"
#include "symc/clustering.hpp"
#include "symc/moments.hpp"
#include "symc/random.hpp"

namespace symc {

struct CompressionConfig {
  std::size_t k = 2;            // moment order
  std::size_t target_size = 0;  // d'
  double tol = 1e-8;            // relative moment tolerance
  double switch_factor = 4.0;   // greedy rounds once |supp| <= switch_factor * d'
  std::uint64_t seed = 0;
  bool exact_nn = false;
  std::size_t kmeans_iters = 25;
};

struct Compression {
  WeightedSet set;
  ReductionReport report;
  bool target_reached = true;
  std::size_t kmeans_rounds = 0;
  std::size_t greedy_rounds = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline WeightedSet subset(const WeightedSet& ws, const std::vector<std::size_t>& members) {
  WeightedSet out(ws.dim());
  for (std::size_t j : members) out.push_back(ws.point(j), ws.weight(j));
  return out;
}

/// Runs reduce_support on the members and writes the weights back.
/// Returns the members whose weight became zero.
inline std::vector<std::size_t> reduce_cluster(std::vector<double>& weights, const WeightedSet& ws,
                                               const std::vector<std::size_t>& members, std::size_t k, double tol,
                                               ReductionReport& total) {
  WeightedSet sub(ws.dim());
  for (std::size_t j : members) sub.push_back(ws.point(j), weights[j]);
  auto [reduced, rep] = reduce_support(sub, k, tol);
  total.iterations += rep.iterations;
  total.max_moment_residual = std::max(total.max_moment_residual, rep.max_moment_residual);
  std::vector<std::size_t> zeroed;
  for (std::size_t i = 0; i < members.size(); ++i) {
    weights[members[i]] = reduced.weight(i);
    if (reduced.weight(i) == 0.0 && sub.weight(i) > 0.0) zeroed.push_back(members[i]);
  }
  return zeroed;
}

}  // namespace detail

/// Compresses ws to at most cfg.target_size supported points. Points never
/// move; weights are rearranged so that every unnormalized moment up to
/// order cfg.k is kept to cfg.tol.
///
/// k-means rounds (about 2N points per cluster, N = C(m+k, k)) run while the
/// support exceeds switch_factor * d'; after that, or as soon as a k-means
/// round makes no progress, each greedy round reduces the smallest cluster
/// of N+1 points. If d' < N the loop stops at N points and target_reached
/// is false. Throws ToleranceError on a moment breach.
inline Compression compress(const WeightedSet& ws, const CompressionConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("compress: k must be >= 1");
  if (!(cfg.switch_factor >= 1.0)) throw std::invalid_argument("compress: switch_factor must be >= 1");
  if (ws.support_size() == 0) throw std::invalid_argument("compress: input has empty support");

  const std::size_t N = n_basis(ws.dim(), cfg.k);
  const std::size_t target = cfg.target_size;
  Compression out{ws, {}, true, 0, 0, {}};
  out.report.initial_support = ws.support_size();
  out.report.final_support = out.report.initial_support;
  if (out.report.initial_support <= target) return out;
  if (target < N)
    out.warnings.push_back("target " + std::to_string(target) + " is below N_{m,k} = " + std::to_string(N) +
                           "; reduction floors at N survivors");

  std::vector<double> weights = ws.weights();
  auto support_of = [&] {
    std::vector<std::size_t> s;
    for (std::size_t j = 0; j < weights.size(); ++j)
      if (weights[j] > 0.0) s.push_back(j);
    return s;
  };

  std::vector<std::size_t> supp = support_of();
  bool kmeans_stalled = false;
  while (supp.size() > target && !kmeans_stalled &&
         static_cast<double>(supp.size()) > cfg.switch_factor * static_cast<double>(target)) {
    const std::size_t n_clusters = (supp.size() + 2 * N - 1) / (2 * N);
    const ClusterAssignment ca =
        kmeans(ws, supp, n_clusters, cfg.kmeans_iters, derive_seed(cfg.seed, {0x6b6d, out.kmeans_rounds}));
    std::vector<std::vector<std::size_t>> members(n_clusters);
    for (std::size_t i = 0; i < supp.size(); ++i) members[ca.labels[i]].push_back(supp[i]);

    bool progressed = false;
    for (const auto& mem : members) {
      if (mem.size() <= N) continue;
      detail::reduce_cluster(weights, ws, mem, cfg.k, cfg.tol, out.report);
      progressed = true;
    }
    ++out.kmeans_rounds;
    supp = support_of();
    kmeans_stalled = !progressed;
  }

  if (supp.size() > target && supp.size() > N) {
    SmallestClusterSearch search(ws, supp, N + 1, cfg.exact_nn);
    std::size_t live = supp.size();
    while (live > target && live > N) {
      const std::vector<std::size_t> cluster = search.best();
      const auto zeroed = detail::reduce_cluster(weights, ws, cluster, cfg.k, cfg.tol, out.report);
      for (std::size_t j : zeroed) search.remove(j);
      live -= zeroed.size();
      ++out.greedy_rounds;
    }
    supp = support_of();
  }

  out.set.set_weights(std::move(weights));
  out.report.final_support = supp.size();
  out.target_reached = supp.size() <= target;
  out.report.max_moment_residual =
      max_relative_moment_residual(moment_vector(ws, cfg.k, false), moment_vector(out.set, cfg.k, false));
  if (!(out.report.max_moment_residual <= cfg.tol))
    throw ToleranceError("compress: global moment residual " + std::to_string(out.report.max_moment_residual) +
                             " exceeds tolerance " + std::to_string(cfg.tol),
                         out.report);
  return out;
}

/// |f(a) - f(b)| for a symmetric function f of weighted sets.
template <typename F>
double compression_error(const WeightedSet& a, const WeightedSet& b, F&& f) {
  if (a.dim() != b.dim()) throw std::invalid_argument("compression_error: dimension mismatch");
  return std::abs(f(a) - f(b));
}

}  // namespace symc
