#pragma once

// Sigmoid probe function used to measure compression error:
//   f = (1/sum c) sum_j c_j (1/n) sum_a sigmoid(<w_j, x_a>)

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "symc/moments.hpp"
#include "symc/random.hpp"

namespace symc {

struct ProbeFunction {
  std::size_t m = 0;
  std::vector<double> probes;  // n_probe x m, row-major

  std::size_t count() const { return m == 0 ? 0 : probes.size() / m; }
  std::span<const double> probe(std::size_t a) const { return {probes.data() + a * m, m}; }

  /// Per-object term g(w) = (1/n) sum_a sigmoid(<w, x_a>).
  double term(std::span<const double> w) const {
    double s = 0.0;
    for (std::size_t a = 0; a < count(); ++a) {
      const auto x = probe(a);
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += w[i] * x[i];
      s += 1.0 / (1.0 + std::exp(-dot));
    }
    return s / static_cast<double>(count());
  }
};

/// Probes drawn i.i.d. standard normal per coordinate.
inline ProbeFunction make_probes(std::size_t m, std::size_t n_probe, std::uint64_t seed) {
  if (n_probe < 1) throw std::invalid_argument("make_probes: n_probe must be >= 1");
  if (m < 1) throw std::invalid_argument("make_probes: m must be >= 1");
  Rng rng(seed);
  ProbeFunction pf{m, std::vector<double>(m * n_probe)};
  for (auto& x : pf.probes) x = rng.normal();
  return pf;
}

inline double eval_probe(const WeightedSet& ws, const ProbeFunction& pf) {
  if (ws.dim() != pf.m) throw std::invalid_argument("eval_probe: dimension mismatch");
  detail::CompensatedSum num, den;
  for (auto& [j, c] : detail::canonical_terms(ws)) {
    num.add(c * pf.term(ws.point(j)));
    den.add(c);
  }
  if (!(den.value() > 0.0)) throw std::domain_error("eval_probe: total weight is zero");
  return num.value() / den.value();
}

}  // namespace symc
