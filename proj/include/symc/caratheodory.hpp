#pragma once

// Support reduction of a weighted set down to at most C(m+k, k) points while
// keeping every moment of order <= k.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "symc/moments.hpp"

namespace symc {

struct ReductionReport {
  std::size_t iterations = 0;  // loop count; one null vector per loop
  std::size_t initial_support = 0;
  std::size_t final_support = 0;
  double max_moment_residual = 0.0;  // max_alpha |p'-p| / (1+|p|), raw coordinates
};

/// Raised when a reduction cannot keep the moments within tolerance.
class ToleranceError : public std::runtime_error {
 public:
  ToleranceError(const std::string& what, ReductionReport report)
      : std::runtime_error(what), report_(report) {}
  const ReductionReport& report() const { return report_; }

 private:
  ReductionReport report_;
};

/// Unit vector v with A v = 0 for a matrix with more columns than rows.
///
/// Taken as the right singular vector of the smallest singular value. The
/// entry of largest magnitude is made positive; entries equal in magnitude
/// up to a few ulps count as ties and the lowest index wins.
inline Eigen::VectorXd null_vector(const Eigen::MatrixXd& A, double tol = 1e-10) {
  if (A.cols() <= A.rows())
    throw std::invalid_argument("null_vector: need more columns than rows (got " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()) + ")");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  Eigen::VectorXd v = svd.matrixV().col(A.cols() - 1);
  v.normalize();

  const double residual = (A * v).norm();
  const double bound = tol * A.norm();
  if (!(residual <= bound) && A.norm() > 0.0)
    throw std::runtime_error("null_vector: residual " + std::to_string(residual) + " exceeds bound " +
                             std::to_string(bound));

  const double vmax = v.cwiseAbs().maxCoeff();
  const double tie = vmax * (1.0 - 64.0 * std::numeric_limits<double>::epsilon());
  Eigen::Index lead = 0;
  while (std::abs(v[lead]) < tie) ++lead;
  if (v[lead] < 0.0) v = -v;
  return v;
}

namespace detail {

/// Column j of the result is the monomial vector of point j after shifting by
/// the weighted centroid and dividing by the largest deviation norm.
inline Eigen::MatrixXd conditioned_features(const WeightedSet& ws, const std::vector<std::size_t>& idx,
                                            const MonomialBasis& basis) {
  const std::size_t m = ws.dim();
  std::vector<double> centroid(m, 0.0);
  double total = 0.0;
  for (std::size_t j : idx) {
    total += ws.weight(j);
    auto p = ws.point(j);
    for (std::size_t a = 0; a < m; ++a) centroid[a] += ws.weight(j) * p[a];
  }
  for (auto& x : centroid) x /= total;

  double scale = 0.0;
  for (std::size_t j : idx) {
    auto p = ws.point(j);
    double n2 = 0.0;
    for (std::size_t a = 0; a < m; ++a) n2 += (p[a] - centroid[a]) * (p[a] - centroid[a]);
    scale = std::max(scale, std::sqrt(n2));
  }
  if (!(scale > 0.0)) scale = 1.0;

  Eigen::MatrixXd phi(basis.size(), idx.size());
  std::vector<double> shifted(m);
  for (std::size_t col = 0; col < idx.size(); ++col) {
    auto p = ws.point(idx[col]);
    for (std::size_t a = 0; a < m; ++a) shifted[a] = (p[a] - centroid[a]) / scale;
    basis.evaluate(shifted, std::span<double>(phi.col(col).data(), basis.size()));
  }
  return phi;
}

}  // namespace detail

/// Carathéodory reduction. Returns a copy of ws whose support has at most
/// n_basis(m, k) points, with the same points and the same unnormalized
/// moments up to order k.
///
/// Each loop finds a null vector v of the monomial matrix of N+1 surviving
/// points, steps c <- c - t v with t = min_{v_j > 0} c_j / v_j and zeroes
/// every index attaining the minimum. Throws ToleranceError when the final
/// moment residual exceeds tol. `observe`, if set, sees the weights of the
/// initial support after every loop.
inline std::pair<WeightedSet, ReductionReport> reduce_support(
    const WeightedSet& ws, std::size_t k, double tol = 1e-8,
    const std::function<void(const std::vector<double>&)>& observe = {}) {
  const std::size_t N = n_basis(ws.dim(), k);
  const std::vector<std::size_t> supp = ws.support();

  ReductionReport report;
  report.initial_support = supp.size();
  report.final_support = supp.size();
  if (supp.size() <= N) return {ws, report};

  const MonomialBasis basis(ws.dim(), k);
  const Eigen::MatrixXd phi = detail::conditioned_features(ws, supp, basis);

  std::vector<double> c(supp.size());
  for (std::size_t i = 0; i < supp.size(); ++i) c[i] = ws.weight(supp[i]);

  // Positions into supp that still carry weight, ascending.
  std::vector<std::size_t> active(supp.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;

  Eigen::MatrixXd A(N, N + 1);
  while (active.size() > N) {
    for (std::size_t col = 0; col <= N; ++col) A.col(col) = phi.col(active[col]);
    const Eigen::VectorXd v = null_vector(A);

    double t = std::numeric_limits<double>::infinity();
    for (std::size_t col = 0; col <= N; ++col)
      if (v[col] > 0.0) t = std::min(t, c[active[col]] / v[col]);

    const double tie = t * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
    for (std::size_t col = 0; col <= N; ++col) {
      double& cj = c[active[col]];
      if (v[col] > 0.0 && cj / v[col] <= tie) {
        cj = 0.0;
        continue;
      }
      cj -= t * v[col];
      if (cj <= 0.0) cj = 0.0;
    }
    std::erase_if(active, [&](std::size_t i) { return c[i] == 0.0; });
    ++report.iterations;
    if (observe) observe(c);
  }

  std::vector<double> weights = ws.weights();
  for (std::size_t i = 0; i < supp.size(); ++i) weights[supp[i]] = c[i];
  WeightedSet out = ws;
  out.set_weights(std::move(weights));

  report.final_support = active.size();
  report.max_moment_residual = max_relative_moment_residual(moment_vector(ws, k, false), moment_vector(out, k, false));
  if (!(report.max_moment_residual <= tol))
    throw ToleranceError("reduce_support: moment residual " + std::to_string(report.max_moment_residual) +
                             " exceeds tolerance " + std::to_string(tol),
                         report);
  return {std::move(out), report};
}

}  // namespace symc
