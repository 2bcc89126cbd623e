#pragma once

// Synthetic regression tasks: a random ReLU teacher and the cylindrical
// harmonic J_6(20 r) cos(6 theta), both on the square [-1,1]^2.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include "symc/dataset.hpp"
#include "symc/nn.hpp"
#include "symc/random.hpp"

namespace symc {

/// Bessel function of the first kind, J_n(x) for 0 <= n <= 20, 0 <= x <= 64.
///
/// Downward recurrence J_{k-1} = (2k/x) J_k - J_{k+1} from an even start
/// order well above both n and x, normalized with J_0 + 2 sum J_{2k} = 1.
/// The start order is max(n, ceil x) + 20 + ceil(sqrt(40 x)); with only
/// n + 20 + ... the recurrence has not yet become dominated by J near x = 64.
inline double bessel_j(int n, double x) {
  if (n < 0 || n > 20) throw std::domain_error("bessel_j: order must be in [0, 20]");
  if (!(x >= 0.0 && x <= 64.0)) throw std::domain_error("bessel_j: argument must be in [0, 64]");
  if (x == 0.0) return n == 0 ? 1.0 : 0.0;

  int start = std::max(n, static_cast<int>(std::ceil(x))) + 20 + static_cast<int>(std::ceil(std::sqrt(40.0 * x)));
  if (start % 2) ++start;

  constexpr double big = 1e250;
  double jp1 = 0.0, j = 1e-300, result = 0.0, norm = 0.0;
  for (int k = start; k > 0; --k) {
    const double jm1 = (2.0 * k / x) * j - jp1;
    jp1 = j;
    j = jm1;  // now J_{k-1}
    if (k - 1 == n) result = j;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * j;
    if (std::abs(j) > big) {
      j /= big;
      jp1 /= big;
      result /= big;
      norm /= big;
    }
  }
  norm += j;  // J_0
  return result / norm;
}

inline double cylindrical_harmonic(double x1, double x2) {
  const double r = std::hypot(x1, x2);
  if (r == 0.0) return 0.0;
  return bessel_j(6, 20.0 * r) * std::cos(6.0 * std::atan2(x2, x1));
}

namespace detail {

inline Eigen::MatrixXd uniform_square(std::size_t n, Rng& rng) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    x(r, 0) = rng.uniform(-1.0, 1.0);
    x(r, 1) = rng.uniform(-1.0, 1.0);
  }
  return x;
}

inline Eigen::VectorXd harmonic_labels(const Eigen::MatrixXd& x) {
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) y[r] = cylindrical_harmonic(x(r, 0), x(r, 1));
  return y;
}

constexpr std::uint64_t kTeacherStream = 0x7465;
constexpr std::uint64_t kInputStream = 0x78;
constexpr std::uint64_t kNoiseStream = 0x6e;

}  // namespace detail

struct TeacherStudent {
  LabeledDataset data;
  TwoLayerNet teacher;
};

inline TwoLayerNet make_teacher(std::uint64_t seed) {
  return TwoLayerNet::init(2, 50, 1, Activation::relu, derive_seed(seed, {detail::kTeacherStream}));
}

/// d samples (x, teacher(x) + N(0, noise_sd^2)), x uniform on [-1,1]^2.
inline TeacherStudent make_teacher_student(std::size_t d, std::uint64_t seed, double noise_sd = 3.0) {
  if (d < 1) throw std::invalid_argument("make_teacher_student: d must be >= 1");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("make_teacher_student: noise_sd must be >= 0");
  TeacherStudent out{{}, make_teacher(seed)};
  Rng xr(derive_seed(seed, {detail::kInputStream}));
  Rng nr(derive_seed(seed, {detail::kNoiseStream}));
  Eigen::MatrixXd x = detail::uniform_square(d, xr);
  Eigen::VectorXd y = forward(out.teacher, x).col(0);
  if (noise_sd > 0.0)
    for (Eigen::Index r = 0; r < y.size(); ++r) y[r] += noise_sd * nr.normal();
  out.data = LabeledDataset(std::move(x), std::move(y));
  return out;
}

inline LabeledDataset make_harmonic_dataset(std::size_t d, std::uint64_t seed, double noise_sd = 0.2) {
  if (d < 1) throw std::invalid_argument("make_harmonic_dataset: d must be >= 1");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("make_harmonic_dataset: noise_sd must be >= 0");
  Rng xr(derive_seed(seed, {detail::kInputStream}));
  Rng nr(derive_seed(seed, {detail::kNoiseStream}));
  Eigen::MatrixXd x = detail::uniform_square(d, xr);
  Eigen::VectorXd y = detail::harmonic_labels(x);
  if (noise_sd > 0.0)
    for (Eigen::Index r = 0; r < y.size(); ++r) y[r] += noise_sd * nr.normal();
  return LabeledDataset(std::move(x), std::move(y));
}

/// Noise-free evaluation sets on fresh inputs.
inline LabeledDataset teacher_test_set(const TwoLayerNet& teacher, std::size_t n, std::uint64_t seed) {
  Rng xr(seed);
  Eigen::MatrixXd x = detail::uniform_square(n, xr);
  Eigen::VectorXd y = forward(teacher, x).col(0);
  return LabeledDataset(std::move(x), std::move(y));
}

inline LabeledDataset harmonic_test_set(std::size_t n, std::uint64_t seed) {
  Rng xr(seed);
  Eigen::MatrixXd x = detail::uniform_square(n, xr);
  Eigen::VectorXd y = detail::harmonic_labels(x);
  return LabeledDataset(std::move(x), std::move(y));
}

}  // namespace symc
