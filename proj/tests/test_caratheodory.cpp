#include <gtest/gtest.h>

#include <cmath>

#include "symc/caratheodory.hpp"
#include "symc/random.hpp"

using namespace symc;

namespace {

WeightedSet random_set(std::size_t d, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> pts(d * m), w(d);
  for (auto& v : pts) v = rng.uniform(-1.0, 1.0);
  for (auto& c : w) c = rng.uniform(0.1, 2.0);
  return WeightedSet(m, pts, w);
}

}  // namespace

TEST(NullVector, HandTwoByThree) {
  Eigen::MatrixXd A(2, 3);
  A << 1, 1, 1, 0, 1, 2;
  const Eigen::VectorXd v = null_vector(A);
  // null space is spanned by (1,-2,1); the middle entry has the largest
  // magnitude and is made positive
  const double s = 1.0 / std::sqrt(6.0);
  EXPECT_NEAR(v[0], -s, 1e-14);
  EXPECT_NEAR(v[1], 2 * s, 1e-14);
  EXPECT_NEAR(v[2], -s, 1e-14);
}

TEST(NullVector, DuplicateColumns) {
  Eigen::MatrixXd A(2, 3);
  A << 1, 1, 1, 0, 0, 0;
  // rank 1, so any unit vector orthogonal to (1,1,1) qualifies; check the contract
  const Eigen::VectorXd v = null_vector(A);
  EXPECT_NEAR(v.norm(), 1.0, 1e-14);
  EXPECT_LE((A * v).norm(), 1e-12);
  Eigen::MatrixXd B(1, 2);
  B << 3, 3;
  const Eigen::VectorXd u = null_vector(B);
  EXPECT_NEAR(u[0], -u[1], 1e-14);
  EXPECT_NEAR(std::abs(u[0]), 1.0 / std::sqrt(2.0), 1e-14);
}

TEST(NullVector, RandomResidualAndSign) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd A(6, 10);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.normal();
    const Eigen::VectorXd v = null_vector(A);
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_LE((A * v).norm(), 1e-10 * A.norm());
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    EXPECT_GT(v[imax], 0.0);
  }
}

TEST(NullVector, RequiresMoreColumnsThanRows) {
  EXPECT_THROW(null_vector(Eigen::MatrixXd::Identity(3, 3)), std::invalid_argument);
}

TEST(ReduceSupport, ThreePointHandExample) {
  const WeightedSet ws(1, {0.0, 1.0, 2.0}, {1.0, 1.0, 1.0});
  const auto [out, rep] = reduce_support(ws, 1);
  EXPECT_LE(out.support_size(), 2u);
  // v = (-1,2,-1)/sqrt6, t = c_2/v_2 removes the middle point
  EXPECT_NEAR(out.weight(0), 1.5, 1e-14);
  EXPECT_EQ(out.weight(1), 0.0);
  EXPECT_NEAR(out.weight(2), 1.5, 1e-14);
  const auto p = moment_vector(out, 1, false);
  EXPECT_NEAR(p.values[0], 3.0, 1e-14);
  EXPECT_NEAR(p.values[1], 3.0, 1e-14);
  EXPECT_EQ(out.points(), ws.points());
  EXPECT_EQ(rep.iterations, 1u);
  EXPECT_EQ(rep.initial_support, 3u);
  EXPECT_EQ(rep.final_support, 2u);
}

TEST(ReduceSupport, SmallSupportUnchanged) {
  const auto ws = random_set(6, 2, 3);
  const auto [out, rep] = reduce_support(ws, 2);
  EXPECT_EQ(out.weights(), ws.weights());
  EXPECT_EQ(rep.iterations, 0u);
}

TEST(ReduceSupport, FiftyPointsInSquare) {
  Rng rng(42);
  std::vector<double> pts(100);
  for (auto& v : pts) v = rng.uniform(-1.0, 1.0);
  const auto ws = WeightedSet::uniform(2, pts);
  const auto [out, rep] = reduce_support(ws, 2, 1e-9);
  EXPECT_LE(out.support_size(), 6u);
  EXPECT_LE(max_relative_moment_residual(moment_vector(ws, 2, false), moment_vector(out, 2, false)), 1e-9);
  EXPECT_EQ(rep.final_support, out.support_size());
}

TEST(ReduceSupport, PropertySweep) {
  // support bound, nonnegativity after every loop, strict support decrease
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t m = 1 + rng.index(3), k = 1 + rng.index(3);
    const std::size_t N = n_basis(m, k);
    const std::size_t d = N + 1 + rng.index(3 * N);
    const auto ws = random_set(d, m, 1000 + seed);
    std::size_t prev = d;
    bool nonneg = true, decreasing = true;
    const auto [out, rep] = reduce_support(ws, k, 1e-8, [&](const std::vector<double>& c) {
      std::size_t s = 0;
      for (double x : c) {
        nonneg = nonneg && x >= 0.0;
        s += x > 0.0;
      }
      decreasing = decreasing && s < prev;
      prev = s;
    });
    EXPECT_TRUE(nonneg) << seed;
    EXPECT_TRUE(decreasing) << seed;
    EXPECT_LE(out.support_size(), N) << seed;
    EXPECT_LE(rep.iterations, rep.initial_support) << seed;
    EXPECT_LE(rep.max_moment_residual, 1e-8) << seed;
    EXPECT_EQ(out.points(), ws.points());
  }
}

TEST(ReduceSupport, OffsetCloudStaysAccurate) {
  // a tight cluster far from the origin: raw monomials are badly scaled
  Rng rng(5);
  std::vector<double> pts;
  for (int i = 0; i < 200; ++i)
    for (int a = 0; a < 3; ++a) pts.push_back(50.0 + 1e-2 * rng.uniform(-1.0, 1.0));
  const auto ws = WeightedSet::uniform(3, pts);
  const auto [out, rep] = reduce_support(ws, 4);
  EXPECT_LE(out.support_size(), n_basis(3, 4));
  EXPECT_LE(rep.max_moment_residual, 1e-8);
}

TEST(ReduceSupport, DeterministicBitForBit) {
  const auto ws = random_set(120, 3, 9);
  const auto a = reduce_support(ws, 3).first, b = reduce_support(ws, 3).first;
  EXPECT_EQ(a.weights(), b.weights());
}

TEST(ReduceSupport, ZeroWeightsIgnored) {
  auto ws = random_set(30, 1, 4);
  std::vector<double> w = ws.weights();
  for (std::size_t j = 0; j < w.size(); j += 2) w[j] = 0.0;
  ws.set_weights(w);
  const auto [out, rep] = reduce_support(ws, 2);
  EXPECT_EQ(rep.initial_support, 15u);
  for (std::size_t j = 0; j < w.size(); j += 2) EXPECT_EQ(out.weight(j), 0.0);
  EXPECT_LE(out.support_size(), 3u);
}
