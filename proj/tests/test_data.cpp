#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>

#include "symc/data.hpp"

using namespace symc;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

// power series sum_k (-1)^k (x/2)^(2k+n) / (k! (k+n)!) in 50 digits
double bessel_series(int n, double xd) {
  const Big x = xd, h = x / 2;
  Big term = 1;
  for (int i = 1; i <= n; ++i) term *= h / i;
  Big sum = term;
  const Big h2 = h * h;
  for (int k = 1; k < 400; ++k) {
    term *= -h2 / (Big(k) * Big(k + n));
    sum += term;
    if (abs(term) < Big("1e-45")) break;
  }
  return sum.convert_to<double>();
}

double sample_variance(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(Bessel, AgreesWithHighPrecisionSeries) {
  double worst = 0.0;
  for (int n = 0; n <= 8; ++n)
    for (double x = 0.0; x <= 40.0; x += 0.37) worst = std::max(worst, std::abs(bessel_j(n, x) - bessel_series(n, x)));
  RecordProperty("max_abs_error", std::to_string(worst));
  EXPECT_LE(worst, 1e-10);
}

TEST(Bessel, UpperRangeAgainstSeries) {
  for (int n : {0, 6, 20})
    for (double x : {45.0, 55.5, 64.0}) EXPECT_NEAR(bessel_j(n, x), bessel_series(n, x), 1e-10) << n << " " << x;
}

TEST(Bessel, ValuesAtZero) {
  EXPECT_EQ(bessel_j(0, 0.0), 1.0);
  EXPECT_EQ(bessel_j(6, 0.0), 0.0);
}

TEST(Bessel, ThreeTermRecurrence) {
  for (int n = 1; n <= 10; ++n)
    for (double x = 0.5; x <= 40.0; x += 0.5) {
      const double lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x), rhs = 2.0 * n / x * bessel_j(n, x);
      EXPECT_LE(std::abs(lhs - rhs), 1e-9 * std::max(1.0, std::abs(rhs))) << n << " " << x;
    }
}

TEST(Bessel, RangeErrors) {
  EXPECT_THROW(bessel_j(-1, 1.0), std::domain_error);
  EXPECT_THROW(bessel_j(21, 1.0), std::domain_error);
  EXPECT_THROW(bessel_j(0, -0.1), std::domain_error);
  EXPECT_THROW(bessel_j(0, 64.5), std::domain_error);
  EXPECT_THROW(bessel_j(0, std::nan("")), std::domain_error);
}

TEST(Harmonic, SixfoldSymmetry) {
  Rng rng(3);
  const double a = std::numbers::pi / 3;
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-0.7, 0.7), y = rng.uniform(-0.7, 0.7);
    const double f = cylindrical_harmonic(x, y);
    EXPECT_NEAR(cylindrical_harmonic(std::cos(a) * x - std::sin(a) * y, std::sin(a) * x + std::cos(a) * y), f, 1e-12);
    EXPECT_NEAR(cylindrical_harmonic(x, -y), f, 1e-12);
  }
  EXPECT_EQ(cylindrical_harmonic(0.0, 0.0), 0.0);
}

TEST(Harmonic, MatchesPolarDefinition) {
  EXPECT_NEAR(cylindrical_harmonic(0.5, 0.0), bessel_series(6, 10.0), 1e-12);
  // cos(6 * pi/12) = 0
  EXPECT_NEAR(cylindrical_harmonic(0.5 * std::cos(std::numbers::pi / 12), 0.5 * std::sin(std::numbers::pi / 12)), 0.0,
              1e-12);
}

TEST(Generators, NoiseFreeLabelsAreExact) {
  const auto ts = make_teacher_student(200, 4, 0.0);
  EXPECT_EQ(ts.data.y, forward(ts.teacher, ts.data.x).col(0));
  const auto h = make_harmonic_dataset(200, 4, 0.0);
  for (Eigen::Index r = 0; r < 200; ++r) EXPECT_EQ(h.y[r], cylindrical_harmonic(h.x(r, 0), h.x(r, 1)));
  EXPECT_LE(h.x.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Generators, DeterministicPerSeed) {
  const auto a = make_teacher_student(50, 7), b = make_teacher_student(50, 7), c = make_teacher_student(50, 8);
  EXPECT_EQ(a.data.x, b.data.x);
  EXPECT_EQ(a.data.y, b.data.y);
  EXPECT_NE(a.data.y, c.data.y);
  EXPECT_EQ(make_harmonic_dataset(50, 7).y, make_harmonic_dataset(50, 7).y);
}

TEST(Generators, NoiseVariance) {
  const std::size_t n = 100000;
  const auto ts = make_teacher_student(n, 11);
  const Eigen::VectorXd r1 = ts.data.y - forward(ts.teacher, ts.data.x).col(0);
  EXPECT_NEAR(sample_variance(r1), 9.0, 0.05 * 9.0);
  const auto h = make_harmonic_dataset(n, 11);
  const Eigen::VectorXd r2 = h.y - detail::harmonic_labels(h.x);
  EXPECT_NEAR(sample_variance(r2), 0.04, 0.05 * 0.04);
}

TEST(Generators, Validation) {
  EXPECT_THROW(make_teacher_student(0, 1), std::invalid_argument);
  EXPECT_THROW(make_harmonic_dataset(10, 1, -1.0), std::invalid_argument);
}

TEST(Sampler, MatchesWeightsChiSquare) {
  const Eigen::VectorXd c = (Eigen::VectorXd(5) << 1, 2, 3, 4, 10).finished();
  MinibatchSampler s(c, Sampling::iid, 5);
  const std::size_t draws = 200000;
  std::vector<double> count(5, 0.0);
  for (auto i : s.next(draws)) count[i] += 1;
  double chi2 = 0.0;
  for (int j = 0; j < 5; ++j) {
    const double e = draws * c[j] / c.sum();
    chi2 += (count[static_cast<std::size_t>(j)] - e) * (count[static_cast<std::size_t>(j)] - e) / e;
  }
  // 4 degrees of freedom, 99.9th percentile
  EXPECT_LT(chi2, 18.47);
}

TEST(Sampler, ZeroWeightNeverDrawn) {
  const Eigen::VectorXd c = (Eigen::VectorXd(4) << 1, 0, 0, 0).finished();
  MinibatchSampler s(c, Sampling::iid, 1);
  for (auto i : s.next(1000)) EXPECT_EQ(i, 0u);
  const Eigen::VectorXd c2 = (Eigen::VectorXd(3) << 0, 0, 2).finished();
  MinibatchSampler s2(c2, Sampling::shuffle, 1);
  for (auto i : s2.next(100)) EXPECT_EQ(i, 2u);
}

TEST(Sampler, TwoToOneRatio) {
  const Eigen::VectorXd c = (Eigen::VectorXd(2) << 2, 1).finished();
  MinibatchSampler s(c, Sampling::iid, 9);
  const std::size_t n = 30000;
  double zeros = 0;
  for (auto i : s.next(n)) zeros += i == 0;
  const double p = 2.0 / 3.0, sd = std::sqrt(n * p * (1 - p));
  EXPECT_LE(std::abs(zeros - n * p), 3 * sd);
}

TEST(Sampler, AllZeroRejected) {
  const Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(MinibatchSampler(c, Sampling::iid, 0), std::invalid_argument);
  EXPECT_THROW(MinibatchSampler(c, Sampling::shuffle, 0), std::invalid_argument);
  Rng rng(0);
  EXPECT_THROW(weighted_minibatch(std::vector<double>{0.0, 0.0}, 3, rng), std::invalid_argument);
}

TEST(Sampler, ShuffleVisitsEveryRowOncePerPass) {
  const Eigen::VectorXd c = Eigen::VectorXd::Ones(37);
  MinibatchSampler s(c, Sampling::shuffle, 3);
  EXPECT_EQ(s.mode(), Sampling::shuffle);
  auto idx = s.next(37);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 37; ++i) EXPECT_EQ(idx[i], i);
  const Eigen::VectorXd w = (Eigen::VectorXd(2) << 1, 2).finished();
  EXPECT_EQ(MinibatchSampler(w, Sampling::shuffle, 3).mode(), Sampling::iid);
}

TEST(Dataset, WeightedSetRoundTrip) {
  auto ds = make_harmonic_dataset(40, 2);
  for (Eigen::Index r = 0; r < 40; ++r) ds.c[r] = r % 3 == 0 ? 0.0 : 0.5 * r;
  const auto ws = ds.to_weighted_set();
  EXPECT_EQ(ws.dim(), 3u);
  const auto back = LabeledDataset::from_weighted_set(ws);
  EXPECT_EQ(back.x, ds.x);
  EXPECT_EQ(back.y, ds.y);
  EXPECT_EQ(back.c, ds.c);
  const auto dropped = LabeledDataset::from_weighted_set(ws, true);
  EXPECT_EQ(dropped.size(), 26u);
  EXPECT_TRUE((dropped.c.array() > 0).all());
}
