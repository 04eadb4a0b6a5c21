#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "specsense/covariance.hpp"

using namespace specsense;

namespace {

std::vector<double> gaussian(std::size_t len, unsigned seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> v(len);
  for (double& x : v) x = nd(rng);
  return v;
}

// Independent AR(1) generator, stationary start, unit innovations.
std::vector<double> ar1(std::size_t len, double a, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(len);
  double s = nd(rng) / std::sqrt(1 - a * a);
  for (double& x : v) {
    x = s;
    s = a * s + nd(rng);
  }
  return v;
}

// Textbook double loop, long double accumulation.
std::vector<double> naive_covariance(const std::vector<double>& x, std::size_t start, std::size_t n,
                                     std::size_t ns) {
  std::vector<double> r(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      long double s = 0;
      for (std::size_t i = 0; i < ns; ++i)
        s += static_cast<long double>(x[start + i + a]) * x[start + i + b];
      r[a * n + b] = static_cast<double>(s / ns);
    }
  return r;
}

double max_abs_diff(const CovMatrix& a, const CovMatrix& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.entries().size(); ++k)
    m = std::max(m, std::abs(a.entries()[k] - b.entries()[k]));
  return m;
}

}  // namespace

TEST(SampleCovariance, ZeroStreamGivesZeroMatrix) {
  const SampleStream s(std::vector<double>(20, 0.0));
  const auto R = sample_covariance(SensingSegment(s, 0, 4, 10));
  for (double v : R.entries()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(R.vector_count(), 10u);
}

TEST(SampleCovariance, SingleOuterProduct) {
  const SampleStream s(std::vector<double>{1.0, 0.0});
  const auto R = sample_covariance(SensingSegment(s, 0, 2, 1));
  EXPECT_EQ(R(0, 0), 1.0);
  EXPECT_EQ(R(0, 1), 0.0);
  EXPECT_EQ(R(1, 0), 0.0);
  EXPECT_EQ(R(1, 1), 0.0);
}

TEST(SampleCovariance, MatchesNaiveDoubleLoop) {
  const auto x = gaussian(600, 3);
  const SampleStream s(x);
  for (std::size_t n : {2u, 5u, 16u}) {
    const auto R = sample_covariance(SensingSegment(s, 7, n, 500));
    const auto ref = naive_covariance(x, 7, n, 500);
    for (std::size_t k = 0; k < ref.size(); ++k)
      EXPECT_NEAR(R.entries()[k], ref[k], 1e-12 * std::max(1.0, std::abs(ref[k])));
  }
}

TEST(SampleCovariance, Ar1MatchesClosedFormAutocovariance) {
  const double a = 0.9;
  const std::size_t n = 8, ns = 100000;
  const auto x = ar1(n + ns - 1, a, 5);
  const auto R = sample_covariance(SensingSegment(SampleStream(x), 0, n, ns));
  // Scalar autocorrelation estimate straight from the samples.
  std::vector<double> acf(n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0;
    for (std::size_t i = 0; i + k < x.size(); ++i) s += x[i] * x[i + k];
    acf[k] = s / static_cast<double>(x.size() - k);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = i > j ? i - j : j - i;
      const double truth = std::pow(a, static_cast<double>(k)) / (1 - a * a);
      EXPECT_NEAR(R(i, j), truth, 0.05 * truth) << i << "," << j;
      EXPECT_NEAR(acf[k], truth, 0.05 * truth);
      EXPECT_NEAR(R(i, j), acf[k], 0.01 * truth);
    }
}

TEST(SampleCovariance, IsPositiveSemidefiniteOnRandomProbes) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (unsigned t = 0; t < 20; ++t) {
    const std::size_t n = 2 + t % 31;
    const auto R = sample_covariance(SensingSegment(SampleStream(gaussian(n + 40, t)), 0, n, 41));
    const double norm = R.frobenius_norm();
    std::vector<double> x(n), y(n);
    for (int p = 0; p < 50; ++p) {
      double xx = 0;
      for (double& v : x) {
        v = nd(rng);
        xx += v * v;
      }
      R.multiply(x, y);
      double q = 0;
      for (std::size_t i = 0; i < n; ++i) q += x[i] * y[i];
      EXPECT_GE(q, -1e-9 * xx * norm);
    }
  }
}

TEST(SampleCovariance, ScalingStreamScalesEntriesQuadratically) {
  const auto x = gaussian(1100, 13);
  std::vector<double> y(x);
  const double c = 3.7;
  for (double& v : y) v *= c;
  const auto R = sample_covariance(SensingSegment(SampleStream(x), 0, 8, 1000));
  const auto S = sample_covariance(SensingSegment(SampleStream(y), 0, 8, 1000));
  for (std::size_t k = 0; k < R.entries().size(); ++k)
    EXPECT_NEAR(S.entries()[k], c * c * R.entries()[k], 1e-12 * std::abs(c * c * R.entries()[k]) + 1e-15);
}

TEST(SampleCovariance, WhiteNoiseOffDiagonalShrinksLikeInverseRootNs) {
  auto mean_offdiag = [](std::size_t ns, unsigned seed) {
    const std::size_t n = 8;
    const auto R = sample_covariance(SensingSegment(SampleStream(gaussian(n + ns - 1, seed)), 0, n, ns));
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += std::abs(R(i, j));
    return s / static_cast<double>(n * (n - 1));
  };
  double small = 0, large = 0;
  for (unsigned t = 0; t < 10; ++t) {
    small += mean_offdiag(1000, 100 + t);
    large += mean_offdiag(100000, 200 + t);
  }
  // sqrt(1e5 / 1e3) = 10
  const double ratio = small / large;
  EXPECT_GT(ratio, 7.0);
  EXPECT_LT(ratio, 13.0);
}

TEST(SampleCovariance, DemeanRemovesConstantOffset) {
  auto x = gaussian(300, 17);
  std::vector<double> shifted(x);
  for (double& v : shifted) v += 5.0;
  const auto plain = sample_covariance(SensingSegment(SampleStream(shifted), 0, 4, 297));
  const auto centered =
      sample_covariance(SensingSegment(SampleStream(shifted), 0, 4, 297), CovarianceOptions{true});
  EXPECT_GT(plain(0, 1), 20.0);
  EXPECT_LT(std::abs(centered(0, 1)), 0.5);
}

TEST(CovAccumulator, CountsVectorsOnceWindowIsFull) {
  CovAccumulator acc(5);
  for (int i = 0; i < 4; ++i) acc.push(1.0);
  EXPECT_EQ(acc.vectors_seen(), 0u);
  acc.push(1.0);
  EXPECT_EQ(acc.vectors_seen(), 1u);
  acc.push(1.0);
  EXPECT_EQ(acc.vectors_seen(), 2u);
}

TEST(CovAccumulator, FinalizeWithoutVectorsThrows) {
  CovAccumulator acc(3);
  acc.push(1.0);
  EXPECT_THROW(acc.finalize(), EmptyAccumulator);
}

TEST(CovAccumulator, ScalarCase) {
  CovAccumulator acc(1);
  acc.push(2.0);
  const auto R = acc.finalize();
  EXPECT_EQ(R.n(), 1u);
  EXPECT_EQ(R(0, 0), 4.0);
}

TEST(CovAccumulator, RejectsNonFiniteSample) {
  CovAccumulator acc(2);
  EXPECT_THROW(acc.push(std::numeric_limits<double>::infinity()), NonFiniteSample);
}

TEST(CovAccumulator, BitIdenticalToBatchForFixedOrder) {
  const auto x = gaussian(4 + 50 - 1, 21);
  CovAccumulator acc(4);
  acc.push(x);
  const auto stream = acc.finalize();
  const auto batch = sample_covariance(SensingSegment(SampleStream(x), 0, 4, 50));
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(stream.entries()[k], batch.entries()[k]);
}

TEST(CovAccumulator, MatchesBatchAcrossSizes) {
  unsigned seed = 40;
  for (std::size_t n : {2u, 4u, 8u, 32u})
    for (std::size_t ns : {1u, 10u, 1000u}) {
      const auto x = gaussian(n + ns - 1, ++seed);
      CovAccumulator acc(n);
      acc.push(x);
      ASSERT_EQ(acc.vectors_seen(), ns);
      const auto s = acc.finalize();
      const auto b = sample_covariance(SensingSegment(SampleStream(x), 0, n, ns));
      EXPECT_LE(max_abs_diff(s, b), 1e-12) << "n=" << n << " ns=" << ns;
      const auto ref = naive_covariance(x, 0, n, ns);
      for (std::size_t k = 0; k < ref.size(); ++k)
        EXPECT_NEAR(s.entries()[k], ref[k], 1e-12 * std::max(1.0, std::abs(ref[k])));
    }
}

TEST(CovAccumulator, StrideMatchesBatchStride) {
  const auto x = gaussian(6 + 3 * 99, 77);
  CovAccumulator acc(6, 3);
  acc.push(x);
  EXPECT_EQ(acc.vectors_seen(), 100u);
  const auto b = sample_covariance(SensingSegment(SampleStream(x), 0, 6, 100, 3));
  EXPECT_LE(max_abs_diff(acc.finalize(), b), 1e-12);
}

TEST(CovAccumulator, CompensatedSumHoldsAtLargeCounts) {
  // Constant input: exact answer is known regardless of count.
  CovAccumulator acc(4);
  for (int i = 0; i < (1 << 20) + 3; ++i) acc.push(0.1);
  const auto R = acc.finalize();
  for (double v : R.entries()) EXPECT_NEAR(v, 0.01, 1e-16);
}
