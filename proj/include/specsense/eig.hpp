#pragma once

// Eigen-solvers for symmetric covariance matrices.
//
// leading_eigenvector() is plain power iteration: one O(N^2) matrix-vector
// product and a normalization per step, stopped on the eigen-residual
// ||R x - lambda x|| <= residual_tol * ||R||_F. min_eigenvalue() brackets the
// bottom of the spectrum with Cholesky definiteness tests below the power
// iteration's lambda_max. full_eigensystem_oracle() is a cyclic Jacobi solver
// used to cross-check both in tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "specsense/core.hpp"
#include "specsense/errors.hpp"
#include "specsense/rng.hpp"

namespace specsense {

struct PowerIterConfig {
  int max_iters = 500;
  double residual_tol = 1e-10;
  std::uint64_t seed = 1;

  void validate() const {
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
    if (!(residual_tol > 0.0)) throw InvalidArgument("residual_tol must be > 0");
  }
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> random_unit_vector(std::size_t n, std::uint64_t seed) {
  GaussianRng rng(seed);
  std::vector<double> v(n);
  double norm2 = 0.0;
  while (!(norm2 > 0.0)) {
    norm2 = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace detail

/// Dominant eigenpair of a symmetric PSD matrix. Throws NoConvergence when the
/// residual target is not reached within cfg.max_iters products.
inline EigenPair leading_eigenvector(const CovMatrix& R, const PowerIterConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = R.n();
  if (n == 0) throw InvalidArgument("empty matrix");
  const double norm = R.frobenius_norm();
  const double target = cfg.residual_tol * norm;

  std::vector<double> x;
  std::vector<double> y(n);
  // A start vector whose Rayleigh quotient is already below tolerance lies
  // (numerically) in the null space of a non-zero R; draw one more.
  for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
    x = detail::random_unit_vector(n, derive_seed(cfg.seed, seed_domain::kPowerIter, attempt));
    R.multiply(x, y);
    if (norm == 0.0 || detail::dot(x, y) > target) break;
  }
  if (norm == 0.0) return {0.0, Feature(std::move(x))};

  double residual = 0.0;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    if (iter > 1) R.multiply(x, y);
    const double lambda = detail::dot(x, y);
    double res2 = 0.0;
    double ynorm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = y[i] - lambda * x[i];
      res2 += d * d;
      ynorm2 += y[i] * y[i];
    }
    residual = std::sqrt(res2);
    if (residual <= target) return {lambda, Feature(std::move(x))};
    const double inv = 1.0 / std::sqrt(ynorm2);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] * inv;
  }
  throw NoConvergence(cfg.max_iters, residual);
}

/// Relative margin added to lambda_max before shifting, so that
/// (shift I - R) stays PSD under rounding.
inline constexpr double kMinEigenShiftMargin = 1e-6;

/// Smallest eigenvalue by power iteration on (shift I - R), shift slightly
/// above lambda_max. Converges at rate (shift - lambda_{N-1}) / (shift -
/// lambda_N), which approaches 1 whenever lambda_max dominates the bottom of
/// the spectrum; min_eigenvalue() does not have that weakness.
inline double min_eigenvalue_shifted_power(const CovMatrix& R, double lambda_max,
                                           const PowerIterConfig& cfg) {
  if (lambda_max <= 0.0) return lambda_max;
  const double shift = lambda_max * (1.0 + kMinEigenShiftMargin);
  const std::size_t n = R.n();
  std::vector<double> b(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b[i * n + j] = (i == j ? shift : 0.0) - R(i, j);
  const auto shifted = CovMatrix::from_rows(n, std::move(b));
  PowerIterConfig inner = cfg;
  inner.seed = derive_seed(cfg.seed, seed_domain::kPowerIter, 0x5417);
  return shift - leading_eigenvector(shifted, inner).value;
}

inline double min_eigenvalue_shifted_power(const CovMatrix& R, const PowerIterConfig& cfg = {}) {
  return min_eigenvalue_shifted_power(R, leading_eigenvector(R, cfg).value, cfg);
}

namespace detail {

/// True iff R - sigma I admits a Cholesky factorization, i.e. every
/// eigenvalue of R exceeds sigma. `work` is N x N scratch.
inline bool shifted_is_positive_definite(const CovMatrix& R, double sigma,
                                         std::vector<double>& work) {
  const std::size_t n = R.n();
  work.assign(R.entries().begin(), R.entries().end());
  for (std::size_t i = 0; i < n; ++i) work[i * n + i] -= sigma;
  for (std::size_t j = 0; j < n; ++j) {
    double* rj = work.data() + j * n;
    double d = rj[j];
    for (std::size_t k = 0; k < j; ++k) d -= rj[k] * rj[k];
    if (!(d > 0.0)) return false;
    const double ljj = std::sqrt(d);
    rj[j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double* ri = work.data() + i * n;
      double s = ri[j];
      for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
      ri[j] = s / ljj;
    }
  }
  return true;
}

}  // namespace detail

/// Smallest eigenvalue of a symmetric PSD matrix with known lambda_max.
///
/// Bisection on sigma in [0, lambda_max]: R - sigma I is positive definite
/// exactly when sigma < lambda_N, and Cholesky decides that reliably. Each
/// step is one O(N^3) factorization; about 45 steps reach 1e-13 relative
/// width. Returns a value <= 0 when R itself is not positive definite.
inline double min_eigenvalue(const CovMatrix& R, double lambda_max, const PowerIterConfig& cfg) {
  cfg.validate();
  if (lambda_max <= 0.0) return lambda_max;
  std::vector<double> work;
  if (!detail::shifted_is_positive_definite(R, 0.0, work)) return 0.0;
  double lo = 0.0;
  double hi = lambda_max * (1.0 + kMinEigenShiftMargin);
  const double width = 1e-13 * hi;
  for (int step = 0; step < 200 && hi - lo > width; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (detail::shifted_is_positive_definite(R, mid, work))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Smallest eigenvalue of a symmetric PSD matrix.
inline double min_eigenvalue(const CovMatrix& R, const PowerIterConfig& cfg = {}) {
  return min_eigenvalue(R, leading_eigenvector(R, cfg).value, cfg);
}

inline constexpr std::size_t kOracleMaxDim = 64;

/// All eigenpairs by cyclic Jacobi rotations, eigenvalues descending.
/// Reference solver for tests; limited to N <= 64.
inline EigenSystem full_eigensystem_oracle(const CovMatrix& R) {
  const std::size_t n = R.n();
  if (n > kOracleMaxDim) throw DimensionTooLarge(n, kOracleMaxDim);
  std::vector<double> a(R.entries().begin(), R.entries().end());
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  const double stop = 1e-12 * R.frobenius_norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > stop; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J with J the (p, q) rotation.
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a[i * n + i] > a[j * n + j]; });
  EigenSystem out;
  out.values.reserve(n);
  out.vectors.reserve(n);
  for (std::size_t idx : order) {
    out.values.push_back(a[idx * n + idx]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k * n + idx];
    out.vectors.emplace_back(std::move(col));
  }
  return out;
}

}  // namespace specsense
