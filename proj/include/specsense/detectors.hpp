#pragma once

// Test statistics for the four sensing detectors and the shared decision
// rule (H1 iff statistic > gamma).
//
//   EC   r^T R_s (R_s + sigma^2 I)^-1 r, averaged over a segment (EC_AVG)
//   MME  lambda_max / lambda_min of the sample covariance
//   CAV  sum |r_ij| / sum |r_ii|
//   FTM  similarity of the segment's leading eigenvector to a learned template

#include <cmath>
#include <span>
#include <vector>

#include "specsense/core.hpp"
#include "specsense/covariance.hpp"
#include "specsense/eig.hpp"
#include "specsense/errors.hpp"
#include "specsense/feature_learning.hpp"

namespace specsense {

/// Estimator-correlator kernel M = R_s (R_s + sigma^2 I)^-1 for known
/// signal covariance and noise variance. Simulation-only benchmark.
class EcModel {
 public:
  EcModel(CovMatrix signal_cov, double sigma2)
      : signal_cov_(std::move(signal_cov)), sigma2_(sigma2) {
    if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_))
      throw InvalidArgument("EC noise variance must be > 0");
    kernel_ = build_kernel();
  }

  const CovMatrix& signal_cov() const { return signal_cov_; }
  double sigma2() const { return sigma2_; }
  const CovMatrix& kernel() const { return kernel_; }
  std::size_t n() const { return signal_cov_.n(); }

 private:
  CovMatrix build_kernel() const {
    const std::size_t n = signal_cov_.n();
    // Cholesky of A = R_s + sigma^2 I (SPD since sigma^2 > 0).
    std::vector<double> L(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double d = signal_cov_(j, j) + sigma2_;
      for (std::size_t k = 0; k < j; ++k) d -= L[j * n + k] * L[j * n + k];
      if (!(d > 0.0)) throw InvalidArgument("R_s + sigma^2 I is not positive definite");
      const double ljj = std::sqrt(d);
      L[j * n + j] = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = signal_cov_(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
        L[i * n + j] = s / ljj;
      }
    }
    // Columns of A^-1.
    std::vector<double> inv(n * n);
    std::vector<double> z(n);
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = i == c ? 1.0 : 0.0;
        for (std::size_t k = 0; k < i; ++k) s -= L[i * n + k] * z[k];
        z[i] = s / L[i * n + i];
      }
      for (std::size_t ii = n; ii-- > 0;) {
        double s = z[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= L[k * n + ii] * inv[k * n + c];
        inv[ii * n + c] = s / L[ii * n + ii];
      }
    }
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += signal_cov_(i, k) * inv[k * n + j];
        m[i * n + j] = s;
      }
    // R_s and A^-1 commute, so M is symmetric up to rounding.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double avg = 0.5 * (m[i * n + j] + m[j * n + i]);
        m[i * n + j] = avg;
        m[j * n + i] = avg;
      }
    return CovMatrix::from_rows(n, std::move(m));
  }

  CovMatrix signal_cov_;
  double sigma2_;
  CovMatrix kernel_;
};

namespace detail {

inline double quadratic_form(const CovMatrix& m, std::span<const double> r) {
  const std::size_t n = m.n();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = m.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * r[j];
    s += r[i] * acc;
  }
  return s;
}

}  // namespace detail

inline DetectorStatistic ec_statistic(const EcModel& model, std::span<const double> r) {
  if (r.size() != model.n()) throw DimensionMismatch(model.n(), r.size());
  return {DetectorId::EC, detail::quadratic_form(model.kernel(), r), {{"sigma2", model.sigma2()}}};
}

/// Mean EC statistic over every vector of the segment.
inline DetectorStatistic ec_avg_statistic(const EcModel& model, const SensingSegment& segment) {
  if (segment.vector_len() != model.n()) throw DimensionMismatch(model.n(), segment.vector_len());
  double sum = 0.0;
  for (std::size_t k = 0; k < segment.vector_count(); ++k)
    sum += detail::quadratic_form(model.kernel(), segment.vector(k));
  return {DetectorId::EC_AVG, sum / static_cast<double>(segment.vector_count()),
          {{"sigma2", model.sigma2()}, {"ns", static_cast<double>(segment.vector_count())}}};
}

/// Same value as ec_avg_statistic computed as trace(M R) from the segment's
/// sample covariance R; O(N^2) once R is known.
inline DetectorStatistic ec_avg_from_covariance(const EcModel& model, const CovMatrix& R) {
  if (R.n() != model.n()) throw DimensionMismatch(model.n(), R.n());
  const auto m = model.kernel().entries();
  const auto r = R.entries();
  double s = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) s += m[k] * r[k];
  return {DetectorId::EC_AVG, s,
          {{"sigma2", model.sigma2()}, {"ns", static_cast<double>(R.vector_count())}}};
}

inline DetectorStatistic mme_statistic(const CovMatrix& R, const PowerIterConfig& cfg) {
  const double top = leading_eigenvector(R, cfg).value;
  const double bottom = min_eigenvalue(R, top, cfg);
  if (!(top > 0.0) || bottom <= 1e-12 * top) throw SingularCovariance(bottom, top);
  return {DetectorId::MME, top / bottom, {{"lambda_max", top}, {"lambda_min", bottom}}};
}

inline DetectorStatistic cav_statistic(const CovMatrix& R) {
  const std::size_t n = R.n();
  double t1 = 0.0;
  double t2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) t1 += std::abs(R(i, j));
    t2 += std::abs(R(i, i));
  }
  t1 /= static_cast<double>(n);
  t2 /= static_cast<double>(n);
  if (t2 <= 1e-300) throw ZeroDiagonal();
  return {DetectorId::CAV, t1 / t2, {{"t1", t1}, {"t2", t2}}};
}

inline DetectorStatistic ftm_statistic(const Feature& templ, const CovMatrix& R,
                                       const PowerIterConfig& cfg) {
  if (templ.n() != R.n()) throw DimensionMismatch(templ.n(), R.n());
  const auto lead = leading_eigenvector(R, cfg);
  return {DetectorId::FTM, similarity(lead.vector, templ), {{"lambda_max", lead.value}}};
}

enum class Hypothesis { H0, H1 };

inline const char* to_string(Hypothesis h) { return h == Hypothesis::H1 ? "H1" : "H0"; }

/// H1 iff the statistic strictly exceeds gamma.
inline Hypothesis decide(const DetectorStatistic& stat, const Threshold& threshold) {
  if (stat.detector != threshold.detector)
    throw DetectorMismatch("statistic from " + std::string(to_string(stat.detector)) +
                           " compared against " + std::string(to_string(threshold.detector)) +
                           " threshold");
  return stat.value > threshold.gamma ? Hypothesis::H1 : Hypothesis::H0;
}

}  // namespace specsense
