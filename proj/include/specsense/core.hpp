#pragma once

// Domain types shared by every specsense module. All of them are immutable
// once constructed, so they can be handed to concurrent Monte-Carlo workers
// without synchronization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specsense/errors.hpp"

namespace specsense {

/// Number of samples needed to form `vector_count` vectors of length
/// `vector_len` spaced `stride` samples apart.
inline std::size_t required_samples(std::size_t vector_len, std::size_t vector_count,
                                    std::size_t stride = 1) {
  return vector_len + (vector_count - 1) * stride;
}

/// Real-valued sample stream r[n]. The sample buffer is shared, so copies are cheap.
class SampleStream {
 public:
  SampleStream() : samples_(std::make_shared<const std::vector<double>>()) {}
  explicit SampleStream(std::vector<double> samples, double sample_period = 1.0)
      : samples_(std::make_shared<const std::vector<double>>(std::move(samples))),
        sample_period_(sample_period) {}

  std::span<const double> samples() const { return *samples_; }
  std::size_t size() const { return samples_->size(); }
  double operator[](std::size_t i) const { return (*samples_)[i]; }
  double sample_period() const { return sample_period_; }

 private:
  std::shared_ptr<const std::vector<double>> samples_;
  double sample_period_ = 1.0;
};

/// Throws NonFiniteSample for the first NaN/Inf.
inline void validate_stream(const SampleStream& stream) {
  const auto s = stream.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i])) throw NonFiniteSample(i);
  }
}

/// Full check before forming a segment of `vector_count` vectors of length
/// `vector_len`: finiteness first, then length.
inline void validate_stream(const SampleStream& stream, std::size_t vector_len,
                            std::size_t vector_count) {
  validate_stream(stream);
  const std::size_t need = required_samples(vector_len, vector_count);
  if (stream.size() < need) throw TooShort(need, stream.size());
}

/// Window of `vector_count` overlapping `vector_len`-sample vectors
/// {r_i, r_{i+stride}, ...} starting at `start_index`.
class SensingSegment {
 public:
  SensingSegment(SampleStream source, std::size_t start_index, std::size_t vector_len,
                 std::size_t vector_count, std::size_t stride = 1)
      : source_(std::move(source)),
        start_(start_index),
        n_(vector_len),
        count_(vector_count),
        stride_(stride) {
    if (n_ < 1) throw InvalidArgument("vector length must be >= 1");
    if (count_ < 1) throw InvalidArgument("vector count must be >= 1");
    if (stride_ < 1) throw InvalidArgument("vector stride must be >= 1");
    const std::size_t need = start_ + required_samples(n_, count_, stride_);
    if (source_.size() < need) throw TooShort(need, source_.size());
  }

  const SampleStream& source() const { return source_; }
  std::size_t start_index() const { return start_; }
  std::size_t vector_len() const { return n_; }
  std::size_t vector_count() const { return count_; }
  std::size_t stride() const { return stride_; }

  /// k-th vector of the segment, k in [0, vector_count).
  std::span<const double> vector(std::size_t k) const {
    return source_.samples().subspan(start_ + k * stride_, n_);
  }
  /// Every sample touched by the segment, in order.
  std::span<const double> span() const {
    return source_.samples().subspan(start_, required_samples(n_, count_, stride_));
  }

 private:
  SampleStream source_;
  std::size_t start_;
  std::size_t n_;
  std::size_t count_;
  std::size_t stride_;
};

/// Consecutive non-overlapping segments covering the front of `stream`.
inline std::vector<SensingSegment> split_segments(const SampleStream& stream,
                                                  std::size_t vector_len,
                                                  std::size_t vector_count,
                                                  std::size_t max_segments = 0) {
  const std::size_t len = required_samples(vector_len, vector_count);
  if (stream.size() < len) throw TooShort(len, stream.size());
  std::size_t available = stream.size() / len;
  if (max_segments != 0) available = std::min(available, max_segments);
  std::vector<SensingSegment> out;
  out.reserve(available);
  for (std::size_t i = 0; i < available; ++i)
    out.emplace_back(stream, i * len, vector_len, vector_count);
  return out;
}

/// Dense symmetric N x N matrix, row-major.
class CovMatrix {
 public:
  CovMatrix() = default;

  /// Builds from full row-major entries. Symmetry must hold exactly.
  static CovMatrix from_rows(std::size_t n, std::vector<double> entries,
                             std::size_t vector_count = 0) {
    if (entries.size() != n * n) throw DimensionMismatch(n * n, entries.size());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (entries[i * n + j] != entries[j * n + i])
          throw InvalidArgument("covariance entries are not symmetric");
    CovMatrix m;
    m.n_ = n;
    m.entries_ = std::move(entries);
    m.vector_count_ = vector_count;
    return m;
  }

  /// Builds from the upper triangle (row-major, i <= j), mirroring it.
  static CovMatrix from_upper(std::size_t n, std::span<const double> upper,
                              std::size_t vector_count = 0) {
    if (upper.size() != n * (n + 1) / 2) throw DimensionMismatch(n * (n + 1) / 2, upper.size());
    CovMatrix m;
    m.n_ = n;
    m.entries_.assign(n * n, 0.0);
    m.vector_count_ = vector_count;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j, ++k) {
        m.entries_[i * n + j] = upper[k];
        m.entries_[j * n + i] = upper[k];
      }
    return m;
  }

  static CovMatrix diagonal(std::span<const double> d) {
    const std::size_t n = d.size();
    std::vector<double> e(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) e[i * n + i] = d[i];
    return from_rows(n, std::move(e));
  }

  static CovMatrix identity(std::size_t n, double scale = 1.0) {
    return diagonal(std::vector<double>(n, scale));
  }

  std::size_t n() const { return n_; }
  std::size_t vector_count() const { return vector_count_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::span<const double> entries() const { return entries_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(entries_).subspan(i * n_, n_);
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : entries_) s += v * v;
    return std::sqrt(s);
  }

  /// y = R x
  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n_; ++i) {
      const double* r = entries_.data() + i * n_;
      double acc = 0.0;
      for (std::size_t j = 0; j < n_; ++j) acc += r[j] * x[j];
      y[i] = acc;
    }
  }

  /// Entry-wise scaled copy.
  CovMatrix scaled(double c) const {
    CovMatrix m = *this;
    for (double& v : m.entries_) v *= c;
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
  std::size_t vector_count_ = 0;
};

/// Flip sign so that the largest-magnitude component (first one on ties) is
/// non-negative.
inline void canonicalize_sign(std::span<double> v) {
  if (v.empty()) return;
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0.0)
    for (double& x : v) x = -x;
}

/// Unit-norm, sign-canonical N-vector (a leading eigenvector).
class Feature {
 public:
  static constexpr double kNormTolerance = 1e-9;

  Feature() = default;

  /// Normalizes and canonicalizes `values`. Zero vectors are rejected.
  explicit Feature(std::vector<double> values) : values_(std::move(values)) {
    double norm = 0.0;
    for (double v : values_) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw InvalidArgument("feature vector must be finite and non-zero");
    for (double& v : values_) v /= norm;
    canonicalize_sign(values_);
  }

  /// Adopts `values` verbatim after checking they are unit-norm and canonical.
  static Feature exact(std::vector<double> values) {
    double norm = 0.0;
    for (double v : values) {
      if (!std::isfinite(v)) throw InvalidArgument("feature component is not finite");
      norm += v * v;
    }
    if (std::abs(std::sqrt(norm) - 1.0) > kNormTolerance)
      throw InvalidArgument("feature is not unit norm");
    Feature f;
    f.values_ = std::move(values);
    canonicalize_sign(f.values_);
    return f;
  }

  std::size_t n() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Feature&, const Feature&) = default;

 private:
  std::vector<double> values_;
};

struct EigenPair {
  double value = 0.0;
  Feature vector;
};

/// Eigenvalues sorted descending with matching eigenvectors.
struct EigenSystem {
  std::vector<double> values;
  std::vector<Feature> vectors;
};

enum class DetectorId { EC, EC_AVG, MME, CAV, FTM };

inline std::string_view to_string(DetectorId id) {
  switch (id) {
    case DetectorId::EC: return "EC";
    case DetectorId::EC_AVG: return "EC_AVG";
    case DetectorId::MME: return "MME";
    case DetectorId::CAV: return "CAV";
    case DetectorId::FTM: return "FTM";
  }
  return "?";
}

inline DetectorId parse_detector(std::string_view s) {
  for (auto id : {DetectorId::EC, DetectorId::EC_AVG, DetectorId::MME, DetectorId::CAV,
                  DetectorId::FTM})
    if (s == to_string(id)) return id;
  throw InvalidArgument("unknown detector '" + std::string(s) + "'");
}

struct DetectorStatistic {
  using Params = std::vector<std::pair<std::string, double>>;

  DetectorStatistic(DetectorId id, double value, Params params = {})
      : detector(id), value(value), params(std::move(params)) {
    if (std::isnan(value))
      throw Error(std::string("detector ") + std::string(to_string(id)) + " produced NaN");
  }

  DetectorId detector;
  double value;
  Params params;
};

inline std::size_t min_calibration_trials(double target_pf) {
  return static_cast<std::size_t>(std::ceil(10.0 / target_pf - 1e-9));
}

/// Decision threshold gamma calibrated for a target false-alarm rate.
struct Threshold {
  Threshold(DetectorId id, double gamma, double target_pf, std::size_t calibration_trials)
      : detector(id), gamma(gamma), target_pf(target_pf), calibration_trials(calibration_trials) {
    if (!(target_pf > 0.0 && target_pf < 1.0))
      throw InvalidArgument("target false-alarm probability must be in (0, 1)");
    if (calibration_trials < min_calibration_trials(target_pf))
      throw InvalidArgument("too few calibration trials for target Pf: need " +
                            std::to_string(min_calibration_trials(target_pf)));
    if (!std::isfinite(gamma)) throw InvalidArgument("threshold must be finite");
  }

  DetectorId detector;
  double gamma;
  double target_pf;
  std::size_t calibration_trials;
};

}  // namespace specsense
