#pragma once

// Sample covariance R = (1/Ns) sum_i r_i r_i^T over the vectors of a sensing
// segment, in batch form and as a single-pass streaming accumulator.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "specsense/core.hpp"
#include "specsense/errors.hpp"

namespace specsense {

namespace detail {

/// Upper-triangle outer-product sums. Products are added plainly within a
/// block of kBlock vectors; block totals are folded into the running sums
/// with Neumaier compensation. Batch and streaming paths share this type, so
/// identical input order gives identical bits.
class TriangleSums {
 public:
  static constexpr std::size_t kBlock = 64;

  explicit TriangleSums(std::size_t n)
      : n_(n), block_(n * (n + 1) / 2, 0.0), sum_(block_.size(), 0.0), comp_(block_.size(), 0.0) {}

  void add_vector(std::span<const double> v) {
    double* blk = block_.data();
    for (std::size_t a = 0; a < n_; ++a) {
      const double va = v[a];
      const double* vb = v.data() + a;
      const std::size_t len = n_ - a;
      for (std::size_t j = 0; j < len; ++j) blk[j] += va * vb[j];
      blk += len;
    }
    ++count_;
    if (++in_block_ == kBlock) flush();
  }

  std::size_t count() const { return count_; }
  std::size_t n() const { return n_; }

  /// Compensated totals divided by the vector count.
  std::vector<double> mean_upper() const {
    std::vector<double> out(sum_.size());
    for (std::size_t k = 0; k < sum_.size(); ++k) {
      double s = sum_[k];
      double c = comp_[k];
      fold(s, c, block_[k]);
      out[k] = (s + c) / static_cast<double>(count_);
    }
    return out;
  }

 private:
  static void fold(double& s, double& c, double x) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }

  void flush() {
    for (std::size_t k = 0; k < sum_.size(); ++k) {
      fold(sum_[k], comp_[k], block_[k]);
      block_[k] = 0.0;
    }
    in_block_ = 0;
  }

  std::size_t n_;
  std::vector<double> block_;
  std::vector<double> sum_;
  std::vector<double> comp_;
  std::size_t count_ = 0;
  std::size_t in_block_ = 0;
};

}  // namespace detail

struct CovarianceOptions {
  /// Subtract the segment mean before forming products. Off by default:
  /// signals are modelled as zero-mean.
  bool demean = false;
};

/// Batch sample covariance of `segment`.
inline CovMatrix sample_covariance(const SensingSegment& segment,
                                   const CovarianceOptions& opts = {}) {
  const std::size_t n = segment.vector_len();
  detail::TriangleSums sums(n);
  if (!opts.demean) {
    for (std::size_t k = 0; k < segment.vector_count(); ++k) sums.add_vector(segment.vector(k));
  } else {
    const auto all = segment.span();
    double mean = 0.0;
    for (double x : all) mean += x;
    mean /= static_cast<double>(all.size());
    std::vector<double> centered(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) centered[i] = all[i] - mean;
    for (std::size_t k = 0; k < segment.vector_count(); ++k)
      sums.add_vector(std::span<const double>(centered).subspan(k * segment.stride(), n));
  }
  return CovMatrix::from_upper(n, sums.mean_upper(), segment.vector_count());
}

/// Single-pass covariance over a sample stream. Every `stride`-th sample after
/// the first N completes a new vector made of the most recent N samples.
class CovAccumulator {
 public:
  explicit CovAccumulator(std::size_t n, std::size_t stride = 1)
      : n_(n), stride_(stride), ring_(2 * n, 0.0), sums_(n) {
    if (n < 1) throw InvalidArgument("accumulator dimension must be >= 1");
    if (stride < 1) throw InvalidArgument("accumulator stride must be >= 1");
  }

  void push(double sample) {
    if (!std::isfinite(sample)) throw NonFiniteSample(samples_seen_);
    // Each sample is written twice so the latest N are always contiguous.
    ring_[pos_] = sample;
    ring_[pos_ + n_] = sample;
    pos_ = (pos_ + 1) % n_;
    ++samples_seen_;
    if (samples_seen_ >= n_ && (samples_seen_ - n_) % stride_ == 0)
      sums_.add_vector(std::span<const double>(ring_).subspan(pos_, n_));
  }

  void push(std::span<const double> samples) {
    for (double s : samples) push(s);
  }

  std::size_t n() const { return n_; }
  std::size_t vectors_seen() const { return sums_.count(); }
  std::size_t samples_seen() const { return samples_seen_; }

  CovMatrix finalize() const {
    if (sums_.count() == 0) throw EmptyAccumulator();
    return CovMatrix::from_upper(n_, sums_.mean_upper(), sums_.count());
  }

 private:
  std::size_t n_;
  std::size_t stride_;
  std::vector<double> ring_;
  std::size_t pos_ = 0;
  std::size_t samples_seen_ = 0;
  detail::TriangleSums sums_;
};

}  // namespace specsense
