#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace specsense {

/// Base of every error thrown by the library. Callers that only need a
/// diagnostic can catch this; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteSample : public Error {
 public:
  explicit NonFiniteSample(std::size_t index)
      : Error("non-finite sample at index " + std::to_string(index)), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class TooShort : public Error {
 public:
  TooShort(std::size_t required, std::size_t actual)
      : Error("stream too short: need " + std::to_string(required) + " samples, have " +
              std::to_string(actual)),
        required_(required),
        actual_(actual) {}
  std::size_t required() const noexcept { return required_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t required_;
  std::size_t actual_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)) {}
};

class EmptyAccumulator : public Error {
 public:
  EmptyAccumulator() : Error("covariance accumulator has not seen a full vector") {}
};

class NoConvergence : public Error {
 public:
  NoConvergence(int iterations, double residual)
      : Error("power iteration did not converge after " + std::to_string(iterations) +
              " iterations (residual " + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class DimensionTooLarge : public Error {
 public:
  DimensionTooLarge(std::size_t n, std::size_t limit)
      : Error("dimension " + std::to_string(n) + " exceeds oracle limit " + std::to_string(limit)) {}
};

class SingularCovariance : public Error {
 public:
  SingularCovariance(double lambda_min, double lambda_max)
      : Error("covariance is numerically singular (lambda_min=" + std::to_string(lambda_min) +
              ", lambda_max=" + std::to_string(lambda_max) + ")") {}
};

class ZeroDiagonal : public Error {
 public:
  ZeroDiagonal() : Error("covariance diagonal is zero") {}
};

class DetectorMismatch : public Error {
 public:
  using Error::Error;
};

class InsufficientSegments : public Error {
 public:
  InsufficientSegments(std::size_t needed, std::size_t actual)
      : Error("need at least " + std::to_string(needed) + " segments, got " +
              std::to_string(actual)) {}
};

class MalformedTemplate : public Error {
 public:
  MalformedTemplate(std::size_t line, const std::string& reason)
      : Error("malformed file at line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DimensionOutOfRange : public Error {
 public:
  explicit DimensionOutOfRange(long long n)
      : Error("feature dimension out of range: " + std::to_string(n)) {}
};

class UnstableModel : public Error {
 public:
  using Error::Error;
};

class FileIngestError : public Error {
 public:
  using Error::Error;
};

}  // namespace specsense
