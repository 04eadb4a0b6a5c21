#pragma once

// Synthetic primary-user signals in white Gaussian noise, and ingestion of
// recorded sample files.
//
// SNR is the per-sample power ratio 10 log10(P_s / sigma^2), with P_s the
// analytic power of the signal model (or the empirical power for files).

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "specsense/core.hpp"
#include "specsense/covariance.hpp"
#include "specsense/errors.hpp"
#include "specsense/rng.hpp"

namespace specsense {

/// x[n] = a x[n-1] + e[n], unit-variance innovations.
struct Ar1 {
  double a = 0.9;
};

enum class PhasePolicy { Random, Fixed };

/// cos(2 pi f n + phase), f in cycles/sample.
struct Sinusoid {
  double freq = 0.1;
  PhasePolicy phase_policy = PhasePolicy::Random;
  double fixed_phase = 0.0;
};

/// White Gaussian innovations through an FIR filter.
struct FilteredNoise {
  std::vector<double> taps;
};

/// Recorded samples used as the clean signal.
struct FileSignal {
  SampleStream samples;
  std::string path;
};

struct SignalModel {
  std::variant<Ar1, Sinusoid, FilteredNoise, FileSignal> kind = Ar1{};
  /// Zero switches the signal off. Otherwise only used when the SNR cannot
  /// fix the power (noise-free generation): then P_s = amplitude^2.
  double amplitude = 1.0;

  void validate() const {
    if (const auto* m = std::get_if<Ar1>(&kind)) {
      if (!(std::abs(m->a) < 1.0))
        throw UnstableModel("AR(1) coefficient must satisfy |a| < 1, got " + std::to_string(m->a));
    } else if (const auto* m = std::get_if<Sinusoid>(&kind)) {
      if (!(m->freq > 0.0 && m->freq < 0.5))
        throw InvalidArgument("sinusoid frequency must be in (0, 0.5) cycles/sample");
    } else if (const auto* m = std::get_if<FilteredNoise>(&kind)) {
      if (m->taps.empty()) throw InvalidArgument("FIR taps must be non-empty");
      double e = 0.0;
      for (double t : m->taps) e += t * t;
      if (!(e > 0.0)) throw InvalidArgument("FIR taps must not all be zero");
    } else if (const auto* m = std::get_if<FileSignal>(&kind)) {
      if (m->samples.size() == 0) throw FileIngestError("signal file has no samples");
    }
    if (!std::isfinite(amplitude)) throw InvalidArgument("amplitude must be finite");
  }

  /// Power of the model before scaling (unit innovations / unit amplitude).
  double unit_power() const {
    if (const auto* m = std::get_if<Ar1>(&kind)) return 1.0 / (1.0 - m->a * m->a);
    if (std::holds_alternative<Sinusoid>(kind)) return 0.5;
    if (const auto* m = std::get_if<FilteredNoise>(&kind)) {
      double e = 0.0;
      for (double t : m->taps) e += t * t;
      return e;
    }
    const auto& f = std::get<FileSignal>(kind);
    double p = 0.0;
    for (double x : f.samples.samples()) p += x * x;
    return p / static_cast<double>(f.samples.size());
  }

  /// Unscaled autocovariance at lag k. Not defined for file signals.
  double unit_autocovariance(std::size_t k) const {
    if (const auto* m = std::get_if<Ar1>(&kind))
      return std::pow(m->a, static_cast<double>(k)) / (1.0 - m->a * m->a);
    if (const auto* m = std::get_if<Sinusoid>(&kind))
      return 0.5 * std::cos(2.0 * std::numbers::pi * m->freq * static_cast<double>(k));
    if (const auto* m = std::get_if<FilteredNoise>(&kind)) {
      double s = 0.0;
      for (std::size_t j = 0; j + k < m->taps.size(); ++j) s += m->taps[j] * m->taps[j + k];
      return s;
    }
    throw InvalidArgument("file signals have no analytic autocovariance");
  }
};

struct NoiseModel {
  double sigma2 = 1.0;

  void validate() const {
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
      throw InvalidArgument("noise variance must be finite and >= 0");
  }
};

/// Simulator ground truth used by the estimator-correlator benchmark.
struct GroundTruth {
  CovMatrix signal_cov;
  double sigma2 = 0.0;
};

struct Generated {
  SampleStream stream;
  GroundTruth truth;
  /// Power the signal component was scaled to (0 when switched off).
  double signal_power = 0.0;
};

/// Power the signal is scaled to for a given SNR request.
inline double target_signal_power(const SignalModel& model, const NoiseModel& noise,
                                  double snr_db) {
  if (model.amplitude == 0.0 || snr_db == -std::numeric_limits<double>::infinity()) return 0.0;
  if (noise.sigma2 > 0.0 && std::isfinite(snr_db))
    return noise.sigma2 * std::pow(10.0, snr_db / 10.0);
  return model.amplitude * model.amplitude;
}

/// N x N signal covariance at the given power. For file signals this is the
/// sample covariance of the recording over `truth_ns` vectors (0 = all).
inline CovMatrix signal_covariance(const SignalModel& model, double power, std::size_t n,
                                   std::size_t truth_ns = 0) {
  model.validate();
  const double scale = power / model.unit_power();
  if (const auto* f = std::get_if<FileSignal>(&model.kind)) {
    const std::size_t avail = f->samples.size() >= n ? f->samples.size() - n + 1 : 0;
    if (avail == 0) throw TooShort(n, f->samples.size());
    const std::size_t ns = truth_ns == 0 ? avail : std::min(truth_ns, avail);
    return sample_covariance(SensingSegment(f->samples, 0, n, ns)).scaled(scale);
  }
  std::vector<double> e(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      e[i * n + j] = scale * model.unit_autocovariance(i > j ? i - j : j - i);
  return CovMatrix::from_rows(n, std::move(e));
}

struct TruthDims {
  std::size_t n = 32;
  std::size_t ns = 0;
};

/// Draws `length` samples of signal-plus-noise. Signal and noise come from
/// independent substreams of `seed`, so the same seed at two SNRs yields the
/// same underlying realizations (common random numbers).
inline Generated generate(const SignalModel& model, const NoiseModel& noise, double snr_db,
                          std::size_t length, std::uint64_t seed, TruthDims dims = {}) {
  model.validate();
  noise.validate();
  if (length < 1) throw InvalidArgument("length must be >= 1");

  const double power = target_signal_power(model, noise, snr_db);
  std::vector<double> x(length, 0.0);

  if (power > 0.0) {
    const double gain = std::sqrt(power / model.unit_power());
    GaussianRng rng(derive_seed(seed, seed_domain::kSignal));
    if (const auto* m = std::get_if<Ar1>(&model.kind)) {
      double s = std::sqrt(1.0 / (1.0 - m->a * m->a)) * rng.normal();
      x[0] = s;
      for (std::size_t i = 1; i < length; ++i) {
        s = m->a * s + rng.normal();
        x[i] = s;
      }
    } else if (const auto* m = std::get_if<Sinusoid>(&model.kind)) {
      const double phase = m->phase_policy == PhasePolicy::Random
                               ? 2.0 * std::numbers::pi * rng.uniform()
                               : m->fixed_phase;
      const double w = 2.0 * std::numbers::pi * m->freq;
      for (std::size_t i = 0; i < length; ++i) x[i] = std::cos(w * static_cast<double>(i) + phase);
    } else if (const auto* m = std::get_if<FilteredNoise>(&model.kind)) {
      const std::size_t taps = m->taps.size();
      std::vector<double> e(length + taps - 1);
      for (double& v : e) v = rng.normal();
      for (std::size_t i = 0; i < length; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < taps; ++j) acc += m->taps[j] * e[i + taps - 1 - j];
        x[i] = acc;
      }
    } else {
      const auto& f = std::get<FileSignal>(model.kind);
      if (f.samples.size() < length) throw FileIngestError(
          "signal file has " + std::to_string(f.samples.size()) + " samples, need " +
          std::to_string(length));
      const std::size_t span = f.samples.size() - length + 1;
      const auto offset = static_cast<std::size_t>(rng.uniform() * static_cast<double>(span));
      for (std::size_t i = 0; i < length; ++i) x[i] = f.samples[offset + i];
    }
    for (double& v : x) v *= gain;
  }

  if (noise.sigma2 > 0.0) {
    GaussianRng rng(derive_seed(seed, seed_domain::kNoise));
    const double sd = std::sqrt(noise.sigma2);
    for (double& v : x) v += sd * rng.normal();
  }

  Generated out;
  out.signal_power = power;
  out.truth.sigma2 = noise.sigma2;
  out.truth.signal_cov = power > 0.0 ? signal_covariance(model, power, dims.n, dims.ns)
                                     : CovMatrix::identity(dims.n, 0.0);
  out.stream = SampleStream(std::move(x));
  return out;
}

enum class SampleFormat { F32leReal, I16leReal, Csv, Cf32le, Ci16le };

inline SampleFormat parse_sample_format(std::string_view s) {
  if (s == "f32le") return SampleFormat::F32leReal;
  if (s == "i16le") return SampleFormat::I16leReal;
  if (s == "csv") return SampleFormat::Csv;
  if (s == "cf32le") return SampleFormat::Cf32le;
  if (s == "ci16le") return SampleFormat::Ci16le;
  throw InvalidArgument("unknown sample format '" + std::string(s) + "'");
}

namespace detail {

inline float decode_f32le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

inline std::int16_t decode_i16le(const unsigned char* p) {
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0]) |
                                   (static_cast<std::uint16_t>(p[1]) << 8));
}

}  // namespace detail

/// Reads a sample file. Complex formats (interleaved I/Q) keep only the
/// in-phase component; 16-bit integers are scaled to [-1, 1).
inline SampleStream ingest_file(const std::string& path, SampleFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileIngestError("cannot open '" + path + "'");
  std::vector<double> out;

  if (format == SampleFormat::Csv) {
    std::string line;
    while (std::getline(in, line)) {
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      for (char& c : line)
        if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(tok, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != tok.size()) throw FileIngestError("bad csv value '" + tok + "' in " + path);
        out.push_back(v);
      }
    }
  } else {
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>());
    const bool complex = format == SampleFormat::Cf32le || format == SampleFormat::Ci16le;
    const bool f32 = format == SampleFormat::F32leReal || format == SampleFormat::Cf32le;
    const std::size_t width = (f32 ? 4 : 2) * (complex ? 2 : 1);
    if (bytes.size() % width != 0)
      throw FileIngestError("file size " + std::to_string(bytes.size()) +
                            " is not a multiple of the sample width " + std::to_string(width));
    out.reserve(bytes.size() / width);
    for (std::size_t off = 0; off < bytes.size(); off += width) {
      out.push_back(f32 ? static_cast<double>(detail::decode_f32le(&bytes[off]))
                        : detail::decode_i16le(&bytes[off]) / 32768.0);
    }
  }
  if (out.empty()) throw FileIngestError("no samples in '" + path + "'");
  SampleStream stream(std::move(out));
  validate_stream(stream);
  return stream;
}

inline void write_f32le(const std::string& path, std::span<const double> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileIngestError("cannot write '" + path + "'");
  for (double v : samples) {
    const auto f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                static_cast<unsigned char>(bits >> 16),
                                static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

inline FileSignal load_file_signal(const std::string& path, SampleFormat format) {
  return FileSignal{ingest_file(path, format), path};
}

}  // namespace specsense
