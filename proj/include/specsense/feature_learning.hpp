#pragma once

// Feature similarity, blind feature learning over consecutive sensing
// segments, and the on-disk template format for learned features.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "specsense/core.hpp"
#include "specsense/covariance.hpp"
#include "specsense/eig.hpp"
#include "specsense/errors.hpp"
#include "specsense/rng.hpp"
#include "specsense/simgen.hpp"

namespace specsense {

/// Power-iteration settings for features of sensing data. Noise-only
/// covariances have top eigenvalue gaps around 1e-3 of lambda_max, and the
/// iteration count grows like (lambda_max / gap) log(gap / (tol ||R||)).
/// With tol = 1e-6 the worst case over all gaps stays below ~1e5 products,
/// while the feature of a signal with a clear gap is still accurate to ~1e-6.
inline PowerIterConfig sensing_power_config(std::uint64_t seed = 1) {
  return PowerIterConfig{1000000, 1e-6, seed};
}

/// Template-matching similarity: the largest absolute circular
/// cross-correlation of two unit features over all N lags. Lies in [0, 1],
/// is symmetric, and ignores sign flips and circular rotations.
inline double similarity(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (b.size() != n) throw DimensionMismatch(n, b.size());
  double best = 0.0;
  for (std::size_t lag = 0; lag < n; ++lag) {
    double acc = 0.0;
    for (std::size_t k = 0, j = lag; k < n; ++k) {
      acc += a[k] * b[j];
      if (++j == n) j = 0;
    }
    best = std::max(best, std::abs(acc));
  }
  // Rounding can push |a.a| a few ulps past one.
  return std::min(best, 1.0);
}

inline double similarity(const Feature& a, const Feature& b) {
  return similarity(a.values(), b.values());
}

/// Leading eigenvector of a segment's sample covariance.
inline Feature extract_feature(const SensingSegment& segment, const PowerIterConfig& cfg,
                               const CovarianceOptions& cov = {}) {
  return leading_eigenvector(sample_covariance(segment, cov), cfg).vector;
}

struct FlaConfig {
  /// Learning threshold on consecutive-segment similarity.
  double te = kSimulationTe;
  std::size_t n = 32;
  std::size_t ns = 10000;
  PowerIterConfig power = sensing_power_config();
  CovarianceOptions covariance{};

  static constexpr double kSimulationTe = 0.90;
  static constexpr double kHardwareTe = 0.80;

  void validate() const {
    if (!(te > 0.0 && te < 1.0)) throw InvalidArgument("T_e must be in (0, 1)");
    if (n < 2) throw InvalidArgument("vector length must be >= 2");
    if (ns < 1) throw InvalidArgument("vector count must be >= 1");
    power.validate();
  }
};

struct LearnReport {
  bool learned = false;
  std::optional<Feature> feature;
  /// rho between segment i and i+1, in processing order.
  std::vector<double> rho_history;
  std::size_t segments_processed = 0;
};

namespace detail {

inline void check_segments(std::span<const SensingSegment> segments, const FlaConfig& cfg) {
  cfg.validate();
  if (segments.size() < 2) throw InsufficientSegments(2, segments.size());
  for (const auto& s : segments) {
    if (s.vector_len() != cfg.n) throw DimensionMismatch(cfg.n, s.vector_len());
    if (s.vector_count() != cfg.ns)
      throw InvalidArgument("segment vector count " + std::to_string(s.vector_count()) +
                            " differs from configured " + std::to_string(cfg.ns));
  }
}

}  // namespace detail

/// Walks consecutive segment pairs; the first pair whose similarity exceeds
/// T_e learns the later segment's feature.
inline LearnReport fla_learn(std::span<const SensingSegment> segments, const FlaConfig& cfg) {
  detail::check_segments(segments, cfg);
  LearnReport report;
  Feature prev = extract_feature(segments[0], cfg.power, cfg.covariance);
  report.segments_processed = 1;
  for (std::size_t i = 1; i < segments.size(); ++i) {
    Feature cur = extract_feature(segments[i], cfg.power, cfg.covariance);
    const double rho = similarity(prev, cur);
    report.rho_history.push_back(rho);
    report.segments_processed = i + 1;
    if (rho > cfg.te) {
      report.learned = true;
      report.feature = std::move(cur);
      return report;
    }
    prev = std::move(cur);
  }
  return report;
}

struct StabilityReport {
  std::vector<double> rho;
  double fraction_above_te = 0.0;
  double first_last_rho = 0.0;
};

/// Similarity of every consecutive segment pair, plus first-vs-last.
inline StabilityReport stability_experiment(std::span<const SensingSegment> segments,
                                            const FlaConfig& cfg) {
  detail::check_segments(segments, cfg);
  StabilityReport rep;
  const Feature first = extract_feature(segments[0], cfg.power, cfg.covariance);
  Feature prev = first;
  std::size_t above = 0;
  for (std::size_t i = 1; i < segments.size(); ++i) {
    Feature cur = extract_feature(segments[i], cfg.power, cfg.covariance);
    const double rho = similarity(prev, cur);
    rep.rho.push_back(rho);
    if (rho > cfg.te) ++above;
    prev = std::move(cur);
  }
  rep.fraction_above_te = static_cast<double>(above) / static_cast<double>(rep.rho.size());
  rep.first_last_rho = similarity(first, prev);
  return rep;
}

/// Monte-Carlo null distribution of consecutive-segment similarity for
/// white noise (ascending). Use null_quantile() to place T_e.
inline std::vector<double> estimate_similarity_null(std::size_t n, std::size_t ns,
                                                    std::size_t pairs, std::uint64_t seed,
                                                    const PowerIterConfig& power =
                                                        sensing_power_config()) {
  std::vector<double> rhos;
  rhos.reserve(pairs);
  const std::size_t len = required_samples(n, ns);
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto g = generate(SignalModel{Ar1{}, 0.0}, NoiseModel{1.0}, 0.0, 2 * len,
                            derive_seed(seed, seed_domain::kNull, p), {n, 0});
    const auto segs = split_segments(g.stream, n, ns, 2);
    rhos.push_back(similarity(extract_feature(segs[0], power), extract_feature(segs[1], power)));
  }
  std::sort(rhos.begin(), rhos.end());
  return rhos;
}

/// Empirical q-quantile of ascending data: order statistic ceil(q M), 1-based.
inline double null_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("empty sample");
  const double pos = std::ceil(q * static_cast<double>(sorted.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(sorted.size())));
  return sorted[idx - 1];
}

inline constexpr const char* kFeatureMagic = "specsense-feature v1";
inline constexpr long long kMaxFeatureDim = 1 << 16;

/// Text template: magic line, "n=<N>", N values at 17 significant digits,
/// "end".
inline std::string format_template(const Feature& f) {
  std::string out = std::string(kFeatureMagic) + "\nn=" + std::to_string(f.n()) + "\n";
  char buf[40];
  for (double v : f.values()) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out += buf;
  }
  out += "end\n";
  return out;
}

inline Feature parse_template(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  if (lines.empty() || lines[0] != kFeatureMagic)
    throw MalformedTemplate(1, "expected '" + std::string(kFeatureMagic) + "'");
  if (lines.size() < 2 || lines[1].rfind("n=", 0) != 0)
    throw MalformedTemplate(2, "expected 'n=<N>'");
  long long n = 0;
  {
    const std::string& l = lines[1];
    const auto [p, ec] = std::from_chars(l.data() + 2, l.data() + l.size(), n);
    if (ec != std::errc() || p != l.data() + l.size() || l.size() == 2)
      throw MalformedTemplate(2, "bad dimension '" + l.substr(2) + "'");
  }
  if (n < 1 || n > kMaxFeatureDim) throw DimensionOutOfRange(n);
  const auto dim = static_cast<std::size_t>(n);
  std::vector<double> values;
  values.reserve(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const std::size_t lineno = i + 3;
    if (lines.size() < lineno) throw MalformedTemplate(lineno, "missing value");
    const std::string& l = lines[lineno - 1];
    double v = 0.0;
    const auto [p, ec] = std::from_chars(l.data(), l.data() + l.size(), v);
    if (ec != std::errc() || p != l.data() + l.size() || l.empty())
      throw MalformedTemplate(lineno, "bad value '" + l + "'");
    values.push_back(v);
  }
  if (lines.size() < dim + 3 || lines[dim + 2] != "end")
    throw MalformedTemplate(dim + 3, "expected 'end'");
  if (lines.size() > dim + 3) throw MalformedTemplate(dim + 4, "trailing content");
  try {
    return Feature::exact(std::move(values));
  } catch (const InvalidArgument& e) {
    throw MalformedTemplate(3, e.what());
  }
}

inline void save_template(const Feature& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write template '" + path + "'");
  out << format_template(f);
  if (!out) throw Error("write failed for template '" + path + "'");
}

inline Feature load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open template '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_template(ss.str());
}

}  // namespace specsense
