#pragma once

// Monte-Carlo threshold calibration under H0 and empirical Pd / Pf.
//
// Every trial draws a fresh, independent segment from substream
// (seed, domain, trial index). Calibration and measurement use different
// domains, so they never reuse noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specsense/core.hpp"
#include "specsense/covariance.hpp"
#include "specsense/detectors.hpp"
#include "specsense/eig.hpp"
#include "specsense/errors.hpp"
#include "specsense/feature_learning.hpp"
#include "specsense/parallel.hpp"
#include "specsense/rng.hpp"
#include "specsense/simgen.hpp"

namespace specsense {

/// A detector with whatever side information it needs.
struct DetectorSpec {
  DetectorId id = DetectorId::CAV;
  std::optional<Feature> templ;  // FTM
  std::optional<EcModel> ec;     // EC / EC_AVG
  PowerIterConfig power = sensing_power_config();

  static DetectorSpec mme() { return with_id(DetectorId::MME); }
  static DetectorSpec cav() { return with_id(DetectorId::CAV); }
  static DetectorSpec ftm(Feature f) {
    auto d = with_id(DetectorId::FTM);
    d.templ = std::move(f);
    return d;
  }
  static DetectorSpec ec_avg(EcModel m) {
    auto d = with_id(DetectorId::EC_AVG);
    d.ec = std::move(m);
    return d;
  }
  static DetectorSpec with_id(DetectorId id) {
    DetectorSpec d;
    d.id = id;
    return d;
  }

  void validate(std::size_t n) const {
    switch (id) {
      case DetectorId::FTM:
        if (!templ) throw InvalidArgument("FTM requires a feature template");
        if (templ->n() != n) throw DimensionMismatch(n, templ->n());
        break;
      case DetectorId::EC:
      case DetectorId::EC_AVG:
        if (!ec) throw InvalidArgument("EC requires a signal model");
        if (ec->n() != n) throw DimensionMismatch(n, ec->n());
        break;
      default:
        break;
    }
  }
};

/// Segment-level statistic of one detector from the segment covariance.
/// EC is evaluated as the segment average.
inline DetectorStatistic evaluate(const DetectorSpec& spec, const CovMatrix& R) {
  switch (spec.id) {
    case DetectorId::EC:
    case DetectorId::EC_AVG: return ec_avg_from_covariance(*spec.ec, R);
    case DetectorId::MME: return mme_statistic(R, spec.power);
    case DetectorId::CAV: return cav_statistic(R);
    case DetectorId::FTM: return ftm_statistic(*spec.templ, R, spec.power);
  }
  throw InvalidArgument("unknown detector");
}

/// Evaluates several detectors on one covariance. MME and FTM specs with the
/// same power-iteration settings share one leading eigenpair computation.
inline std::vector<double> evaluate_all(std::span<const DetectorSpec> specs, const CovMatrix& R) {
  std::vector<double> out(specs.size());
  std::optional<EigenPair> lead;
  const PowerIterConfig* lead_cfg = nullptr;
  auto leading = [&](const PowerIterConfig& cfg) -> const EigenPair& {
    if (!lead || lead_cfg->max_iters != cfg.max_iters ||
        lead_cfg->residual_tol != cfg.residual_tol || lead_cfg->seed != cfg.seed) {
      lead = leading_eigenvector(R, cfg);
      lead_cfg = &cfg;
    }
    return *lead;
  };
  for (std::size_t d = 0; d < specs.size(); ++d) {
    const auto& s = specs[d];
    switch (s.id) {
      case DetectorId::MME: {
        const double top = leading(s.power).value;
        const double bottom = min_eigenvalue(R, top, s.power);
        if (!(top > 0.0) || bottom <= 1e-12 * top) throw SingularCovariance(bottom, top);
        out[d] = top / bottom;
        break;
      }
      case DetectorId::FTM:
        if (s.templ->n() != R.n()) throw DimensionMismatch(s.templ->n(), R.n());
        out[d] = similarity(leading(s.power).vector, *s.templ);
        break;
      default:
        out[d] = evaluate(s, R).value;
    }
  }
  return out;
}

/// Where trial data comes from: signal (possibly switched off) plus noise.
struct TrialSource {
  SignalModel signal{Ar1{}, 0.0};
  NoiseModel noise{1.0};
  double snr_db = -std::numeric_limits<double>::infinity();

  static TrialSource noise_only(NoiseModel noise) { return {SignalModel{Ar1{}, 0.0}, noise}; }
};

struct TrialConfig {
  std::size_t n = 32;
  std::size_t ns = 10000;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

/// Sample covariance of trial `index` of (seed, domain).
inline CovMatrix trial_covariance(const TrialSource& src, std::size_t n, std::size_t ns,
                                  std::uint64_t seed, std::uint64_t domain, std::size_t index) {
  const auto g = generate(src.signal, src.noise, src.snr_db, required_samples(n, ns),
                          derive_seed(seed, domain, index), {n, 1});
  return sample_covariance(SensingSegment(g.stream, 0, n, ns));
}

/// stats[d][t]: detector d on trial t.
inline std::vector<std::vector<double>> collect_statistics(std::span<const DetectorSpec> specs,
                                                           const TrialSource& src,
                                                           const TrialConfig& cfg,
                                                           std::uint64_t domain) {
  for (const auto& s : specs) s.validate(cfg.n);
  std::vector<std::vector<double>> stats(specs.size(), std::vector<double>(cfg.trials));
  parallel_for(
      cfg.trials,
      [&](std::size_t t) {
        const auto R = trial_covariance(src, cfg.n, cfg.ns, cfg.seed, domain, t);
        const auto v = evaluate_all(specs, R);
        for (std::size_t d = 0; d < specs.size(); ++d) stats[d][t] = v[d];
      },
      cfg.workers);
  return stats;
}

/// Empirical (1 - pf) quantile: order statistic ceil((1 - pf) M), 1-based,
/// of the ascending sort.
inline double threshold_from_statistics(std::vector<double> stats, double target_pf) {
  if (stats.empty()) throw InvalidArgument("no statistics to calibrate from");
  if (!(target_pf > 0.0 && target_pf < 1.0))
    throw InvalidArgument("target false-alarm probability must be in (0, 1)");
  std::sort(stats.begin(), stats.end());
  const double pos = std::ceil((1.0 - target_pf) * static_cast<double>(stats.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(stats.size())));
  return stats[idx - 1];
}

struct CalibrationConfig {
  std::size_t n = 32;
  std::size_t ns = 10000;
  std::size_t trials = 2000;
  double target_pf = 0.1;
  std::uint64_t seed = 1;
  unsigned workers = 0;

  void validate() const {
    if (!(target_pf > 0.0 && target_pf < 1.0))
      throw InvalidArgument("target false-alarm probability must be in (0, 1)");
    if (trials < min_calibration_trials(target_pf))
      throw InvalidArgument("calibration needs at least " +
                            std::to_string(min_calibration_trials(target_pf)) + " trials");
    if (n < 2 || ns < 1) throw InvalidArgument("invalid segment dimensions");
  }
};

struct CalibrationRun {
  DetectorId detector;
  std::vector<double> null_statistics;  // ascending
  Threshold threshold;
};

/// Threshold from already collected null statistics.
inline CalibrationRun calibration_from_statistics(DetectorId id, std::vector<double> stats,
                                                  double target_pf) {
  std::sort(stats.begin(), stats.end());
  const double gamma = threshold_from_statistics(stats, target_pf);
  Threshold th(id, gamma, target_pf, stats.size());
  return {id, std::move(stats), th};
}

inline DetectorId segment_detector_id(DetectorId id) {
  return id == DetectorId::EC ? DetectorId::EC_AVG : id;
}

/// Calibrates several detectors on one shared set of noise-only trials.
inline std::vector<CalibrationRun> calibrate_all(std::span<const DetectorSpec> specs,
                                                 const NoiseModel& noise,
                                                 const CalibrationConfig& cfg) {
  cfg.validate();
  auto stats = collect_statistics(specs, TrialSource::noise_only(noise),
                                  {cfg.n, cfg.ns, cfg.trials, cfg.seed, cfg.workers},
                                  seed_domain::kCalibration);
  std::vector<CalibrationRun> runs;
  for (std::size_t d = 0; d < specs.size(); ++d)
    runs.push_back(calibration_from_statistics(segment_detector_id(specs[d].id),
                                               std::move(stats[d]), cfg.target_pf));
  return runs;
}

inline Threshold calibrate(const DetectorSpec& spec, const NoiseModel& noise,
                           const CalibrationConfig& cfg) {
  return calibrate_all(std::span(&spec, 1), noise, cfg).front().threshold;
}

/// Fraction of statistics strictly above gamma.
inline double exceedance(std::span<const double> stats, double gamma) {
  if (stats.empty()) return 0.0;
  std::size_t above = 0;
  for (double s : stats)
    if (s > gamma) ++above;
  return static_cast<double>(above) / static_cast<double>(stats.size());
}

inline void check_threshold(const DetectorSpec& spec, const Threshold& th) {
  if (segment_detector_id(spec.id) != segment_detector_id(th.detector))
    throw DetectorMismatch("threshold calibrated for " + std::string(to_string(th.detector)) +
                           ", detector is " + std::string(to_string(spec.id)));
}

/// Empirical detection probability under signal-plus-noise.
inline double measure_pd(const DetectorSpec& spec, const Threshold& th, const SignalModel& signal,
                         const NoiseModel& noise, double snr_db, const TrialConfig& cfg) {
  check_threshold(spec, th);
  const auto stats = collect_statistics(std::span(&spec, 1), TrialSource{signal, noise, snr_db},
                                        cfg, seed_domain::kMeasureH1);
  return exceedance(stats[0], th.gamma);
}

/// Empirical false-alarm probability on fresh noise.
inline double measure_pf(const DetectorSpec& spec, const Threshold& th, const NoiseModel& noise,
                         const TrialConfig& cfg) {
  check_threshold(spec, th);
  const auto stats = collect_statistics(std::span(&spec, 1), TrialSource::noise_only(noise), cfg,
                                        seed_domain::kMeasureH0);
  return exceedance(stats[0], th.gamma);
}

}  // namespace specsense
