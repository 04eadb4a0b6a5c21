// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "specsense/harness.hpp"

using namespace specsense;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const char* id, bool ok, const std::string& what) {
  std::printf("%s %s %s\n", id, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ExperimentSpec desk_spec() {
  ExperimentSpec s;
  const auto p = preset("desk");
  s.n = p.n;
  s.ns = p.ns;
  s.trials = p.trials;
  s.cal_trials = 2000;
  s.target_pf = 0.1;
  s.source.signal = "ar1";
  s.source.ar_coef = 0.9;
  s.seed = 2024;
  return s;
}

// ---------------------------------------------------------------- AC1, AC2

void detector_ordering() {
  auto spec = desk_spec();
  spec.command = "sweep";
  spec.detectors = {"EC", "FTM", "MME", "CAV"};
  for (double snr = -26; snr <= -8; snr += 1) spec.snr_grid.push_back(snr);

  const auto t0 = Clock::now();
  std::ostringstream csv;
  const auto rows = run_sweep(spec, csv);
  const double elapsed = seconds_since(t0);

  std::map<std::string, std::map<double, double>> pd;
  for (const auto& r : rows) pd[r.detector][r.snr_db] = r.pd;
  auto first_snr = [&](const std::string& det) {
    for (const auto& [snr, p] : pd[det])
      if (p >= 0.95) return snr;
    return std::nan("");
  };
  const double ec = first_snr("EC"), ftm = first_snr("FTM"), mme = first_snr("MME");
  const double g1 = ftm - ec, g2 = mme - ftm;
  const bool order = ec <= ftm && ftm <= mme;
  const bool gaps = g1 >= 1 && g1 <= 4 && g2 >= 1 && g2 <= 4;
  report("AC1", order && gaps && elapsed < 600,
         "detector ordering: first SNR with Pd>=0.95 EC=" + num(ec) + " FTM=" + num(ftm) +
             " MME=" + num(mme) + " CAV=" + num(first_snr("CAV")) + " dB, gaps " + num(g1) + "/" +
             num(g2) + " dB (need [1,4]), sweep runtime " + num(elapsed) + " s (need < 600)");

  double worst = 0, worst_snr = 0;
  for (const auto& [snr, p] : pd["MME"]) {
    const double d = std::abs(p - pd["CAV"][snr]);
    if (d > worst) {
      worst = d;
      worst_snr = snr;
    }
  }
  report("AC2", worst <= 0.05,
         "MME vs CAV: max |Pd(MME)-Pd(CAV)| = " + num(worst) + " at " + num(worst_snr) +
             " dB (need <= 0.05)");

  std::printf("# sweep table (snr_db: EC FTM MME CAV)\n");
  for (const auto& [snr, p] : pd["EC"])
    std::printf("#   %6.1f: %.3f %.3f %.3f %.3f\n", snr, p, pd["FTM"][snr], pd["MME"][snr],
                pd["CAV"][snr]);
}

// -------------------------------------------------------------------- AC3

void feature_stability() {
  auto spec = desk_spec();
  spec.segments = 100;
  spec.te = 0.9;
  spec.source.snr_db = 0.0;
  const auto sig = stability_experiment(input_segments(spec), fla_config(spec));
  spec.source.signal = "none";
  spec.seed += 1;
  const auto noise = stability_experiment(input_segments(spec), fla_config(spec));
  const bool ok = sig.fraction_above_te >= 0.95 && sig.first_last_rho >= 0.95 &&
                  noise.fraction_above_te <= 0.05;
  report("AC3", ok,
         "feature stability: AR(1) at 0 dB fraction above T_e=" + num(sig.fraction_above_te) +
             " first-last rho=" + num(sig.first_last_rho) + " (need >= 0.95 each); noise-only fraction=" +
             num(noise.fraction_above_te) + " (need <= 0.05)");
}

// -------------------------------------------------------------------- AC4

void calibration_validity() {
  auto spec = desk_spec();
  spec.source.snr_db = -18.0;  // SNR the EC model is built for
  const auto templ = learn_sweep_template(spec);
  std::vector<DetectorSpec> dets;
  for (const char* d : {"EC", "FTM", "MME", "CAV"}) dets.push_back(make_detector(d, spec, templ));
  const NoiseModel noise{spec.source.sigma2};
  const auto runs =
      calibrate_all(dets, noise, CalibrationConfig{spec.n, spec.ns, 2000, 0.1, spec.seed, 0});
  const auto h0 = collect_statistics(dets, TrialSource::noise_only(noise),
                                     TrialConfig{spec.n, spec.ns, 2000, spec.seed, 0},
                                     seed_domain::kMeasureH0);
  bool ok = true;
  std::string detail;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    const double pf = exceedance(h0[d], runs[d].threshold.gamma);
    ok = ok && std::abs(pf - 0.1) <= 0.025;
    detail += std::string(d ? " " : "") + std::string(to_string(dets[d].id)) + "=" + num(pf);
  }
  report("AC4", ok, "calibration validity: Pf on 2000 fresh noise trials " + detail +
                        " (need 0.1 +- 0.025)");
}

// -------------------------------------------------------------------- AC5

CovMatrix symmetric(std::size_t n, std::vector<double> m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) m[i * n + j] = m[j * n + i];
  return CovMatrix::from_rows(n, std::move(m));
}

void numerical_oracles() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<std::size_t> dim(2, 32);

  // Leading eigenpair vs Jacobi on random SPD (Wishart plus ridge) matrices.
  double worst_val = 0, worst_vec = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = dim(rng);
    const std::size_t k = n + 4;
    std::vector<double> a(k * n), m(n * n, 0.0);
    for (double& v : a) v = nd(rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double s = 0;
        for (std::size_t r = 0; r < k; ++r) s += a[r * n + i] * a[r * n + j];
        m[i * n + j] = s / static_cast<double>(k) + (i == j ? 0.01 : 0.0);
      }
    const auto R = symmetric(n, m);
    const auto p = leading_eigenvector(R, PowerIterConfig{10000000, 1e-14, 1});
    const auto sys = full_eigensystem_oracle(R);
    worst_val = std::max(worst_val, std::abs(p.value - sys.values[0]) / sys.values[0]);
    double dp = 0, dm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dp += std::pow(p.vector[i] - sys.vectors[0][i], 2);
      dm += std::pow(p.vector[i] + sys.vectors[0][i], 2);
    }
    worst_vec = std::max(worst_vec, std::sqrt(std::min(dp, dm)));
  }

  // Streaming vs batch covariance.
  double worst_cov = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = dim(rng), ns = 1 + static_cast<std::size_t>(t) * 523;
    std::vector<double> x(n + ns - 1);
    for (double& v : x) v = nd(rng);
    CovAccumulator acc(n);
    acc.push(x);
    const auto s = acc.finalize();
    const auto b = sample_covariance(SensingSegment(SampleStream(x), 0, n, ns));
    for (std::size_t i = 0; i < n * n; ++i)
      worst_cov = std::max(worst_cov, std::abs(s.entries()[i] - b.entries()[i]));
  }

  // Similarity properties.
  std::size_t violations = 0;
  std::uniform_int_distribution<std::size_t> shift(0, 31);
  auto unit = [&](std::size_t n) {
    std::vector<double> v(n);
    double s = 0;
    for (double& x : v) {
      x = nd(rng);
      s += x * x;
    }
    for (double& x : v) x /= std::sqrt(s);
    return v;
  };
  for (int t = 0; t < 10000; ++t) {
    const auto a = unit(32), b = unit(32);
    const double r = similarity(a, b);
    std::vector<double> rot(32), neg(b);
    const std::size_t k = shift(rng);
    for (std::size_t i = 0; i < 32; ++i) rot[(i + k) % 32] = b[i];
    for (double& v : neg) v = -v;
    if (!(r >= 0 && r <= 1) || std::abs(similarity(a, rot) - r) > 1e-12 ||
        std::abs(similarity(a, neg) - r) > 1e-12 || std::abs(similarity(b, a) - r) > 1e-12)
      ++violations;
  }

  const bool ok = worst_val <= 1e-6 && worst_vec <= 1e-6 && worst_cov <= 1e-12 && violations == 0;
  report("AC5", ok,
         "numerical oracles: eigenvalue rel err " + num(worst_val) + ", eigenvector err " +
             num(worst_vec) + " (need <= 1e-6, 100 SPD); streaming-batch max diff " + num(worst_cov) +
             " (need <= 1e-12); similarity property violations " + std::to_string(violations) +
             "/10000");
}

// -------------------------------------------------------------------- AC6

void complexity() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  std::vector<double> xs, ys;
  for (std::size_t n : {32u, 64u, 128u, 256u}) {
    // Q diag(2, 1, ..., 0.5) Q^T with Q from Householder reflections: same
    // spectral ratio at every N, so the iteration count does not vary.
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      m[i * n + i] = i == 0 ? 2.0 : 1.0 - 0.5 * static_cast<double>(i) / static_cast<double>(n);
    for (int h = 0; h < 3; ++h) {
      std::vector<double> v(n), w(n);
      double s = 0;
      for (double& x : v) {
        x = nd(rng);
        s += x * x;
      }
      for (double& x : v) x /= std::sqrt(s);
      // M <- H M H, H = I - 2 v v^T
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += m[i * n + j] * v[j];
        w[i] = acc;
      }
      double vw = 0;
      for (std::size_t i = 0; i < n; ++i) vw += v[i] * w[i];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          m[i * n + j] += -2 * v[i] * w[j] - 2 * w[i] * v[j] + 4 * vw * v[i] * v[j];
    }
    const auto R = symmetric(n, m);
    const PowerIterConfig cfg{100000, 1e-10, 1};
    const int reps = static_cast<int>(std::max<std::size_t>(4, 65536 * 4 / (n * n)));
    std::vector<double> times;
    for (int trial = 0; trial < 9; ++trial) {
      const auto t0 = Clock::now();
      double sink = 0;
      for (int r = 0; r < reps; ++r) sink += leading_eigenvector(R, cfg).value;
      times.push_back(seconds_since(t0) / reps);
      if (sink == 0) std::printf("#\n");
    }
    std::sort(times.begin(), times.end());
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(times[times.size() / 2]));
  }
  const double mx = (xs[0] + xs[1] + xs[2] + xs[3]) / 4, my = (ys[0] + ys[1] + ys[2] + ys[3]) / 4;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  report("AC6", slope >= 1.6 && slope <= 2.4,
         "complexity: log-log slope of leading_eigenvector time over N=32..256 is " + num(slope) +
             " (need [1.6, 2.4])");
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  try {
    numerical_oracles();
    complexity();
    feature_stability();
    calibration_validity();
    detector_ordering();
  } catch (const std::exception& e) {
    std::printf("ERROR %s\n", e.what());
    return 1;
  }
  std::printf(
      "AC7 N/A not reproducible at desk scale: absolute hardware sensitivity (dBm), live DTV "
      "capture statistics and DSP latency are replaced by the relative criteria above\n");
  std::printf("# total %.1f s, %d failed\n", seconds_since(t0), failures);
  return failures == 0 ? 0 : 1;
}
