#pragma once

// Experiment drivers behind the specsense command-line tool. Each run_*
// function takes a fully resolved ExperimentSpec, writes its artifacts to the
// given streams and returns a result the CLI maps to an exit code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "specsense/calibration.hpp"
#include "specsense/core.hpp"
#include "specsense/covariance.hpp"
#include "specsense/detectors.hpp"
#include "specsense/errors.hpp"
#include "specsense/feature_learning.hpp"
#include "specsense/rng.hpp"
#include "specsense/simgen.hpp"

namespace specsense {

/// Formats a float with 9 significant digits (CSV convention).
inline std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Preset {
  std::size_t n;
  std::size_t ns;
  std::size_t trials;
};

/// paper-sim: simulation scale; paper-hw: the hardware covariance length;
/// desk: laptop scale used by the acceptance suite.
inline Preset preset(const std::string& name) {
  if (name == "paper-sim") return {32, 100000, 1000};
  if (name == "paper-hw") return {32, std::size_t{1} << 20, 1000};
  if (name == "desk") return {32, 10000, 500};
  throw InvalidArgument("unknown preset '" + name + "' (paper-sim, paper-hw, desk)");
}

struct SourceSpec {
  /// ar1 | sinusoid | fir | file | none
  std::string signal = "ar1";
  double ar_coef = 0.9;
  double freq = 0.1;
  std::string phase = "random";
  double fixed_phase = 0.0;
  std::vector<double> taps{1.0, 0.8, 0.5};
  std::string signal_file;
  std::string signal_format = "f32le";
  double snr_db = 0.0;
  double sigma2 = 1.0;
  /// Recorded input for learn / sense / stability; replaces the synthetic source.
  std::string input;
  std::string input_format = "f32le";
  bool demean = false;
};

struct ExperimentSpec {
  std::string command;
  SourceSpec source;
  std::size_t n = 32;
  std::size_t ns = 10000;
  std::size_t trials = 500;
  std::size_t cal_trials = 2000;
  std::size_t segments = 10;
  std::vector<double> snr_grid;
  std::vector<std::string> detectors{"EC", "FTM", "MME", "CAV"};
  std::string detector = "CAV";
  double target_pf = 0.1;
  double te = FlaConfig::kSimulationTe;
  double template_snr_db = 20.0;
  std::uint64_t seed = 1;
  std::size_t roc_points = 21;
  std::string template_path;
  std::string threshold_path;
  unsigned workers = 0;

  /// One-line key=value description of every resolved parameter.
  std::string describe() const {
    std::ostringstream os;
    auto list = [](const auto& v, auto f) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + f(v[i]);
      return s;
    };
    os << "command=" << command << "; signal=" << source.signal;
    if (source.signal == "ar1") os << "; ar_coef=" << fmt9(source.ar_coef);
    if (source.signal == "sinusoid")
      os << "; freq=" << fmt9(source.freq) << "; phase=" << source.phase;
    if (source.signal == "fir") os << "; taps=" << list(source.taps, fmt9);
    if (source.signal == "file")
      os << "; signal_file=" << source.signal_file << "; signal_format=" << source.signal_format;
    if (!source.input.empty())
      os << "; input=" << source.input << "; input_format=" << source.input_format;
    os << "; sigma2=" << fmt9(source.sigma2) << "; snr_db=" << fmt9(source.snr_db)
       << "; snr_definition=per-sample power ratio"
       << "; n=" << n << "; ns=" << ns << "; trials=" << trials << "; cal_trials=" << cal_trials
       << "; segments=" << segments << "; target_pf=" << fmt9(target_pf) << "; te=" << fmt9(te)
       << "; template_snr_db=" << fmt9(template_snr_db) << "; seed=" << seed
       << "; demean=" << (source.demean ? "true" : "false");
    if (!snr_grid.empty()) os << "; snr_grid=" << list(snr_grid, fmt9);
    if (command == "sweep" || command == "roc")
      os << "; detectors=" << list(detectors, [](const std::string& s) { return s; });
    if (command == "roc") os << "; roc_points=" << roc_points;
    return os.str();
  }
};

/// Parses "a:b:step" (inclusive) or a comma/space separated list.
inline std::vector<double> parse_snr_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double a = 0, b = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) || b < a)
      throw InvalidArgument("bad SNR range '" + text + "' (expected start:stop:step)");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(a + static_cast<double>(i) * step);
  } else {
    std::string t = text;
    for (char& c : t)
      if (c == ',') c = ' ';
    std::istringstream is(t);
    double v;
    while (is >> v) out.push_back(v);
    if (!is.eof()) throw InvalidArgument("bad SNR list '" + text + "'");
  }
  if (out.empty()) throw InvalidArgument("SNR grid is empty");
  if (!std::is_sorted(out.begin(), out.end())) throw InvalidArgument("SNR grid must be sorted");
  return out;
}

inline std::vector<double> parse_number_list(const std::string& text) {
  std::string t = text;
  for (char& c : t)
    if (c == ',') c = ' ';
  std::istringstream is(t);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  if (!is.eof() || out.empty()) throw InvalidArgument("bad number list '" + text + "'");
  return out;
}

inline SignalModel make_signal_model(const SourceSpec& s) {
  SignalModel m;
  if (s.signal == "ar1") {
    m.kind = Ar1{s.ar_coef};
  } else if (s.signal == "sinusoid") {
    Sinusoid sin{s.freq};
    if (s.phase == "fixed") {
      sin.phase_policy = PhasePolicy::Fixed;
      sin.fixed_phase = s.fixed_phase;
    } else if (s.phase != "random") {
      throw InvalidArgument("phase must be 'random' or 'fixed'");
    }
    m.kind = sin;
  } else if (s.signal == "fir") {
    m.kind = FilteredNoise{s.taps};
  } else if (s.signal == "file") {
    if (s.signal_file.empty()) throw InvalidArgument("signal=file needs --signal-file");
    m.kind = load_file_signal(s.signal_file, parse_sample_format(s.signal_format));
  } else if (s.signal == "none") {
    m.amplitude = 0.0;
  } else {
    throw InvalidArgument("unknown signal '" + s.signal + "' (ar1, sinusoid, fir, file, none)");
  }
  m.validate();
  return m;
}

/// Stream for learn / sense / stability: the recorded input when given,
/// otherwise `length` synthetic samples.
inline SampleStream input_stream(const ExperimentSpec& spec, std::size_t length) {
  if (!spec.source.input.empty())
    return ingest_file(spec.source.input, parse_sample_format(spec.source.input_format));
  return generate(make_signal_model(spec.source), NoiseModel{spec.source.sigma2},
                  spec.source.snr_db, length, spec.seed, {spec.n, 1})
      .stream;
}

inline std::vector<SensingSegment> input_segments(const ExperimentSpec& spec) {
  const std::size_t len = required_samples(spec.n, spec.ns);
  const auto stream = input_stream(spec, spec.segments * len);
  validate_stream(stream, spec.n, spec.ns);
  return split_segments(stream, spec.n, spec.ns, spec.segments);
}

inline FlaConfig fla_config(const ExperimentSpec& spec) {
  FlaConfig cfg;
  cfg.te = spec.te;
  cfg.n = spec.n;
  cfg.ns = spec.ns;
  cfg.power = sensing_power_config(spec.seed);
  cfg.covariance.demean = spec.source.demean;
  return cfg;
}

// ---------------------------------------------------------------- learn

inline LearnReport run_learn(const ExperimentSpec& spec, std::ostream& log) {
  const auto segments = input_segments(spec);
  if (segments.size() < 2) throw InsufficientSegments(2, segments.size());
  const auto report = fla_learn(segments, fla_config(spec));
  log << "# " << spec.describe() << "\n";
  log << "segments_processed=" << report.segments_processed << "\n";
  log << "rho_history=";
  for (std::size_t i = 0; i < report.rho_history.size(); ++i)
    log << (i ? "," : "") << fmt9(report.rho_history[i]);
  log << "\n";
  if (!report.rho_history.empty()) {
    const auto [lo, hi] = std::minmax_element(report.rho_history.begin(), report.rho_history.end());
    log << "rho_min=" << fmt9(*lo) << " rho_max=" << fmt9(*hi) << "\n";
  }
  log << "learned=" << (report.learned ? "yes" : "no") << "\n";
  if (report.learned && !spec.template_path.empty()) {
    save_template(*report.feature, spec.template_path);
    log << "template=" << spec.template_path << "\n";
  }
  return report;
}

// ------------------------------------------------------------ threshold file

inline constexpr const char* kThresholdMagic = "specsense-threshold v1";

struct ThresholdFile {
  Threshold threshold;
  std::size_t n;
  std::size_t ns;
};

inline std::string format_threshold(const ThresholdFile& t) {
  std::ostringstream os;
  os << kThresholdMagic << "\n"
     << "detector=" << to_string(t.threshold.detector) << "\n"
     << "gamma=" << fmt17(t.threshold.gamma) << "\n"
     << "target_pf=" << fmt17(t.threshold.target_pf) << "\n"
     << "trials=" << t.threshold.calibration_trials << "\n"
     << "n=" << t.n << "\n"
     << "ns=" << t.ns << "\n"
     << "end\n";
  return os.str();
}

inline ThresholdFile parse_threshold(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  static const char* keys[] = {"detector", "gamma", "target_pf", "trials", "n", "ns"};
  if (lines.empty() || lines[0] != kThresholdMagic)
    throw MalformedTemplate(1, "expected '" + std::string(kThresholdMagic) + "'");
  if (lines.size() != 8 || lines[7] != "end")
    throw MalformedTemplate(std::min<std::size_t>(lines.size() + 1, 8), "expected 6 fields then 'end'");
  std::map<std::string, std::string> kv;
  for (std::size_t i = 0; i < 6; ++i) {
    const std::string prefix = std::string(keys[i]) + "=";
    if (lines[i + 1].rfind(prefix, 0) != 0)
      throw MalformedTemplate(i + 2, "expected '" + prefix + "...'");
    kv[keys[i]] = lines[i + 1].substr(prefix.size());
  }
  auto num = [&](const char* key, std::size_t line) {
    const std::string& v = kv[key];
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
      throw MalformedTemplate(line, std::string("bad ") + key + " '" + v + "'");
    return out;
  };
  auto count = [&](const char* key, std::size_t line) {
    const std::string& v = kv[key];
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty())
      throw MalformedTemplate(line, std::string("bad ") + key + " '" + v + "'");
    return out;
  };
  const DetectorId id = parse_detector(kv["detector"]);
  return ThresholdFile{Threshold(id, num("gamma", 3), num("target_pf", 4), count("trials", 5)),
                       count("n", 6), count("ns", 7)};
}

inline ThresholdFile load_threshold(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open threshold '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_threshold(ss.str());
}

inline void save_threshold(const ThresholdFile& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write threshold '" + path + "'");
  out << format_threshold(t);
}

// ------------------------------------------------------------- detectors

/// Detector for experiment use. EC needs the SNR its model is built for.
inline DetectorSpec make_detector(const std::string& name, const ExperimentSpec& spec,
                                  const std::optional<Feature>& templ,
                                  std::optional<double> ec_snr_db = std::nullopt) {
  DetectorSpec d;
  d.power = sensing_power_config(spec.seed);
  const DetectorId id = parse_detector(name);
  d.id = id;
  if (id == DetectorId::FTM) {
    if (!templ) throw InvalidArgument("FTM requires a feature template");
    d.templ = templ;
  } else if (id == DetectorId::EC || id == DetectorId::EC_AVG) {
    d.id = DetectorId::EC_AVG;
    const auto model = make_signal_model(spec.source);
    if (model.amplitude == 0.0) throw InvalidArgument("EC needs a signal model");
    const double snr = ec_snr_db.value_or(spec.source.snr_db);
    const NoiseModel noise{spec.source.sigma2};
    d.ec = EcModel(signal_covariance(model, target_signal_power(model, noise, snr), spec.n, spec.ns),
                   spec.source.sigma2);
  }
  return d;
}

/// FTM template learned from a high-SNR run of the configured signal before
/// any detection trial.
inline Feature learn_sweep_template(const ExperimentSpec& spec) {
  ExperimentSpec pre = spec;
  pre.source.input.clear();
  pre.source.snr_db = spec.template_snr_db;
  pre.seed = derive_seed(spec.seed, seed_domain::kTemplate);
  if (pre.segments < 2) pre.segments = 2;
  const auto report = fla_learn(input_segments(pre), fla_config(pre));
  if (!report.learned)
    throw Error("FTM template could not be learned at " + fmt9(spec.template_snr_db) + " dB");
  return *report.feature;
}

// ------------------------------------------------------------- calibrate

inline ThresholdFile run_calibrate(const ExperimentSpec& spec) {
  std::optional<Feature> templ;
  if (parse_detector(spec.detector) == DetectorId::FTM) {
    if (spec.template_path.empty()) throw InvalidArgument("FTM calibration needs --template");
    templ = load_template(spec.template_path);
  }
  const auto det = make_detector(spec.detector, spec, templ);
  const CalibrationConfig cfg{spec.n, spec.ns, spec.cal_trials, spec.target_pf, spec.seed,
                              spec.workers};
  const auto th = calibrate(det, NoiseModel{spec.source.sigma2}, cfg);
  return {th, spec.n, spec.ns};
}

// ----------------------------------------------------------------- sense

struct SenseResult {
  DetectorId detector;
  double statistic;
  double gamma;
  Hypothesis decision;

  std::string line() const {
    return std::string(to_string(detector)) + "," + fmt9(statistic) + "," + fmt9(gamma) + "," +
           to_string(decision);
  }
};

inline SenseResult run_sense(const ExperimentSpec& spec) {
  const DetectorId id = parse_detector(spec.detector);
  if (id == DetectorId::EC || id == DetectorId::EC_AVG)
    throw InvalidArgument("EC needs simulator ground truth; use sweep");
  if (spec.threshold_path.empty()) throw InvalidArgument("sense needs --threshold");
  std::optional<Feature> templ;
  if (id == DetectorId::FTM) {
    if (spec.template_path.empty()) throw InvalidArgument("FTM requires --template");
    templ = load_template(spec.template_path);
  }
  const auto th = load_threshold(spec.threshold_path);
  if (th.threshold.detector != id)
    throw DetectorMismatch("threshold file is for " + std::string(to_string(th.threshold.detector)));
  if (templ && templ->n() != th.n) throw DimensionMismatch(th.n, templ->n());

  const auto stream = input_stream(spec, required_samples(th.n, th.ns));
  validate_stream(stream, th.n, th.ns);
  const auto R = sample_covariance(SensingSegment(stream, 0, th.n, th.ns),
                                   CovarianceOptions{spec.source.demean});
  ExperimentSpec resolved = spec;
  resolved.n = th.n;
  resolved.ns = th.ns;
  const auto det = make_detector(spec.detector, resolved, templ);
  const auto stat = evaluate(det, R);
  return {id, stat.value, th.threshold.gamma, decide(stat, th.threshold)};
}

// ----------------------------------------------------------------- sweep

struct SweepRow {
  double snr_db;
  std::string detector;
  double pd;
  double pf_measured;
  std::size_t trials;
};

inline void check_sweep_detectors(const std::vector<std::string>& dets) {
  if (dets.empty()) throw InvalidArgument("detector list is empty");
  for (const auto& d : dets)
    if (d != "EC" && d != "MME" && d != "CAV" && d != "FTM")
      throw InvalidArgument("sweep detector must be one of EC, MME, CAV, FTM (got '" + d + "')");
}

/// Pd vs SNR at the target Pf. Thresholds come from one shared set of
/// noise-only calibration trials; Pf is re-measured on fresh noise; every
/// SNR point reuses the same trial seeds.
inline std::vector<SweepRow> run_sweep(const ExperimentSpec& spec, std::ostream& csv) {
  check_sweep_detectors(spec.detectors);
  if (spec.snr_grid.empty()) throw InvalidArgument("SNR grid is empty");
  if (!std::is_sorted(spec.snr_grid.begin(), spec.snr_grid.end()))
    throw InvalidArgument("SNR grid must be sorted");
  const auto model = make_signal_model(spec.source);
  if (model.amplitude == 0.0) throw InvalidArgument("sweep needs a signal model");
  const NoiseModel noise{spec.source.sigma2};
  const bool want_ftm =
      std::find(spec.detectors.begin(), spec.detectors.end(), "FTM") != spec.detectors.end();
  std::optional<Feature> templ;
  if (want_ftm) templ = learn_sweep_template(spec);

  // Column d of `specs` layout: one entry per non-EC detector, then EC per SNR.
  std::vector<DetectorSpec> specs;
  std::vector<std::size_t> slot(spec.detectors.size());
  std::vector<std::size_t> ec_slot(spec.snr_grid.size(), 0);
  bool want_ec = false;
  for (std::size_t k = 0; k < spec.detectors.size(); ++k) {
    if (spec.detectors[k] == "EC") {
      want_ec = true;
      continue;
    }
    slot[k] = specs.size();
    specs.push_back(make_detector(spec.detectors[k], spec, templ));
  }
  if (want_ec)
    for (std::size_t i = 0; i < spec.snr_grid.size(); ++i) {
      ec_slot[i] = specs.size();
      specs.push_back(make_detector("EC", spec, templ, spec.snr_grid[i]));
    }

  const CalibrationConfig cal{spec.n, spec.ns, spec.cal_trials, spec.target_pf, spec.seed,
                              spec.workers};
  const auto runs = calibrate_all(specs, noise, cal);
  const TrialConfig tc{spec.n, spec.ns, spec.trials, spec.seed, spec.workers};
  const auto h0 = collect_statistics(specs, TrialSource::noise_only(noise), tc,
                                     seed_domain::kMeasureH0);

  csv << "# " << spec.describe() << "\n";
  csv << "# protocol: FTM template learned once at template_snr_db before the sweep; "
         "EC uses simulator ground truth; thresholds from cal_trials noise-only segments\n";
  csv << "snr_db,detector,pd,pf_measured,trials\n";
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < spec.snr_grid.size(); ++i) {
    const double snr = spec.snr_grid[i];
    std::vector<DetectorSpec> point;
    std::vector<std::size_t> point_slot;
    for (std::size_t k = 0; k < spec.detectors.size(); ++k) {
      point_slot.push_back(spec.detectors[k] == "EC" ? ec_slot[i] : slot[k]);
      point.push_back(specs[point_slot.back()]);
    }
    const auto h1 = collect_statistics(point, TrialSource{model, noise, snr}, tc,
                                       seed_domain::kMeasureH1);
    for (std::size_t k = 0; k < spec.detectors.size(); ++k) {
      const double gamma = runs[point_slot[k]].threshold.gamma;
      SweepRow row{snr, spec.detectors[k], exceedance(h1[k], gamma),
                   exceedance(h0[point_slot[k]], gamma), spec.trials};
      csv << fmt9(row.snr_db) << "," << row.detector << "," << fmt9(row.pd) << ","
          << fmt9(row.pf_measured) << "," << row.trials << "\n";
      rows.push_back(row);
    }
  }
  return rows;
}

// ------------------------------------------------------------------- roc

struct RocPoint {
  std::string detector;
  double gamma;
  double pf;
  double pd;
};

/// (Pf, Pd) pairs over a gamma grid at one SNR. The grid is the set of
/// null-statistic quantiles k / (roc_points - 1); the same H0 / H1
/// statistics serve every gamma.
inline std::vector<RocPoint> run_roc(const ExperimentSpec& spec, std::ostream& csv) {
  check_sweep_detectors(spec.detectors);
  if (spec.roc_points < 2) throw InvalidArgument("roc needs at least 2 points");
  const auto model = make_signal_model(spec.source);
  if (model.amplitude == 0.0) throw InvalidArgument("roc needs a signal model");
  const NoiseModel noise{spec.source.sigma2};
  const double snr = spec.source.snr_db;
  std::optional<Feature> templ;
  if (std::find(spec.detectors.begin(), spec.detectors.end(), "FTM") != spec.detectors.end())
    templ = learn_sweep_template(spec);
  std::vector<DetectorSpec> specs;
  for (const auto& d : spec.detectors) specs.push_back(make_detector(d, spec, templ, snr));
  const TrialConfig tc{spec.n, spec.ns, spec.trials, spec.seed, spec.workers};
  auto h0 = collect_statistics(specs, TrialSource::noise_only(noise), tc, seed_domain::kMeasureH0);
  const auto h1 = collect_statistics(specs, TrialSource{model, noise, snr}, tc,
                                     seed_domain::kMeasureH1);

  csv << "# " << spec.describe() << "\n";
  csv << "detector,gamma,pf,pd\n";
  std::vector<RocPoint> out;
  for (std::size_t d = 0; d < specs.size(); ++d) {
    std::sort(h0[d].begin(), h0[d].end());
    for (std::size_t k = 0; k < spec.roc_points; ++k) {
      const double q = static_cast<double>(k) / static_cast<double>(spec.roc_points - 1);
      const double gamma =
          q <= 0.0 ? std::nextafter(h0[d].front(), -HUGE_VAL) : null_quantile(h0[d], q);
      RocPoint p{spec.detectors[d], gamma, exceedance(h0[d], gamma), exceedance(h1[d], gamma)};
      csv << p.detector << "," << fmt9(p.gamma) << "," << fmt9(p.pf) << "," << fmt9(p.pd) << "\n";
      out.push_back(p);
    }
  }
  return out;
}

// ------------------------------------------------------------- stability

inline StabilityReport run_stability(const ExperimentSpec& spec, std::ostream& csv) {
  const auto segments = input_segments(spec);
  if (segments.size() < 2) throw InsufficientSegments(2, segments.size());
  const auto rep = stability_experiment(segments, fla_config(spec));
  csv << "# " << spec.describe() << "\n";
  csv << "segment_index,rho\n";
  for (std::size_t i = 0; i < rep.rho.size(); ++i) csv << (i + 1) << "," << fmt9(rep.rho[i]) << "\n";
  csv << "# fraction_above_te=" << fmt9(rep.fraction_above_te)
      << " first_last_rho=" << fmt9(rep.first_last_rho) << " pairs=" << rep.rho.size() << "\n";
  return rep;
}

}  // namespace specsense
