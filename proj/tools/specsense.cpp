// specsense: spectrum-sensing experiments from the command line.
//
//   specsense learn      blind feature learning -> template file
//   specsense sense      one detection decision on an input
//   specsense calibrate  Monte-Carlo threshold -> threshold file
//   specsense sweep      Pd vs SNR CSV
//   specsense roc        (Pf, Pd) pairs at one SNR
//   specsense stability  consecutive-segment feature similarity CSV
//
// Exit codes: 0 success (learned), 2 not learned, 1 any error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specsense/harness.hpp"

namespace {

using specsense::ExperimentSpec;

struct CommonOptions {
  std::string preset;
  std::string taps;
  std::string snr_grid;
  std::string detectors;
  std::string output;
  std::size_t seed = 1;
};

void add_source_options(CLI::App* sub, ExperimentSpec& spec, CommonOptions& co) {
  auto& s = spec.source;
  sub->add_option("--preset", co.preset, "paper-sim | paper-hw | desk (sets n, ns, trials)")
      ->check(CLI::IsMember({"paper-sim", "paper-hw", "desk"}));
  sub->add_option("--n", spec.n, "vector length N")->check(CLI::Range(2, 4096));
  sub->add_option("--ns", spec.ns, "vectors per segment Ns")->check(CLI::PositiveNumber);
  sub->add_option("--seed", co.seed, "master RNG seed");
  sub->add_option("--sigma2", s.sigma2, "noise variance");
  sub->add_option("--snr", s.snr_db, "signal-to-noise ratio in dB");
  sub->add_option("--signal", s.signal, "ar1 | sinusoid | fir | file | none");
  sub->add_option("--ar-coef", s.ar_coef, "AR(1) coefficient");
  sub->add_option("--freq", s.freq, "sinusoid frequency, cycles/sample");
  sub->add_option("--phase", s.phase, "sinusoid phase policy: random | fixed");
  sub->add_option("--taps", co.taps, "FIR taps, comma separated");
  sub->add_option("--signal-file", s.signal_file, "clean signal recording (signal=file)");
  sub->add_option("--signal-format", s.signal_format, "f32le | i16le | csv | cf32le | ci16le");
  sub->add_option("--workers", spec.workers, "worker threads (0 = all cores)");
}

void add_input_options(CLI::App* sub, ExperimentSpec& spec) {
  sub->add_option("--input", spec.source.input, "recorded sample file (replaces synthetic source)");
  sub->add_option("--format", spec.source.input_format, "f32le | i16le | csv | cf32le | ci16le");
  sub->add_flag("--demean", spec.source.demean, "subtract the segment mean before covariance");
}

void add_learning_options(CLI::App* sub, ExperimentSpec& spec) {
  sub->add_option("--te", spec.te, "learning threshold T_e in (0,1)");
  sub->add_option("--segments", spec.segments, "number of consecutive segments");
}

void add_trial_options(CLI::App* sub, ExperimentSpec& spec) {
  sub->add_option("--trials", spec.trials, "Monte-Carlo trials per point");
  sub->add_option("--cal-trials", spec.cal_trials, "noise-only calibration trials");
  sub->add_option("--pf", spec.target_pf, "target false-alarm probability");
}

/// Reads a flat key=value file. Keys may use '_' or '-'.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw specsense::Error("cannot open config '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw specsense::Error(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    for (char& c : key)
      if (c == '_') c = '-';
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

std::ostream* open_output(const std::string& path, std::unique_ptr<std::ofstream>& holder) {
  if (path.empty() || path == "-") return &std::cout;
  holder = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*holder) throw specsense::Error("cannot write '" + path + "'");
  return holder.get();
}

}  // namespace

int main(int argc, char** argv) {
  ExperimentSpec spec;
  CommonOptions co;
  std::string config_path;

  CLI::App app{"Spectrum sensing with blindly learned eigenvector features"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", config_path, "flat key=value config file (flags override it)");

  auto* learn = app.add_subcommand("learn", "learn a feature template from consecutive segments");
  add_source_options(learn, spec, co);
  add_input_options(learn, spec);
  add_learning_options(learn, spec);
  learn->add_option("--output,-o", co.output, "template file to write")->required();

  auto* sense = app.add_subcommand("sense", "decide H0/H1 on the first segment of an input");
  add_source_options(sense, spec, co);
  add_input_options(sense, spec);
  sense->add_option("--detector", spec.detector, "FTM | MME | CAV")->required();
  sense->add_option("--template", spec.template_path, "feature template (FTM)");
  sense->add_option("--threshold", spec.threshold_path, "threshold file from calibrate")->required();

  auto* calibrate = app.add_subcommand("calibrate", "calibrate a threshold on noise-only trials");
  add_source_options(calibrate, spec, co);
  add_trial_options(calibrate, spec);
  calibrate->add_option("--detector", spec.detector, "EC | FTM | MME | CAV")->required();
  calibrate->add_option("--template", spec.template_path, "feature template (FTM)");
  calibrate->add_option("--output,-o", co.output, "threshold file (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Pd vs SNR at a target Pf");
  add_source_options(sweep, spec, co);
  add_trial_options(sweep, spec);
  add_learning_options(sweep, spec);
  sweep->add_option("--detectors", co.detectors, "comma list from EC,FTM,MME,CAV");
  sweep->add_option("--snr-grid", co.snr_grid, "start:stop:step or comma list (dB)")->required();
  sweep->add_option("--template-snr", spec.template_snr_db, "SNR of the FTM learning pre-run");
  sweep->add_option("--output,-o", co.output, "CSV file (default stdout)");

  auto* roc = app.add_subcommand("roc", "(Pf, Pd) over a threshold grid at one SNR");
  add_source_options(roc, spec, co);
  add_trial_options(roc, spec);
  add_learning_options(roc, spec);
  roc->add_option("--detectors", co.detectors, "comma list from EC,FTM,MME,CAV");
  roc->add_option("--points", spec.roc_points, "thresholds per detector");
  roc->add_option("--template-snr", spec.template_snr_db, "SNR of the FTM learning pre-run");
  roc->add_option("--output,-o", co.output, "CSV file (default stdout)");

  auto* stability = app.add_subcommand("stability", "feature similarity of consecutive segments");
  add_source_options(stability, spec, co);
  add_input_options(stability, spec);
  add_learning_options(stability, spec);
  stability->add_option("--output,-o", co.output, "CSV file (default stdout)");

  try {
    // Config values go in right after the subcommand name so that explicit
    // flags, which come later, take precedence.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (!config_path.empty()) {
      std::size_t sub_pos = args.size();
      CLI::App* sub = nullptr;
      for (std::size_t i = 0; i < args.size() && !sub; ++i)
        for (auto* s : app.get_subcommands({}))
          if (args[i] == s->get_name()) {
            sub = s;
            sub_pos = i;
            break;
          }
      if (sub) {
        auto known_anywhere = [&](const std::string& flag) {
          for (auto* s : app.get_subcommands({}))
            if (s->get_option_no_throw(flag) != nullptr) return true;
          return false;
        };
        std::vector<std::string> injected;
        for (const auto& [key, value] : read_config(config_path)) {
          const std::string flag = "--" + key;
          if (sub->get_option_no_throw(flag) != nullptr) {
            injected.push_back(flag + "=" + value);
          } else if (!known_anywhere(flag)) {
            throw specsense::Error("unknown config key '" + key + "'");
          }
        }
        args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, injected.begin(),
                    injected.end());
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "specsense: " << e.what() << "\n";
    return 1;
  }

  try {
    spec.seed = co.seed;
    if (!co.preset.empty()) {
      const auto p = specsense::preset(co.preset);
      CLI::App* active = app.get_subcommands().front();
      auto unset = [&](const char* name) {
        const auto* o = active->get_option_no_throw(name);
        return o != nullptr && o->count() == 0;
      };
      if (unset("--n")) spec.n = p.n;
      if (unset("--ns")) spec.ns = p.ns;
      if (unset("--trials")) spec.trials = p.trials;
    }
    if (!co.taps.empty()) spec.source.taps = specsense::parse_number_list(co.taps);
    if (!co.detectors.empty()) {
      spec.detectors.clear();
      std::string d = co.detectors;
      for (char& c : d)
        if (c == ',') c = ' ';
      std::istringstream is(d);
      for (std::string t; is >> t;) spec.detectors.push_back(t);
    }
    if (!co.snr_grid.empty()) spec.snr_grid = specsense::parse_snr_grid(co.snr_grid);

    std::unique_ptr<std::ofstream> holder;
    if (*learn) {
      spec.command = "learn";
      spec.template_path = co.output;
      const auto rep = specsense::run_learn(spec, std::cout);
      return rep.learned ? 0 : 2;
    }
    if (*sense) {
      spec.command = "sense";
      std::cout << specsense::run_sense(spec).line() << "\n";
      return 0;
    }
    if (*calibrate) {
      spec.command = "calibrate";
      const auto th = specsense::run_calibrate(spec);
      *open_output(co.output, holder) << specsense::format_threshold(th);
      return 0;
    }
    if (*sweep) {
      spec.command = "sweep";
      specsense::run_sweep(spec, *open_output(co.output, holder));
      return 0;
    }
    if (*roc) {
      spec.command = "roc";
      specsense::run_roc(spec, *open_output(co.output, holder));
      return 0;
    }
    if (*stability) {
      spec.command = "stability";
      const auto rep = specsense::run_stability(spec, *open_output(co.output, holder));
      std::cerr << "fraction_above_te=" << specsense::fmt9(rep.fraction_above_te)
                << " first_last_rho=" << specsense::fmt9(rep.first_last_rho) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "specsense: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
