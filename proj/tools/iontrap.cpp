// iontrap: simulate photon time-tag streams and analyse them.
//
//   iontrap simulate --config run.ini --output run.tags
//   iontrap spectrum run.tags --bin 16ns --max-lag 5ms --output run.spectrum.csv
//   iontrap fit run.spectrum.csv --output run.fit.json [--guess 1.665MHz,...]
//   iontrap nsr run.tags --lags 0.25ms,0.5ms,1ms,2ms,5ms,10ms --output run.nsr.csv
//   iontrap pulsed run.tags --windows 62us:12us,413us:12us --coarse 1.6465MHz --output run.pulsed.json
//   iontrap report rundir

#include <CLI11.hpp>

#include <iostream>

#include "iontrap/commands.hpp"

namespace {

using namespace iontrap;

// CLI11 parses into strings; quantities go through the SI parser so that
// "16ns" is bit-identical to the library's 16e-9.
struct Quantity {
  std::string text;
  std::string unit;
  std::string key;
  [[nodiscard]] bool given() const { return !text.empty(); }
  [[nodiscard]] double value() const {
    try {
      return parse_quantity(text, unit);
    } catch (const ConfigError& e) {
      throw ConfigError(key, e.what());
    }
  }
  [[nodiscard]] std::vector<double> list() const {
    try {
      return parse_quantity_list(text, unit);
    } catch (const ConfigError& e) {
      throw ConfigError(key, e.what());
    }
  }
};

corr::Window parse_window(const std::string& s) {
  if (s == "rectangular") return corr::Window::rectangular;
  if (s == "hann") return corr::Window::hann;
  throw ConfigError("window", "expected rectangular or hann");
}

corr::Scale parse_scale(const std::string& s) {
  if (s == "magnitude") return corr::Scale::magnitude;
  if (s == "power") return corr::Scale::power;
  throw ConfigError("scale", "expected magnitude or power");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trapped-ion motional spectroscopy from photon time tags"};
  app.require_subcommand(1);

  // simulate
  cli::SimulateArgs sim_args;
  Quantity sim_duration{"", "s", "duration"};
  std::int64_t sim_seed = -1;
  auto* simulate = app.add_subcommand("simulate", "Write a simulated time-tag file");
  simulate->add_option("-c,--config", sim_args.config_path, "INI configuration (defaults if omitted)");
  simulate->add_option("-o,--output", sim_args.output, "Output tag file")->required();
  simulate->add_option("--duration", sim_duration.text, "Override [simulation] duration, e.g. 60s");
  simulate->add_option("--seed", sim_seed, "Override [simulation] seed");

  // spectrum
  cli::SpectrumArgs spec_args;
  Quantity spec_bin{"16ns", "s", "bin"}, spec_lag{"5ms", "s", "max_lag"}, spec_excl{"200ns", "s", "exclude_below"};
  std::string spec_window = "rectangular", spec_scale = "magnitude";
  auto* spectrum = app.add_subcommand("spectrum", "Correlation histogram and its spectrum");
  spectrum->add_option("input", spec_args.input, "Tag file")->required();
  spectrum->add_option("-o,--output", spec_args.output, "Spectrum CSV")->required();
  spectrum->add_option("--bin", spec_bin.text, "Histogram bin width")->capture_default_str();
  spectrum->add_option("--max-lag", spec_lag.text, "Largest correlation lag")->capture_default_str();
  spectrum->add_option("--exclude-below", spec_excl.text, "Lags replaced by the mean")->capture_default_str();
  spectrum->add_option("--window", spec_window, "rectangular or hann")->capture_default_str();
  spectrum->add_option("--scale", spec_scale, "magnitude or power")->capture_default_str();
  spectrum->add_option("--histogram", spec_args.histogram_output, "Also write the lag histogram CSV");
  spectrum->add_flag("--streaming", spec_args.streaming, "Read the file in chunks");
  spectrum->add_option("--threads", spec_args.threads, "Correlator threads (0: all cores)");

  // fit
  cli::FitArgs fit_args;
  Quantity fit_guess{"", "Hz", "guess"}, fit_window{"5kHz", "Hz", "window"};
  double fit_threshold = 5.0;
  auto* fit = app.add_subcommand("fit", "Lorentzian fits to spectrum peaks");
  fit->add_option("input", fit_args.input, "Spectrum CSV")->required();
  fit->add_option("-o,--output", fit_args.output, "Fit report JSON")->required();
  fit->add_option("--guess", fit_guess.text, "Comma-separated centre guesses (default: detected peaks)");
  fit->add_option("--window", fit_window.text, "Fit window width")->capture_default_str();
  fit->add_option("--threshold", fit_threshold, "Detection threshold in noise sigma")->capture_default_str();
  fit->add_option("-c,--config", fit_args.config_path, "Configuration used to label modes");

  // nsr
  cli::NsrArgs nsr_args;
  Quantity nsr_lags{"0.25ms,0.5ms,1ms,2ms,5ms,10ms", "s", "lags"}, nsr_bin{"16ns", "s", "bin"};
  auto* nsr = app.add_subcommand("nsr", "Noise-to-signal ratio versus correlation window");
  nsr->add_option("input", nsr_args.input, "Tag file")->required();
  nsr->add_option("-o,--output", nsr_args.output, "Output CSV")->required();
  nsr->add_option("--lags", nsr_lags.text, "Comma-separated max lags")->capture_default_str();
  nsr->add_option("--bin", nsr_bin.text, "Histogram bin width")->capture_default_str();

  // pulsed
  cli::PulsedArgs pulsed_args;
  std::string pulsed_windows = "62us:12us,413us:12us";
  Quantity pulsed_coarse{"1.6465MHz", "Hz", "coarse"}, pulsed_bin{"16ns", "s", "bin"},
      pulsed_coarse_sigma{"0Hz", "Hz", "coarse_uncertainty"};
  auto* pulsed = app.add_subcommand("pulsed", "Frequency from two triggered sine fits");
  pulsed->add_option("input", pulsed_args.input, "Tag file with trigger records")->required();
  pulsed->add_option("-o,--output", pulsed_args.output, "Output JSON")->required();
  pulsed->add_option("--windows", pulsed_windows, "Two start:length windows after the trigger")->capture_default_str();
  pulsed->add_option("--coarse", pulsed_coarse.text, "Coarse frequency")->capture_default_str();
  pulsed->add_option("--coarse-uncertainty", pulsed_coarse_sigma.text, "1 sigma of the coarse frequency");
  pulsed->add_option("--bin", pulsed_bin.text, "Histogram bin")->capture_default_str();
  pulsed->add_flag("--fractional", pulsed_args.estimate.fractional, "Add the fractional cycle from the phases");
  pulsed->add_flag("--poisson-weights", pulsed_args.sine.poisson_weighted, "Weight bins by 1/max(count, 1)");
  pulsed->add_option("--histograms", pulsed_args.histogram_prefix, "Write <prefix>1.csv and <prefix>2.csv");

  // report
  cli::ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Collect fits and scans into tables and figure CSVs");
  report->add_option("directory", report_args.directory, "Run directory")->required();
  report->add_option("-o,--output", report_args.output_directory, "Output directory (default <dir>/report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kExitUsage;
  }

  auto& out = std::cout;
  auto& err = std::cerr;
  return cli::run_command(
      [&]() -> int {
        if (*simulate) {
          if (sim_duration.given()) sim_args.duration = sim_duration.value();
          if (sim_seed >= 0) sim_args.seed = static_cast<std::uint64_t>(sim_seed);
          return cli::cmd_simulate(sim_args, out, err);
        }
        if (*spectrum) {
          spec_args.bin_width = spec_bin.value();
          spec_args.max_lag = spec_lag.value();
          spec_args.spectrum.exclude_below = spec_excl.value();
          spec_args.spectrum.window = parse_window(spec_window);
          spec_args.spectrum.scale = parse_scale(spec_scale);
          return cli::cmd_spectrum(spec_args, out, err);
        }
        if (*fit) {
          if (fit_guess.given()) fit_args.guesses = fit_guess.list();
          fit_args.window = fit_window.value();
          fit_args.peaks.threshold_sigma = fit_threshold;
          return cli::cmd_fit(fit_args, out, err);
        }
        if (*nsr) {
          nsr_args.lags = nsr_lags.list();
          nsr_args.bin_width = nsr_bin.value();
          return cli::cmd_nsr(nsr_args, out, err);
        }
        if (*pulsed) {
          pulsed_args.windows = config::detail::parse_windows("windows", pulsed_windows);
          pulsed_args.coarse_frequency = pulsed_coarse.value();
          pulsed_args.estimate.coarse_uncertainty = pulsed_coarse_sigma.value();
          pulsed_args.bin = pulsed_bin.value();
          return cli::cmd_pulsed(pulsed_args, out, err);
        }
        return cli::cmd_report(report_args, out, err);
      },
      err);
}
