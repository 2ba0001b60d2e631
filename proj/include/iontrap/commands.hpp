#pragma once

// Command implementations behind the `iontrap` executable. Each command is a
// thin composition of library calls plus file I/O; `run_command` maps
// failures to exit codes and a JSON error object on the error stream.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iontrap/config.hpp"
#include "iontrap/correlator.hpp"
#include "iontrap/error.hpp"
#include "iontrap/fitting.hpp"
#include "iontrap/modes.hpp"
#include "iontrap/simulator.hpp"
#include "iontrap/spectrum.hpp"
#include "iontrap/tag_file.hpp"
#include "iontrap/units.hpp"

namespace iontrap::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Shortest decimal text that reads back to the same double.
[[nodiscard]] inline std::string fmt(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

[[nodiscard]] inline int exit_code_for(const Error& e) {
  const auto k = e.kind();
  return (k == "config" || k == "missing_input") ? kExitUsage : kExitFailure;
}

/// Runs `body`, converting exceptions into an exit code and a one-line JSON
/// error on `err`.
inline int run_command(const std::function<int()>& body, std::ostream& err) {
  auto report = [&err](std::string_view kind, const std::string& message, json extra) {
    json j;
    j["error"] = kind;
    j["message"] = message;
    for (auto& [k, v] : extra.items()) j[k] = v;
    err << j.dump() << '\n';
  };
  try {
    return body();
  } catch (const ConfigError& e) {
    report(e.kind(), e.what(), {{"key", e.key()}});
    return kExitUsage;
  } catch (const MissingInputError& e) {
    report(e.kind(), e.what(), {{"missing", e.missing()}});
    return kExitUsage;
  } catch (const AmbiguityError& e) {
    report(e.kind(), e.what(), {{"required_accuracy_hz", e.required_accuracy_hz()}});
    return kExitFailure;
  } catch (const FitError& e) {
    report(e.kind(), e.what(), {{"last_iterate", e.last_iterate()}});
    return kExitFailure;
  } catch (const Error& e) {
    report(e.kind(), e.what(), json::object());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    report("internal", e.what(), json::object());
    return kExitFailure;
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write to " + path.string() + " failed");
}

[[nodiscard]] inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[nodiscard]] inline config::RunConfig load_config_or_default(const std::string& path) {
  return path.empty() ? config::RunConfig{} : config::load_run_config(path);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config_path;  // empty: defaults
  std::string output;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
};

inline int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  auto cfg = load_config_or_default(args.config_path);
  if (args.duration) cfg.duration = *args.duration;
  if (args.seed) cfg.seed = *args.seed;
  cfg.validate();

  sim::SimulationResult result;
  result.stream.channel_count = static_cast<std::uint8_t>(cfg.detectors.n_detectors);
  if (cfg.duration == 0.0) {
    result.warnings.emplace_back("duration is zero: header-only file written");
  } else if (cfg.regime == config::Regime::thermal) {
    sim::ThermalRunConfig run{cfg.duration, cfg.seed, cfg.mirror, cfg.max_events};
    result = sim::simulate_thermal_stream(cfg.trap, cfg.mode_set(), cfg.interferometer, cfg.detectors, run);
  } else {
    result = sim::simulate_pulsed_stream(cfg.pulsed, cfg.pulsed_analysis.windows, cfg.repetitions(),
                                         cfg.interferometer, cfg.detectors, cfg.seed);
  }

  std::uint64_t photons = 0, triggers = 0;
  for (const auto& r : result.stream.records) (r.is_trigger() ? triggers : photons) += 1;

  json meta = config::to_json(cfg);
  meta["acquisition_span_ps"] = result.stream.acquisition_span_ps;
  meta["photons"] = photons;
  meta["triggers"] = triggers;
  io::write_tag_file(args.output, result.stream, meta.dump());

  const double span = static_cast<double>(result.stream.acquisition_span_ps) * kPicosecond;
  json summary;
  summary["output"] = args.output;
  summary["events"] = photons;
  summary["triggers"] = triggers;
  summary["duration_s"] = cfg.duration;
  summary["mean_rate_hz"] = span > 0.0 ? static_cast<double>(photons) / span : 0.0;
  summary["warnings"] = result.warnings;
  out << summary.dump(2) << '\n';
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumArgs {
  std::string input;
  std::string output;
  double bin_width = 16e-9;
  double max_lag = 5e-3;
  corr::SpectrumOptions spectrum{corr::Window::rectangular, corr::Scale::magnitude, 200e-9};
  std::string histogram_output;  // optional lag CSV
  bool streaming = false;        // chunked read, bounded memory
  unsigned threads = 0;
};

[[nodiscard]] inline corr::CorrelationHistogram histogram_from_file(const std::string& path, double bin_width,
                                                                    double max_lag, bool streaming,
                                                                    unsigned threads) {
  const auto bin_ps = static_cast<std::uint64_t>(to_ps(bin_width));
  const auto lag_ps = static_cast<std::uint64_t>(to_ps(max_lag));
  if (streaming) {
    io::TagFileReader reader(path);
    corr::StreamingCorrelator sc(bin_ps, lag_ps);
    std::vector<TimeTagRecord> chunk;
    std::vector<std::uint64_t> ts;
    while (reader.read_chunk(chunk)) {
      ts.clear();
      for (const auto& r : chunk)
        if (!r.is_trigger()) ts.push_back(r.timestamp_ps);
      sc.push(ts);
    }
    return sc.finish();
  }
  const auto file = io::read_tag_file(path);
  const auto ts = photon_timestamps(file.stream);
  auto h = corr::correlation_histogram_ps(ts, bin_ps, lag_ps, {threads});
  if (file.stream.acquisition_span_ps > 0) h.acquisition_span_ps = file.stream.acquisition_span_ps;
  return h;
}

inline void write_spectrum_csv(const std::string& path, const corr::PowerSpectrum& s,
                               const corr::CorrelationHistogram& h, const std::string& source) {
  std::ostringstream o;
  o << "# iontrap spectrum\n";
  o << "# source: " << source << '\n';
  o << "# bin_width_s: " << fmt(h.bin_width()) << '\n';
  o << "# max_lag_s: " << fmt(h.max_lag()) << '\n';
  o << "# resolution_hz: " << fmt(s.resolution) << '\n';
  o << "# window: " << corr::to_string(s.options.window) << '\n';
  o << "# scale: " << corr::to_string(s.options.scale) << '\n';
  o << "# exclude_below_s: " << fmt(s.options.exclude_below) << '\n';
  o << "# events: " << h.n_source_events << '\n';
  o << "# pairs: " << h.total_pairs() << '\n';
  o << "freq_hz,amplitude,transform\n";
  for (std::size_t j = 0; j < s.size(); ++j)
    o << fmt(s.frequencies[j]) << ',' << fmt(s.amplitudes[j]) << ',' << fmt(s.transform[j]) << '\n';
  write_text(path, o.str());
}

inline void write_histogram_csv(const std::string& path, const corr::CorrelationHistogram& h,
                                const std::string& source) {
  std::ostringstream o;
  o << "# iontrap correlation histogram\n";
  o << "# source: " << source << '\n';
  o << "# bin_width_s: " << fmt(h.bin_width()) << '\n';
  o << "# max_lag_s: " << fmt(h.max_lag()) << '\n';
  o << "# events: " << h.n_source_events << '\n';
  o << "# pairs: " << h.total_pairs() << '\n';
  o << "lag_s,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) o << fmt(h.lag_center(k)) << ',' << h.counts[k] << '\n';
  write_text(path, o.str());
}

struct CsvTable {
  std::map<std::string, std::string> header;  // from "# key: value" lines
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

[[nodiscard]] inline CsvTable read_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        std::string key(iontrap::detail::trim(std::string_view(line).substr(1, colon - 1)));
        t.header[key] = std::string(iontrap::detail::trim(std::string_view(line).substr(colon + 1)));
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (t.columns.empty()) {
      t.columns = cells;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw FormatError(path + ":" + std::to_string(lineno) + ": wrong number of columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str()) throw FormatError(path + ":" + std::to_string(lineno) + ": not a number");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw FormatError(path + ": no column header");
  return t;
}

[[nodiscard]] inline corr::PowerSpectrum read_spectrum_csv(const std::string& path) {
  const auto t = read_csv(path);
  if (t.columns.size() < 2 || t.columns[0] != "freq_hz" || t.columns[1] != "amplitude")
    throw FormatError(path + ": expected columns freq_hz,amplitude[,transform]");
  if (t.rows.size() < 2) throw FormatError(path + ": spectrum has fewer than two rows");
  const bool signed_column = t.columns.size() > 2 && t.columns[2] == "transform";
  corr::PowerSpectrum s;
  for (const auto& r : t.rows) {
    s.frequencies.push_back(r[0]);
    s.amplitudes.push_back(r[1]);
    if (signed_column) s.transform.push_back(r[2]);
  }
  const auto window = t.header.find("window");
  if (window != t.header.end() && window->second == "hann") s.options.window = corr::Window::hann;
  const auto scale = t.header.find("scale");
  if (scale != t.header.end() && scale->second == "power") s.options.scale = corr::Scale::power;
  const auto it = t.header.find("resolution_hz");
  s.resolution = it != t.header.end() ? std::strtod(it->second.c_str(), nullptr) : s.frequencies[1] - s.frequencies[0];
  if (!(s.resolution > 0.0)) throw FormatError(path + ": non-positive frequency resolution");
  return s;
}

inline int cmd_spectrum(const SpectrumArgs& args, std::ostream& out, std::ostream& err) {
  if (!(args.max_lag >= args.bin_width)) throw ConfigError("max_lag", "must be at least one bin");
  const auto h = histogram_from_file(args.input, args.bin_width, args.max_lag, args.streaming, args.threads);
  const auto s = corr::power_spectrum(h, args.spectrum);
  write_spectrum_csv(args.output, s, h, fs::path(args.input).filename().string());
  if (!args.histogram_output.empty())
    write_histogram_csv(args.histogram_output, h, fs::path(args.input).filename().string());
  json summary;
  summary["output"] = args.output;
  summary["events"] = h.n_source_events;
  summary["pairs"] = h.total_pairs();
  summary["bins"] = h.counts.size();
  summary["resolution_hz"] = s.resolution;
  summary["warnings"] = h.warnings;
  out << summary.dump(2) << '\n';
  for (const auto& w : h.warnings) err << "warning: " << w << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string input;  // spectrum CSV
  std::string output;  // JSON
  std::vector<double> guesses;  // empty: detected peaks
  double window = 5e3;
  corr::PeakOptions peaks{};
  std::string config_path;  // optional, for mode labels
};

[[nodiscard]] inline json param(const char* name, double value, double sigma) {
  return {{"parameter", name}, {"value", value}, {"sigma", sigma}};
}

[[nodiscard]] inline json fit_to_json(const fit::LorentzianFit& f) {
  json j;
  j["center_f0"] = f.center_f0;
  j["sigma_f0"] = f.sigma_f0;
  j["fwhm"] = f.fwhm;
  j["sigma_fwhm"] = f.sigma_fwhm;
  j["parameters"] = {param("center_f0", f.center_f0, f.sigma_f0), param("fwhm", f.fwhm, f.sigma_fwhm),
                     param("amplitude", f.amplitude, f.sigma_amplitude),
                     param("offset", f.offset, f.sigma_offset)};
  j["residual_norm"] = f.residual_norm;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["amplitude_clamped"] = f.amplitude_clamped;
  j["window_hz"] = {f.window_low, f.window_high};
  return j;
}

/// Nearest configured mode within `tolerance` Hz, or "".
[[nodiscard]] inline std::string label_for(const modes::ModeSet& set, double f, double tolerance) {
  std::string best;
  double best_d = tolerance;
  for (const auto& m : set.modes) {
    const double d = std::abs(m.frequency_hz() - f);
    if (d <= best_d) {
      best_d = d;
      best = m.label();
    }
  }
  return best;
}

inline int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  const auto s = read_spectrum_csv(args.input);
  std::optional<modes::ModeSet> set;
  if (!args.config_path.empty()) set = config::load_run_config(args.config_path).mode_set();

  std::vector<double> guesses = args.guesses;
  json detection = nullptr;
  if (guesses.empty()) {
    const auto search = corr::detect_peaks(s, args.peaks);
    for (const auto& p : search.peaks) guesses.push_back(p.frequency);
    std::sort(guesses.begin(), guesses.end());
    detection = {{"threshold_sigma", args.peaks.threshold_sigma},
                 {"noise_mean", search.noise_mean},
                 {"noise_std", search.noise_std},
                 {"noise_band_masked", search.noise_band_masked},
                 {"candidates", search.peaks.size()}};
  }

  json fits = json::array();
  int failures = 0;
  for (double g : guesses) {
    json entry;
    entry["guess_hz"] = g;
    if (set) entry["label"] = label_for(*set, g, args.window);
    try {
      const auto f = fit::fit_lorentzian(s, g, args.window);
      const json fitted = fit_to_json(f);
      for (const auto& [k, v] : fitted.items()) entry[k] = v;
    } catch (const FitError& e) {
      ++failures;
      entry["converged"] = false;
      entry["error"] = e.what();
      entry["last_iterate"] = e.last_iterate();
      err << "warning: fit at " << fmt(g) << " Hz failed: " << e.what() << '\n';
    }
    fits.push_back(std::move(entry));
  }

  json j;
  j["source"] = fs::path(args.input).filename().string();
  j["window_hz"] = args.window;
  if (!detection.is_null()) j["detection"] = detection;
  j["fits"] = fits;
  write_text(args.output, j.dump(2) + "\n");
  out << "fitted " << guesses.size() - static_cast<std::size_t>(failures) << " of " << guesses.size()
      << " peaks -> " << args.output << '\n';
  return failures == 0 ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// nsr

struct NsrArgs {
  std::string input;
  std::string output;
  std::vector<double> lags{0.25e-3, 0.5e-3, 1e-3, 2e-3, 5e-3, 10e-3};
  double bin_width = 16e-9;
  corr::NoiseToSignalOptions options{};
};

inline int cmd_nsr(const NsrArgs& args, std::ostream& out, std::ostream&) {
  const auto file = io::read_tag_file(args.input);
  const auto report = corr::noise_to_signal_scan(file.stream, args.lags, args.bin_width, args.options);
  std::ostringstream o;
  o << "# iontrap noise-to-signal scan\n";
  o << "# source: " << fs::path(args.input).filename().string() << '\n';
  o << "# bin_width_s: " << fmt(args.bin_width) << '\n';
  o << "# noise_band_hz: " << fmt(args.options.noise_band.low) << "-" << fmt(args.options.noise_band.high) << '\n';
  o << "max_lag_s,signal,signal_freq_hz,noise,ratio\n";
  for (const auto& r : report.rows)
    o << fmt(r.max_lag) << ',' << fmt(r.signal) << ',' << fmt(r.signal_frequency) << ',' << fmt(r.noise) << ','
      << fmt(r.ratio) << '\n';
  write_text(args.output, o.str());
  out << "minimum ratio " << fmt(report.best().ratio) << " at max lag " << fmt(report.best().max_lag) << " s -> "
      << args.output << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pulsed

struct PulsedArgs {
  std::string input;
  std::string output;  // JSON
  std::vector<sim::IlluminationWindow> windows{{62e-6, 12e-6}, {413e-6, 12e-6}};
  double coarse_frequency = 1.6465e6;
  double bin = 16e-9;
  fit::SineFitOptions sine{};
  fit::PhaseFrequencyOptions estimate{};
  std::string histogram_prefix;  // optional: <prefix>1.csv, <prefix>2.csv
};

[[nodiscard]] inline json sine_to_json(const fit::SineFit& f) {
  json j;
  j["window_s"] = {f.window_start, f.window_end};
  j["reference_time"] = f.reference_time;
  j["sigma_reference_time"] = f.sigma_reference_time;
  j["parameters"] = {param("amplitude", f.amplitude, f.sigma_amplitude), param("phase", f.phase, f.sigma_phase),
                     param("offset", f.offset, f.sigma_offset),
                     param("frequency", f.frequency, f.sigma_frequency)};
  j["residual_norm"] = f.residual_norm;
  j["iterations"] = f.iterations;
  return j;
}

inline void write_triggered_csv(const std::string& path, const fit::TriggeredHistogram& h, const fit::SineFit* f,
                                const std::string& source) {
  std::ostringstream o;
  o << "# iontrap triggered histogram\n";
  o << "# source: " << source << '\n';
  o << "# offset_s: " << fmt(h.offset()) << '\n';
  o << "# bin_s: " << fmt(h.bin()) << '\n';
  o << "# triggers: " << h.n_triggers << '\n';
  o << "time_s,count,fit\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const double t = h.bin_center(k);
    const double model =
        f ? f->offset + f->amplitude * std::sin(kTwoPi * f->frequency * (t - f->window_start) + f->phase) : 0.0;
    o << fmt(t) << ',' << h.counts[k] << ',' << fmt(model) << '\n';
  }
  write_text(path, o.str());
}

inline int cmd_pulsed(const PulsedArgs& args, std::ostream& out, std::ostream& err) {
  if (args.windows.size() != 2) throw ConfigError("windows", "exactly two windows are required");
  const auto file = io::read_tag_file(args.input);
  std::vector<fit::TriggeredHistogram> hists;
  std::vector<fit::SineFit> fits;
  for (const auto& w : args.windows) {
    hists.push_back(fit::triggered_histogram(file.stream, {w.start, w.length}, args.bin));
    fits.push_back(fit::fit_sine(hists.back(), args.coarse_frequency, args.sine));
  }
  if (hists[0].photons_before_first_trigger > 0)
    err << "warning: " << hists[0].photons_before_first_trigger << " photons before the first trigger ignored\n";
  const auto est = fit::phase_frequency_estimate(fits[0], fits[1], args.coarse_frequency, args.estimate);

  if (!args.histogram_prefix.empty())
    for (std::size_t i = 0; i < 2; ++i)
      write_triggered_csv(args.histogram_prefix + std::to_string(i + 1) + ".csv", hists[i], &fits[i],
                          fs::path(args.input).filename().string());

  json j;
  j["source"] = fs::path(args.input).filename().string();
  j["coarse_frequency"] = args.coarse_frequency;
  j["fractional"] = args.estimate.fractional;
  j["t1"] = est.t1;
  j["t2"] = est.t2;
  j["n"] = est.n_cycles;
  j["fractional_cycles"] = est.fractional_cycles;
  j["frequency"] = est.frequency;
  j["sigma_frequency"] = est.sigma_frequency;
  j["triggers"] = hists[0].n_triggers;
  j["fits"] = {sine_to_json(fits[0]), sine_to_json(fits[1])};
  write_text(args.output, j.dump(2) + "\n");
  out << "n = " << est.n_cycles << ", f = " << fmt(est.frequency) << " Hz +- " << fmt(est.sigma_frequency)
      << " Hz -> " << args.output << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string directory;
  std::string output_directory;  // empty: <directory>/report
};

[[nodiscard]] inline std::vector<fs::path> files_with_suffix(const fs::path& dir, const std::string& suffix) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

[[nodiscard]] inline std::string stem_before(const fs::path& p, const std::string& suffix) {
  const auto name = p.filename().string();
  return name.substr(0, name.size() - suffix.size());
}

/// Aggregates `*.fit.json` into a frequency table, and copies spectra
/// (`*.spectrum.csv`), scans (`*.nsr.csv`) and pulsed results
/// (`*.pulsed.json`, `*.hist*.csv`) into figure-ready CSVs.
inline int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream&) {
  const fs::path dir(args.directory);
  if (!fs::is_directory(dir)) throw MissingInputError("run directory not found", {args.directory});
  const auto fit_files = files_with_suffix(dir, ".fit.json");
  if (fit_files.empty()) throw MissingInputError("no fit reports in " + args.directory, {"*.fit.json"});

  const fs::path outdir = args.output_directory.empty() ? dir / "report" : fs::path(args.output_directory);
  fs::create_directories(outdir);

  json table = json::array();
  std::ostringstream csv;
  csv << "# iontrap frequency table\n";
  csv << "run,label,frequency_hz,sigma_hz,fwhm_hz,sigma_fwhm_hz\n";
  for (const auto& p : fit_files) {
    const auto run = stem_before(p, ".fit.json");
    const auto j = json::parse(read_text(p));
    if (!j.contains("fits")) throw FormatError(p.string() + ": not a fit report");
    std::vector<json> rows;
    for (const auto& f : j["fits"])
      if (f.value("converged", false)) rows.push_back(f);
    std::sort(rows.begin(), rows.end(),
              [](const json& a, const json& b) { return a["center_f0"].get<double>() < b["center_f0"].get<double>(); });
    for (const auto& f : rows) {
      const std::string label = f.value("label", std::string());
      table.push_back({{"run", run},
                       {"label", label},
                       {"frequency_hz", f["center_f0"]},
                       {"sigma_hz", f["sigma_f0"]},
                       {"fwhm_hz", f["fwhm"]},
                       {"sigma_fwhm_hz", f["sigma_fwhm"]}});
      csv << run << ',' << label << ',' << fmt(f["center_f0"].get<double>()) << ','
          << fmt(f["sigma_f0"].get<double>()) << ',' << fmt(f["fwhm"].get<double>()) << ','
          << fmt(f["sigma_fwhm"].get<double>()) << '\n';
    }
  }
  write_text(outdir / "frequency_table.csv", csv.str());

  json bundle;
  bundle["frequency_table"] = table;
  std::vector<std::string> produced{"frequency_table.csv"};

  for (const auto& p : files_with_suffix(dir, ".spectrum.csv")) {
    const auto name = "fig2_" + stem_before(p, ".spectrum.csv") + ".csv";
    const auto s = read_spectrum_csv(p.string());
    std::ostringstream o;
    o << "# spectrum from " << p.filename().string() << ", 0.5-2 MHz\n";
    o << "freq_mhz,amplitude\n";
    for (std::size_t k = 0; k < s.size(); ++k)
      if (s.frequencies[k] >= 0.5e6 && s.frequencies[k] <= 2e6)
        o << fmt(s.frequencies[k] * 1e-6) << ',' << fmt(s.amplitudes[k]) << '\n';
    write_text(outdir / name, o.str());
    produced.push_back(name);
  }

  const auto nsr_files = files_with_suffix(dir, ".nsr.csv");
  if (!nsr_files.empty()) {
    std::ostringstream o;
    o << "# noise-to-signal versus correlation window\n";
    o << "run,max_lag_ms,ratio\n";
    json scans = json::array();
    for (const auto& p : nsr_files) {
      const auto t = read_csv(p.string());
      const auto run = stem_before(p, ".nsr.csv");
      for (const auto& r : t.rows) {
        o << run << ',' << fmt(r[0] * 1e3) << ',' << fmt(r[4]) << '\n';
        scans.push_back({{"run", run}, {"max_lag_s", r[0]}, {"ratio", r[4]}});
      }
    }
    write_text(outdir / "fig3_nsr.csv", o.str());
    produced.push_back("fig3_nsr.csv");
    bundle["noise_to_signal"] = scans;
  }

  json pulsed = json::array();
  for (const auto& p : files_with_suffix(dir, ".pulsed.json")) {
    auto j = json::parse(read_text(p));
    pulsed.push_back({{"run", stem_before(p, ".pulsed.json")},
                      {"t1", j["t1"]},
                      {"t2", j["t2"]},
                      {"n", j["n"]},
                      {"frequency", j["frequency"]},
                      {"sigma_frequency", j["sigma_frequency"]}});
  }
  if (!pulsed.empty()) bundle["pulsed"] = pulsed;
  for (const auto& suffix : {".hist1.csv", ".hist2.csv"}) {
    for (const auto& p : files_with_suffix(dir, suffix)) {
      const auto name = "fig4_" + p.filename().string();
      fs::copy_file(p, outdir / name, fs::copy_options::overwrite_existing);
      produced.push_back(name);
    }
  }
  std::sort(produced.begin(), produced.end());
  bundle["files"] = produced;
  write_text(outdir / "report.json", bundle.dump(2) + "\n");
  out << "report with " << table.size() << " fitted modes -> " << (outdir / "report.json").string() << '\n';
  return kExitOk;
}

}  // namespace iontrap::cli
