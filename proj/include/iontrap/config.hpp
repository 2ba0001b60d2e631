#pragma once

// Run configuration: INI sections parsed into the library's value types.
// Every key is optional; missing keys keep the documented defaults, unknown
// keys are rejected by name. Numeric values accept SI-prefixed units
// ("16ns", "1.6465MHz", "493.4nm").

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iontrap/error.hpp"
#include "iontrap/interferometer.hpp"
#include "iontrap/modes.hpp"
#include "iontrap/simulator.hpp"
#include "iontrap/spectrum.hpp"
#include "iontrap/units.hpp"

namespace iontrap::config {

enum class Regime { thermal, pulsed };

struct AnalysisConfig {
  double bin_width = 16e-9;  // s
  double max_lag = 5e-3;     // s
  corr::SpectrumOptions spectrum{corr::Window::rectangular, corr::Scale::magnitude, 200e-9};
  corr::PeakOptions peaks{};
  double fit_window = 5e3;  // Hz
  std::vector<double> nsr_lags{0.25e-3, 0.5e-3, 1e-3, 2e-3, 5e-3, 10e-3};
  unsigned threads = 0;
};

struct PulsedAnalysisConfig {
  std::vector<sim::IlluminationWindow> windows{{62e-6, 12e-6}, {413e-6, 12e-6}};
  double histogram_bin = 16e-9;       // s
  double coarse_frequency = 1.6465e6;  // Hz
  double coarse_uncertainty = 0.0;    // Hz
  bool fractional = false;
  bool poisson_weighted = false;
};

struct RunConfig {
  modes::TrapConfig trap{};
  modes::ThermalAmplitudes amplitudes{};
  double mode_fwhm = 800.0;  // Hz
  InterferometerConfig interferometer{};
  sim::MirrorServoConfig mirror{};
  sim::DetectorConfig detectors{};
  Regime regime = Regime::thermal;
  double duration = 900.0;  // s
  std::uint64_t seed = 1;
  double max_events = 3e8;
  sim::PulsedProtocol pulsed{};
  PulsedAnalysisConfig pulsed_analysis{};
  AnalysisConfig analysis{};

  void validate() const {
    trap.validate();
    if (!(mode_fwhm > 0.0)) throw ConfigError("modes.fwhm", "linewidth must be positive");
    for (double a : {amplitudes.axial_common, amplitudes.axial_breathing, amplitudes.radial_common,
                     amplitudes.radial_rocking})
      if (!(a >= 0.0)) throw ConfigError("modes", "amplitudes must be non-negative");
    interferometer.validate();
    mirror.validate();
    detectors.validate();
    if (!(duration >= 0.0)) throw ConfigError("simulation.duration", "must be non-negative");
    if (!(analysis.bin_width > 0.0)) throw ConfigError("analysis.bin_width", "must be positive");
    if (!(analysis.max_lag >= analysis.bin_width))
      throw ConfigError("analysis.max_lag", "must be at least one bin");
    if (!(analysis.fit_window > 0.0)) throw ConfigError("analysis.fit_window", "must be positive");
    if (!(pulsed_analysis.histogram_bin > 0.0)) throw ConfigError("pulsed.histogram_bin", "must be positive");
    if (!(pulsed.repetition_period > 0.0)) throw ConfigError("pulsed.repetition_period", "must be positive");
  }

  [[nodiscard]] modes::ModeSet mode_set() const { return modes::compute_normal_modes(trap, amplitudes, mode_fwhm); }

  [[nodiscard]] std::uint64_t repetitions() const {
    return static_cast<std::uint64_t>(std::llround(duration / pulsed.repetition_period));
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

inline double quantity(const std::string& key, const std::string& v, std::string_view unit) {
  try {
    return parse_quantity(v, unit);
  } catch (const ConfigError& e) {
    throw ConfigError(key, e.what());
  }
}

inline std::vector<double> quantity_list(const std::string& key, const std::string& v, std::string_view unit) {
  try {
    return parse_quantity_list(v, unit);
  } catch (const ConfigError& e) {
    throw ConfigError(key, e.what());
  }
}

inline Configuration parse_configuration(const std::string& key, const std::string& v) {
  if (v == "self1" || v == "self_ion1") return Configuration::self_ion1;
  if (v == "self2" || v == "self_ion2") return Configuration::self_ion2;
  if (v == "mutual") return Configuration::mutual;
  throw ConfigError(key, "expected self1, self2 or mutual, got '" + v + "'");
}

inline modes::Axis parse_axis(const std::string& key, const std::string& v) {
  if (v == "x") return modes::Axis::x;
  if (v == "y") return modes::Axis::y;
  if (v == "z") return modes::Axis::z;
  throw ConfigError(key, "expected x, y or z, got '" + v + "'");
}

/// "start:length" pairs separated by commas, e.g. "62us:12us, 413us:12us".
inline std::vector<sim::IlluminationWindow> parse_windows(const std::string& key, const std::string& v) {
  std::vector<sim::IlluminationWindow> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (iontrap::detail::trim(item).empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError(key, "window must be written start:length");
    out.push_back({quantity(key, item.substr(0, colon), "s"), quantity(key, item.substr(colon + 1), "s")});
  }
  if (out.empty()) throw ConfigError(key, "at least one window required");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    // [trap]: frequencies in Hz, stored as rad/s.
    t["trap.freq_x"] = [](RunConfig& c, auto& k, auto& v) { c.trap.omega_x = kTwoPi * quantity(k, v, "Hz"); };
    t["trap.freq_y"] = [](RunConfig& c, auto& k, auto& v) { c.trap.omega_y = kTwoPi * quantity(k, v, "Hz"); };
    t["trap.freq_z"] = [](RunConfig& c, auto& k, auto& v) { c.trap.omega_z = kTwoPi * quantity(k, v, "Hz"); };
    t["trap.freq_rf"] = [](RunConfig& c, auto& k, auto& v) { c.trap.omega_rf = kTwoPi * quantity(k, v, "Hz"); };
    t["trap.ion_mass"] = [](RunConfig& c, auto& k, auto& v) { c.trap.ion_mass = quantity(k, v, ""); };
    t["trap.ion_count"] = [](RunConfig& c, auto& k, auto& v) { c.trap.ion_count = static_cast<int>(parse_int(k, v)); };
    t["trap.charge"] = [](RunConfig& c, auto& k, auto& v) { c.trap.charge = quantity(k, v, "C"); };
    // [modes]: per-ion rms amplitudes in m, linewidth in Hz.
    t["modes.axial_common"] = [](RunConfig& c, auto& k, auto& v) { c.amplitudes.axial_common = quantity(k, v, "m"); };
    t["modes.axial_breathing"] = [](RunConfig& c, auto& k, auto& v) { c.amplitudes.axial_breathing = quantity(k, v, "m"); };
    t["modes.radial_common"] = [](RunConfig& c, auto& k, auto& v) { c.amplitudes.radial_common = quantity(k, v, "m"); };
    t["modes.radial_rocking"] = [](RunConfig& c, auto& k, auto& v) { c.amplitudes.radial_rocking = quantity(k, v, "m"); };
    t["modes.fwhm"] = [](RunConfig& c, auto& k, auto& v) { c.mode_fwhm = quantity(k, v, "Hz"); };
    // [interferometer]
    t["interferometer.wavelength"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.wavelength = quantity(k, v, "m"); };
    t["interferometer.mirror_distance_q0"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.mirror_distance_q0 = quantity(k, v, "m"); };
    t["interferometer.contrast_nu"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.contrast_nu = quantity(k, v, ""); };
    t["interferometer.base_rate_r0"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.base_rate_r0 = quantity(k, v, "Hz"); };
    t["interferometer.lock_slope"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.lock_slope = static_cast<int>(parse_int(k, v)); };
    t["interferometer.configuration"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.configuration = parse_configuration(k, v); };
    t["interferometer.optical_axis"] = [](RunConfig& c, auto& k, auto& v) {
      const auto xs = quantity_list(k, v, "");
      if (xs.size() != 3) throw ConfigError(k, "expected three comma-separated components");
      c.interferometer.optical_axis = {xs[0], xs[1], xs[2]};
    };
    t["interferometer.axis_misalignment_z"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.axis_misalignment_z = quantity(k, v, ""); };
    t["interferometer.mutual_axial_coupling"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.mutual_axial_coupling = quantity(k, v, ""); };
    t["interferometer.mirror_shift_pkpk"] = [](RunConfig& c, auto& k, auto& v) { c.interferometer.mirror_shift_pkpk = quantity(k, v, "Hz"); };
    // [mirror]
    t["mirror.drift_rms_per_sqrt_s"] = [](RunConfig& c, auto& k, auto& v) { c.mirror.drift_rms_per_sqrt_s = quantity(k, v, "m"); };
    t["mirror.feedback_period"] = [](RunConfig& c, auto& k, auto& v) { c.mirror.feedback_period = quantity(k, v, "s"); };
    t["mirror.gain"] = [](RunConfig& c, auto& k, auto& v) { c.mirror.gain = quantity(k, v, ""); };
    t["mirror.feedback_enabled"] = [](RunConfig& c, auto& k, auto& v) { c.mirror.feedback_enabled = parse_bool(k, v); };
    t["mirror.drift_step"] = [](RunConfig& c, auto& k, auto& v) { c.mirror.drift_step = quantity(k, v, "s"); };
    // [detectors]
    t["detectors.n_detectors"] = [](RunConfig& c, auto& k, auto& v) { c.detectors.n_detectors = static_cast<int>(parse_int(k, v)); };
    t["detectors.dead_time"] = [](RunConfig& c, auto& k, auto& v) { c.detectors.dead_time = quantity(k, v, "s"); };
    t["detectors.splitting"] = [](RunConfig& c, auto& k, auto& v) { c.detectors.splitting = quantity_list(k, v, ""); };
    t["detectors.timestamp_resolution"] = [](RunConfig& c, auto& k, auto& v) { c.detectors.timestamp_resolution = quantity(k, v, "s"); };
    // [simulation]
    t["simulation.regime"] = [](RunConfig& c, auto& k, auto& v) {
      if (v == "thermal") c.regime = Regime::thermal;
      else if (v == "pulsed") c.regime = Regime::pulsed;
      else throw ConfigError(k, "expected thermal or pulsed, got '" + v + "'");
    };
    t["simulation.duration"] = [](RunConfig& c, auto& k, auto& v) { c.duration = quantity(k, v, "s"); };
    t["simulation.seed"] = [](RunConfig& c, auto& k, auto& v) {
      const auto s = parse_int(k, v);
      if (s < 0) throw ConfigError(k, "seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    };
    t["simulation.max_events"] = [](RunConfig& c, auto& k, auto& v) { c.max_events = quantity(k, v, ""); };
    // [analysis]
    t["analysis.bin_width"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.bin_width = quantity(k, v, "s"); };
    t["analysis.max_lag"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.max_lag = quantity(k, v, "s"); };
    t["analysis.window"] = [](RunConfig& c, auto& k, auto& v) {
      if (v == "rectangular") c.analysis.spectrum.window = corr::Window::rectangular;
      else if (v == "hann") c.analysis.spectrum.window = corr::Window::hann;
      else throw ConfigError(k, "expected rectangular or hann, got '" + v + "'");
    };
    t["analysis.scale"] = [](RunConfig& c, auto& k, auto& v) {
      if (v == "magnitude") c.analysis.spectrum.scale = corr::Scale::magnitude;
      else if (v == "power") c.analysis.spectrum.scale = corr::Scale::power;
      else throw ConfigError(k, "expected magnitude or power, got '" + v + "'");
    };
    t["analysis.exclude_below"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.spectrum.exclude_below = quantity(k, v, "s"); };
    t["analysis.threshold_sigma"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.peaks.threshold_sigma = quantity(k, v, ""); };
    t["analysis.noise_band_low"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.peaks.noise_band.low = quantity(k, v, "Hz"); };
    t["analysis.noise_band_high"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.peaks.noise_band.high = quantity(k, v, "Hz"); };
    t["analysis.search_low"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.peaks.search_low = quantity(k, v, "Hz"); };
    t["analysis.min_separation"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.peaks.min_separation = quantity(k, v, "Hz"); };
    t["analysis.fit_window"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.fit_window = quantity(k, v, "Hz"); };
    t["analysis.nsr_lags"] = [](RunConfig& c, auto& k, auto& v) { c.analysis.nsr_lags = quantity_list(k, v, "s"); };
    t["analysis.threads"] = [](RunConfig& c, auto& k, auto& v) {
      const auto n = parse_int(k, v);
      if (n < 0) throw ConfigError(k, "must be non-negative");
      c.analysis.threads = static_cast<unsigned>(n);
    };
    // [pulsed]
    t["pulsed.drive_frequency"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.drive_frequency = kTwoPi * quantity(k, v, "Hz"); };
    t["pulsed.drive_phase"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.drive_phase = quantity(k, v, "rad"); };
    t["pulsed.pulse_duration"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.pulse_duration = quantity(k, v, "s"); };
    t["pulsed.excited_pkpk"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.excited_pkpk = quantity(k, v, "m"); };
    t["pulsed.decay_tau"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.decay_tau = quantity(k, v, "s"); };
    t["pulsed.axis"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.axis = parse_axis(k, v); };
    t["pulsed.ion_count"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.ion_count = static_cast<int>(parse_int(k, v)); };
    t["pulsed.repetition_period"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.repetition_period = quantity(k, v, "s"); };
    t["pulsed.alternate_windows"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed.alternate_windows = parse_bool(k, v); };
    t["pulsed.windows"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed_analysis.windows = parse_windows(k, v); };
    t["pulsed.histogram_bin"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed_analysis.histogram_bin = quantity(k, v, "s"); };
    t["pulsed.coarse_frequency"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed_analysis.coarse_frequency = quantity(k, v, "Hz"); };
    t["pulsed.coarse_uncertainty"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed_analysis.coarse_uncertainty = quantity(k, v, "Hz"); };
    t["pulsed.fractional"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed_analysis.fractional = parse_bool(k, v); };
    t["pulsed.poisson_weighted"] = [](RunConfig& c, auto& k, auto& v) { c.pulsed_analysis.poisson_weighted = parse_bool(k, v); };
    return t;
  }();
  return table;
}

}  // namespace detail

/// Parses INI text. `interferometer.configuration` is applied first so an
/// omitted `contrast_nu` takes that configuration's preset.
[[nodiscard]] inline RunConfig parse_run_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }

  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(section, "key outside of a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!detail::setters().contains(full)) throw ConfigError(full, "unknown configuration key");
      entries.emplace_back(full, std::string(iontrap::detail::trim(value.data())));
    }
  }

  RunConfig cfg;
  for (const auto& [k, v] : entries)
    if (k == "interferometer.configuration")
      cfg.interferometer = InterferometerConfig::preset(detail::parse_configuration(k, v));
  for (const auto& [k, v] : entries) detail::setters().at(k)(cfg, k, v);
  cfg.validate();
  return cfg;
}

[[nodiscard]] inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  return parse_run_config(in);
}

[[nodiscard]] inline RunConfig parse_run_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

/// Key list accepted by the parser, sorted.
[[nodiscard]] inline std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::setters()) out.push_back(k);
  return out;
}

/// Deterministic JSON summary of the physical parameters, used as tag-file
/// metadata.
[[nodiscard]] inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["trap"] = {{"freq_x_hz", c.trap.omega_x / kTwoPi},
               {"freq_y_hz", c.trap.omega_y / kTwoPi},
               {"freq_z_hz", c.trap.omega_z / kTwoPi},
               {"ion_count", c.trap.ion_count}};
  j["modes"] = {{"axial_common_m", c.amplitudes.axial_common},
                {"axial_breathing_m", c.amplitudes.axial_breathing},
                {"radial_common_m", c.amplitudes.radial_common},
                {"radial_rocking_m", c.amplitudes.radial_rocking},
                {"fwhm_hz", c.mode_fwhm}};
  const auto& i = c.interferometer;
  j["interferometer"] = {{"configuration", to_string(i.configuration)},
                         {"wavelength_m", i.wavelength},
                         {"contrast_nu", i.contrast_nu},
                         {"base_rate_r0", i.base_rate_r0},
                         {"lock_slope", i.lock_slope},
                         {"optical_axis", {i.optical_axis.x, i.optical_axis.y, i.optical_axis.z}},
                         {"axis_misalignment_z", i.axis_misalignment_z},
                         {"mutual_axial_coupling", i.mutual_axial_coupling},
                         {"mirror_shift_pkpk_hz", i.mirror_shift_pkpk}};
  j["simulation"] = {{"regime", c.regime == Regime::pulsed ? "pulsed" : "thermal"},
                     {"duration_s", c.duration},
                     {"seed", c.seed}};
  if (c.regime == Regime::pulsed) {
    nlohmann::ordered_json w = nlohmann::ordered_json::array();
    for (const auto& win : c.pulsed_analysis.windows) w.push_back({win.start, win.length});
    j["pulsed"] = {{"drive_frequency_hz", c.pulsed.drive_frequency / kTwoPi},
                   {"repetition_period_s", c.pulsed.repetition_period},
                   {"windows_s", w}};
  }
  return j;
}

}  // namespace iontrap::config
