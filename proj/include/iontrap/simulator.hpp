#pragma once

// Seeded photon-stream synthesis. A thinned inhomogeneous Poisson process
// is driven by the interferometer fringe evaluated on stochastic (thermal)
// or driven (pulsed) ion trajectories, then split over detectors with
// non-paralyzable dead time and quantised to the timestamp resolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "iontrap/error.hpp"
#include "iontrap/interferometer.hpp"
#include "iontrap/modes.hpp"
#include "iontrap/time_tag.hpp"
#include "iontrap/units.hpp"

namespace iontrap::sim {

using Rng = std::mt19937_64;

struct DetectorConfig {
  int n_detectors = 2;
  double dead_time = 100e-9;          // s
  std::vector<double> splitting{0.5, 0.5};
  double timestamp_resolution = 1e-12;  // s

  void validate() const {
    if (n_detectors < 1 || n_detectors > 254)
      throw ConfigError("detectors.n_detectors", "between 1 and 254 detectors supported");
    if (static_cast<int>(splitting.size()) != n_detectors)
      throw ConfigError("detectors.splitting", "one probability per detector required");
    double sum = 0.0;
    for (double p : splitting) {
      if (!(p >= 0.0)) throw ConfigError("detectors.splitting", "probabilities must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("detectors.splitting", "probabilities must sum to 1");
    if (!(dead_time >= 0.0)) throw ConfigError("detectors.dead_time", "dead time must be non-negative");
    if (!(timestamp_resolution >= 1e-12) ||
        std::abs(timestamp_resolution * 1e12 - std::round(timestamp_resolution * 1e12)) > 1e-6)
      throw ConfigError("detectors.timestamp_resolution", "resolution must be a whole number of picoseconds");
  }
};

/// Routes accepted photons to detectors and applies dead time. Records are
/// appended in time order; same-channel records are never closer than the
/// dead time, and never share a timestamp.
class DetectorBank {
public:
  explicit DetectorBank(const DetectorConfig& cfg)
      : cumulative_(cfg.splitting.size()),
        last_(cfg.splitting.size(), 0),
        seen_(cfg.splitting.size(), false),
        dead_ps_(static_cast<std::uint64_t>(to_ps(cfg.dead_time))),
        resolution_ps_(static_cast<std::uint64_t>(to_ps(cfg.timestamp_resolution))) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.splitting.size(); ++i) {
      acc += cfg.splitting[i];
      cumulative_[i] = acc;
    }
    cumulative_.back() = 1.0;
  }

  [[nodiscard]] std::uint64_t quantise(double seconds) const {
    const auto ps = static_cast<std::uint64_t>(std::llround(seconds * 1e12));
    return resolution_ps_ == 1 ? ps : (ps + resolution_ps_ / 2) / resolution_ps_ * resolution_ps_;
  }

  /// Returns true when the photon was registered.
  bool detect(std::uint64_t ts, Rng& rng, std::vector<TimeTagRecord>& out) {
    const double u = uniform_(rng);
    std::size_t d = 0;
    while (d + 1 < cumulative_.size() && u >= cumulative_[d]) ++d;
    if (seen_[d]) {
      if (dead_ps_ > 0 && ts - last_[d] < dead_ps_) return false;
      if (ts <= last_[d]) ts = last_[d] + resolution_ps_;
    }
    if (!out.empty() && ts < out.back().timestamp_ps) ts = out.back().timestamp_ps;
    seen_[d] = true;
    last_[d] = ts;
    out.push_back({ts, static_cast<std::uint8_t>(d)});
    return true;
  }

private:
  std::vector<double> cumulative_;
  std::vector<std::uint64_t> last_;
  std::vector<bool> seen_;
  std::uint64_t dead_ps_;
  std::uint64_t resolution_ps_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Mirror drift and fringe lock

struct MirrorServoConfig {
  double drift_rms_per_sqrt_s = 493.4e-9 / 50.0;  // m / sqrt(s)
  double feedback_period = 0.1;                   // s
  double gain = 0.5;
  bool feedback_enabled = true;
  double drift_step = 1e-3;                       // s, random-walk grid

  void validate() const {
    if (!(drift_rms_per_sqrt_s >= 0.0)) throw ConfigError("mirror.drift_rms_per_sqrt_s", "must be non-negative");
    if (!(feedback_period > 0.0)) throw ConfigError("mirror.feedback_period", "must be positive");
    if (!(drift_step > 0.0)) throw ConfigError("mirror.drift_step", "must be positive");
    if (!(gain >= 0.0 && gain <= 2.0)) throw ConfigError("mirror.gain", "must lie in [0, 2]");
  }
};

/// Random-walk mirror position held on the fringe slope by a proportional
/// servo acting on the mean detected rate of each feedback period.
class MirrorLock {
public:
  MirrorLock(const MirrorServoConfig& servo, const InterferometerConfig& interferometer)
      : servo_(servo), cfg_(interferometer) {}

  [[nodiscard]] double offset() const noexcept { return offset_; }

  void drift(double dt, Rng& rng) {
    if (servo_.drift_rms_per_sqrt_s > 0.0)
      offset_ += servo_.drift_rms_per_sqrt_s * std::sqrt(dt) * normal_(rng);
  }

  /// The error signal is the fractional deviation of the measured rate from
  /// the lock-point rate R0; dividing by the fringe slope nu*k converts it to
  /// a position error.
  void feedback(double mean_rate) {
    if (!servo_.feedback_enabled || cfg_.contrast_nu <= 0.0) return;
    const double error = mean_rate / cfg_.base_rate_r0 - 1.0;
    offset_ -= servo_.gain * cfg_.lock_slope * error / (cfg_.contrast_nu * cfg_.wavenumber());
  }

private:
  MirrorServoConfig servo_;
  InterferometerConfig cfg_;
  double offset_ = 0.0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct MirrorLockTrace {
  std::vector<double> times;         // end of each feedback period, s
  std::vector<double> offsets;       // mirror offset after correction, m
  std::vector<double> window_rates;  // measured mean rate in the period, 1/s
};

/// Closed-loop mirror lock with the ions at rest: photon counts per drift
/// step are Poisson with the fringe rate at the current offset.
[[nodiscard]] inline MirrorLockTrace simulate_mirror_lock(const InterferometerConfig& cfg,
                                                          const MirrorServoConfig& servo,
                                                          double duration, std::uint64_t seed) {
  cfg.validate();
  servo.validate();
  Rng rng(seed);
  MirrorLock lock(servo, cfg);
  MirrorLockTrace trace;
  const auto steps_per_period =
      std::max<long>(1, std::lround(servo.feedback_period / servo.drift_step));
  const double step = servo.feedback_period / static_cast<double>(steps_per_period);
  const auto periods = static_cast<long>(std::floor(duration / servo.feedback_period));
  const std::array<Vec3, 2> rest{};
  for (long p = 0; p < periods; ++p) {
    std::uint64_t counts = 0;
    for (long s = 0; s < steps_per_period; ++s) {
      const double rate = instantaneous_rate(cfg, rest, lock.offset());
      counts += std::poisson_distribution<std::uint64_t>(rate * step)(rng);
      lock.drift(step, rng);
    }
    const double mean_rate = static_cast<double>(counts) / servo.feedback_period;
    lock.feedback(mean_rate);
    trace.times.push_back(static_cast<double>(p + 1) * servo.feedback_period);
    trace.offsets.push_back(lock.offset());
    trace.window_rates.push_back(mean_rate);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Mirror-induced level shift

/// Frequency shift of every mode caused by the mirror-modified excited
/// state. The shift follows the fringe with a pi/2 phase offset, so at the
/// lock point (sine zero crossing) it sits at its extremum, whose sign is the
/// fringe slope: +pkpk/2 on the rising slope, -pkpk/2 on the falling one.
[[nodiscard]] inline modes::ModeSet apply_mirror_frequency_shift(modes::ModeSet set,
                                                                 const InterferometerConfig& cfg) {
  if (!(cfg.mirror_shift_pkpk >= 0.0))
    throw ConfigError("interferometer.mirror_shift_pkpk", "peak-to-peak shift must be non-negative");
  const double shift_hz = 0.5 * cfg.mirror_shift_pkpk * std::cos(fringe_phase(cfg, 0.0));
  for (auto& m : set.modes) m.frequency += kTwoPi * shift_hz;
  return set;
}

// ---------------------------------------------------------------------------
// Continuous (thermal) regime

struct ThermalRunConfig {
  double duration = 900.0;  // s
  std::uint64_t seed = 1;
  MirrorServoConfig mirror{};
  double max_events = 3e8;  // budget on duration * R0 * (1 + nu)
};

struct SimulationResult {
  TagStream stream;
  std::vector<std::string> warnings;
  std::vector<double> mirror_offsets;  // after each feedback period
};

namespace detail {

inline Vec3 axis_vector(modes::Axis a) {
  switch (a) {
    case modes::Axis::x: return {1.0, 0.0, 0.0};
    case modes::Axis::y: return {0.0, 1.0, 0.0};
    case modes::Axis::z: return {0.0, 0.0, 1.0};
  }
  return {};
}

// Interferometer path change per metre of mode coordinate. path_projection
// is linear in the displacements, so each mode contributes independently.
inline double mode_path_coefficient(const InterferometerConfig& cfg, const modes::Mode& m) {
  std::array<Vec3, 2> u{};
  const Vec3 dir = axis_vector(m.axis);
  for (std::size_t i = 0; i < m.mode_vector.size() && i < u.size(); ++i) u[i] = m.ion_weight(i) * dir;
  return path_projection(cfg, std::span<const Vec3>(u.data(), u.size()));
}

// One thermal mode: X(t) = a(t) cos(w t) - b(t) sin(w t) with a, b
// independent Ornstein-Uhlenbeck quadratures of correlation time tau_c.
// Then <X(t) X(t+tau)> = rms^2 exp(-tau/tau_c) cos(w tau); tau_c =
// 1/(pi FWHM) makes the spectral line a Lorentzian of the configured FWHM.
struct ThermalOscillator {
  double omega;
  double inv_tau_c;
  double rms;
  double coefficient;
  double a;
  double b;
};

inline void check_configuration(const InterferometerConfig& cfg, std::size_t ion_count) {
  const bool needs_two = cfg.configuration != Configuration::self_ion1;
  if (needs_two && ion_count < 2)
    throw ConfigError("interferometer.configuration", std::string(to_string(cfg.configuration)) + " requires two ions");
}

}  // namespace detail

[[nodiscard]] inline SimulationResult simulate_thermal_stream(const modes::TrapConfig& trap,
                                                              const modes::ModeSet& modes,
                                                              const InterferometerConfig& interferometer,
                                                              const DetectorConfig& detectors,
                                                              const ThermalRunConfig& run) {
  trap.validate();
  interferometer.validate();
  detectors.validate();
  run.mirror.validate();
  if (!(run.duration > 0.0)) throw PreconditionError("simulation duration must be positive");
  if (modes.ion_count() != static_cast<std::size_t>(trap.ion_count))
    throw PreconditionError("mode set does not match the trap's ion count");
  detail::check_configuration(interferometer, modes.ion_count());

  const double lambda_max = peak_rate(interferometer);
  const double expected = run.duration * lambda_max;
  if (expected > run.max_events)
    throw CapacityError("requested " + std::to_string(expected) + " candidate events exceeds budget of " +
                        std::to_string(run.max_events));

  const modes::ModeSet shifted = interferometer.mirror_shift_pkpk > 0.0
                                     ? apply_mirror_frequency_shift(modes, interferometer)
                                     : modes;

  Rng rng(run.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::exponential_distribution<double> gap(lambda_max);

  std::vector<detail::ThermalOscillator> osc;
  for (const auto& m : shifted.modes) {
    const double c = detail::mode_path_coefficient(interferometer, m);
    if (c == 0.0 || m.rms_amplitude == 0.0) continue;
    osc.push_back({m.frequency, kPi * m.coherence_fwhm, m.rms_amplitude, c, m.rms_amplitude * normal(rng),
                   m.rms_amplitude * normal(rng)});
  }

  SimulationResult result;
  result.stream.channel_count = static_cast<std::uint8_t>(detectors.n_detectors);
  result.stream.acquisition_span_ps = static_cast<std::uint64_t>(to_ps(run.duration));
  result.stream.records.reserve(static_cast<std::size_t>(run.duration * interferometer.base_rate_r0 * 1.02) + 16);
  DetectorBank bank(detectors);
  MirrorLock lock(run.mirror, interferometer);

  double next_drift = run.mirror.drift_step;
  double next_feedback = run.mirror.feedback_period;
  std::uint64_t window_counts = 0;
  double t = 0.0;
  double t_prev = 0.0;

  for (;;) {
    t += gap(rng);
    if (t >= run.duration) break;

    // Servo events strictly before this candidate, in time order.
    while (std::min(next_drift, next_feedback) <= t) {
      if (next_drift <= next_feedback) {
        lock.drift(run.mirror.drift_step, rng);
        next_drift += run.mirror.drift_step;
      } else {
        lock.feedback(static_cast<double>(window_counts) / run.mirror.feedback_period);
        result.mirror_offsets.push_back(lock.offset());
        window_counts = 0;
        next_feedback += run.mirror.feedback_period;
      }
    }

    const double dt = t - t_prev;
    t_prev = t;
    double path = lock.offset();
    for (auto& o : osc) {
      const double rho = std::exp(-dt * o.inv_tau_c);
      const double kick = o.rms * std::sqrt(std::max(0.0, 1.0 - rho * rho));
      o.a = o.a * rho + kick * normal(rng);
      o.b = o.b * rho + kick * normal(rng);
      double phase = o.omega * t;
      phase -= kTwoPi * std::floor(phase / kTwoPi);
      path += o.coefficient * (o.a * std::cos(phase) - o.b * std::sin(phase));
    }
    const double rate = rate_from_path(interferometer, path);
    if (uniform(rng) * lambda_max < rate) {
      if (bank.detect(bank.quantise(t), rng, result.stream.records)) ++window_counts;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Pulsed (phase-sensitive) regime

/// Resonant RF excitation of one motional mode followed by free, damped
/// oscillation: x(t) = a(t) cos(w t + phi). a(t) grows linearly during the
/// pulse to excited_pkpk/2 and then decays as exp(-(t - T_pulse)/decay_tau).
struct PulsedProtocol {
  double drive_frequency = kTwoPi * 1.6465e6;  // rad/s
  double drive_phase = 0.0;                    // rad
  double pulse_duration = 50e-6;               // s
  double excited_pkpk = 100e-9;                // m
  double decay_tau = 0.85e-3;                  // s; <= 0 or inf disables decay
  modes::Axis axis = modes::Axis::x;
  int ion_count = 1;
  double repetition_period = 1e-3;             // s
  bool alternate_windows = true;               // one window per repetition, cycling

  [[nodiscard]] double amplitude(double t) const {
    const double peak = 0.5 * excited_pkpk;
    if (t < 0.0) return 0.0;
    if (t < pulse_duration) return peak * t / pulse_duration;
    if (!(decay_tau > 0.0) || std::isinf(decay_tau)) return peak;
    return peak * std::exp(-(t - pulse_duration) / decay_tau);
  }

  [[nodiscard]] double displacement(double t) const {
    return amplitude(t) * std::cos(drive_frequency * t + drive_phase);
  }
};

struct IlluminationWindow {
  double start = 0.0;   // s after the trigger
  double length = 0.0;  // s
};

[[nodiscard]] inline SimulationResult simulate_pulsed_stream(const PulsedProtocol& protocol,
                                                             std::vector<IlluminationWindow> windows,
                                                             std::uint64_t repetitions,
                                                             const InterferometerConfig& interferometer,
                                                             const DetectorConfig& detectors,
                                                             std::uint64_t seed) {
  interferometer.validate();
  detectors.validate();
  if (protocol.ion_count != 1 && protocol.ion_count != 2)
    throw ConfigError("pulsed.ion_count", "only 1 or 2 ions are supported");
  detail::check_configuration(interferometer, static_cast<std::size_t>(protocol.ion_count));
  if (!(protocol.repetition_period > 0.0)) throw ConfigError("pulsed.repetition_period", "must be positive");
  if (windows.empty()) throw PreconditionError("at least one illumination window required");

  SimulationResult result;
  std::sort(windows.begin(), windows.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (!(w.start >= 0.0) || !(w.length > 0.0) || w.start + w.length > protocol.repetition_period)
      throw PreconditionError("illumination window must lie inside one repetition period");
    if (i > 0 && windows[i - 1].start + windows[i - 1].length > w.start)
      throw PreconditionError("illumination windows overlap");
    if (w.start < protocol.pulse_duration)
      result.warnings.push_back("window starting at " + std::to_string(w.start) + " s overlaps the drive pulse");
  }

  std::array<Vec3, 2> pattern{};
  const Vec3 dir = detail::axis_vector(protocol.axis);
  for (int i = 0; i < protocol.ion_count; ++i) pattern[static_cast<std::size_t>(i)] = dir;
  const double coefficient = path_projection(interferometer, std::span<const Vec3>(pattern.data(), 2));

  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double lambda_max = peak_rate(interferometer);
  std::exponential_distribution<double> gap(lambda_max);
  DetectorBank bank(detectors);
  const auto period_ps = static_cast<std::uint64_t>(to_ps(protocol.repetition_period));

  result.stream.channel_count = static_cast<std::uint8_t>(detectors.n_detectors);
  result.stream.acquisition_span_ps = period_ps * repetitions;
  auto& out = result.stream.records;

  for (std::uint64_t r = 0; r < repetitions; ++r) {
    const std::uint64_t trigger = r * period_ps;
    out.push_back({trigger, kTriggerChannel});
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
      if (protocol.alternate_windows && wi != r % windows.size()) continue;
      const auto& w = windows[wi];
      double t = w.start;
      for (;;) {
        t += gap(rng);
        if (t >= w.start + w.length) break;
        const double path = coefficient * protocol.displacement(t);
        const double rate = rate_from_path(interferometer, path);
        if (uniform(rng) * lambda_max < rate) bank.detect(trigger + bank.quantise(t), rng, out);
      }
    }
  }
  return result;
}

}  // namespace iontrap::sim
