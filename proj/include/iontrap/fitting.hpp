#pragma once

// Quantitative estimates: Lorentzian line centres and widths from spectra,
// and, for the pulsed regime, sine fits of trigger-referenced arrival
// histograms combined by counting whole oscillation cycles between two
// equal-phase instants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "iontrap/error.hpp"
#include "iontrap/least_squares.hpp"
#include "iontrap/spectrum.hpp"
#include "iontrap/time_tag.hpp"
#include "iontrap/units.hpp"

namespace iontrap::fit {

/// Maps an angle into (-pi, pi].
[[nodiscard]] inline double wrap_phase(double phi) {
  phi = std::fmod(phi, kTwoPi);
  if (phi <= -kPi) phi += kTwoPi;
  if (phi > kPi) phi -= kTwoPi;
  return phi;
}

// ---------------------------------------------------------------------------
// Lorentzian line fits

struct LorentzianFit {
  double center_f0 = 0.0;  // Hz
  double fwhm = 0.0;       // Hz
  double amplitude = 0.0;
  double offset = 0.0;
  double sigma_f0 = 0.0;
  double sigma_fwhm = 0.0;
  double sigma_amplitude = 0.0;
  double sigma_offset = 0.0;
  double residual_norm = 0.0;  // rms residual / amplitude
  double window_low = 0.0;
  double window_high = 0.0;
  int iterations = 0;
  bool converged = false;
  bool amplitude_clamped = false;
};

/// Which spectrum values the line shape is fitted to. `automatic` uses the
/// signed transform when the spectrum carries one, else the amplitudes.
enum class FitData { automatic, amplitudes, transform };

struct LorentzianOptions {
  int max_iterations = 200;
  double relative_step = 1e-8;
  FitData data = FitData::automatic;
};

/// L(f) = A (G/2)^2 / ((f - f0)^2 + (G/2)^2) + B, parameters (f0, G, A, B).
struct LorentzianModel {
  double operator()(double f, const Params<4>& p, Params<4>& g) const {
    const double d = f - p[0];
    const double h = 0.5 * p[1];
    const double h2 = h * h;
    const double den = d * d + h2;
    const double shape = h2 / den;
    g[0] = p[2] * h2 * 2.0 * d / (den * den);
    g[1] = p[2] * h * d * d / (den * den);
    g[2] = shape;
    g[3] = 1.0;
    return p[2] * shape + p[3];
  }
};

/// Least-squares Lorentzian over the spectrum points within +-window/2 of
/// `center_guess`. Starts from A = max - min, B = min, f0 = argmax (lowest
/// frequency on ties), FWHM = window / 5.
///
/// By default the signed transform is fitted. Taking the magnitude folds the
/// noise into a positive floor that swallows the line wings, so weak lines
/// come out too narrow.
[[nodiscard]] inline LorentzianFit fit_lorentzian(const corr::PowerSpectrum& spectrum, double center_guess,
                                                  double window = 5e3, const LorentzianOptions& options = {}) {
  if (!(center_guess >= 0.0) || !(center_guess <= spectrum.nyquist()))
    throw PreconditionError("centre guess outside the spectrum range");
  const double lo = center_guess - 0.5 * window;
  const double hi = center_guess + 0.5 * window;
  const bool has_transform = spectrum.transform.size() == spectrum.size();
  if (options.data == FitData::transform && !has_transform)
    throw PreconditionError("spectrum carries no signed transform");
  const auto& values =
      options.data == FitData::amplitudes || !has_transform ? spectrum.amplitudes : spectrum.transform;
  std::vector<double> fx, fy;
  for (std::size_t j = spectrum.index_of(lo); j < spectrum.size() && spectrum.frequencies[j] <= hi; ++j) {
    if (spectrum.frequencies[j] < lo) continue;
    fx.push_back(spectrum.frequencies[j]);
    fy.push_back(values[j]);
  }
  if (fx.size() < 8) throw PreconditionError("fit window holds fewer than 8 spectrum points");

  const auto [min_it, max_it] = std::minmax_element(fy.begin(), fy.end());
  Params<4> p0{fx[static_cast<std::size_t>(max_it - fy.begin())], window / 5.0, *max_it - *min_it, *min_it};

  LmOptions<4> lm;
  lm.max_iterations = options.max_iterations;
  lm.relative_step = options.relative_step;
  const double yscale = std::max(std::abs(*max_it), std::abs(*min_it));
  lm.typical = {std::max(std::abs(center_guess), window), window, yscale, yscale};

  auto result = levenberg_marquardt<4>(LorentzianModel{}, fx, fy, {}, p0, lm);
  bool clamped = false;
  if (result.params[2] < 0.0) {
    lm.lower[2] = 0.0;
    result = levenberg_marquardt<4>(LorentzianModel{}, fx, fy, {}, p0, lm);
    clamped = true;
  }
  const std::vector<double> last(result.params.begin(), result.params.end());
  if (!result.converged) throw FitError("Lorentzian fit did not converge", last);

  LorentzianFit out;
  out.center_f0 = result.params[0];
  out.fwhm = std::abs(result.params[1]);
  out.amplitude = result.params[2];
  out.offset = result.params[3];
  out.sigma_f0 = result.sigma(0);
  out.sigma_fwhm = result.sigma(1);
  out.sigma_amplitude = result.sigma(2);
  out.sigma_offset = result.sigma(3);
  out.window_low = fx.front();
  out.window_high = fx.back();
  out.iterations = result.iterations;
  out.converged = true;
  out.amplitude_clamped = clamped;
  const double rms = std::sqrt(result.ssr / static_cast<double>(fx.size()));
  out.residual_norm = out.amplitude > 0.0 ? rms / out.amplitude : std::numeric_limits<double>::infinity();
  if (out.center_f0 < lo || out.center_f0 > hi) throw FitError("fitted centre left the fit window", last);
  if (!(out.fwhm > 0.0)) throw FitError("fitted width is zero", last);
  return out;
}

// ---------------------------------------------------------------------------
// Trigger-referenced arrival histograms

struct TriggerWindow {
  double offset = 0.0;  // s after each trigger
  double length = 0.0;  // s
};

struct TriggeredHistogram {
  std::uint64_t offset_ps = 0;
  std::uint64_t bin_ps = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t n_triggers = 0;
  std::uint64_t photons_before_first_trigger = 0;

  [[nodiscard]] double offset() const { return static_cast<double>(offset_ps) * kPicosecond; }
  [[nodiscard]] double bin() const { return static_cast<double>(bin_ps) * kPicosecond; }
  [[nodiscard]] double length() const { return static_cast<double>(counts.size()) * bin(); }
  /// Time after the trigger at the centre of bin k, in seconds.
  [[nodiscard]] double bin_center(std::size_t k) const {
    return (static_cast<double>(offset_ps) + (static_cast<double>(k) + 0.5) * static_cast<double>(bin_ps)) *
           kPicosecond;
  }
};

/// Histogram of photon arrival times t - t_trigger within [offset, offset +
/// length), summed over all triggers. Each trigger opens its own window, so
/// the result is additive over triggers.
[[nodiscard]] inline TriggeredHistogram triggered_histogram(const TagStream& stream, const TriggerWindow& window,
                                                            double bin) {
  if (!(bin > 0.0) || !(window.length > 0.0) || !(window.offset >= 0.0))
    throw PreconditionError("histogram window and bin must be positive");
  TriggeredHistogram h;
  h.offset_ps = static_cast<std::uint64_t>(to_ps(window.offset));
  h.bin_ps = static_cast<std::uint64_t>(to_ps(bin));
  if (h.bin_ps == 0) throw PreconditionError("bin must be at least 1 ps");
  const auto length_ps = static_cast<std::uint64_t>(to_ps(window.length));
  h.counts.assign(static_cast<std::size_t>((length_ps + h.bin_ps - 1) / h.bin_ps), 0);

  std::vector<std::uint64_t> triggers;
  std::vector<std::uint64_t> photons;
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < stream.records.size(); ++i) {
    const auto& r = stream.records[i];
    if (i > 0 && r.timestamp_ps < last) throw OrderingError("time tags not sorted at record " + std::to_string(i));
    last = r.timestamp_ps;
    if (r.is_trigger()) triggers.push_back(r.timestamp_ps);
    else if (triggers.empty()) ++h.photons_before_first_trigger;
    else photons.push_back(r.timestamp_ps);
  }
  if (triggers.empty()) throw PreconditionError("stream contains no trigger records");
  h.n_triggers = triggers.size();

  for (const auto trig : triggers) {
    const std::uint64_t begin = trig + h.offset_ps;
    const std::uint64_t end = begin + length_ps;
    for (auto it = std::lower_bound(photons.begin(), photons.end(), begin); it != photons.end() && *it < end; ++it)
      ++h.counts[static_cast<std::size_t>((*it - begin) / h.bin_ps)];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Sine fits and cycle counting

struct SineFit {
  double amplitude = 0.0;  // counts per bin
  double phase = 0.0;      // rad in (-pi, pi], at the window start
  double offset = 0.0;     // counts per bin
  double frequency = 0.0;  // Hz
  double reference_time = 0.0;  // s, earliest rising zero crossing in the window
  double sigma_amplitude = 0.0;
  double sigma_phase = 0.0;
  double sigma_offset = 0.0;
  double sigma_frequency = 0.0;
  double sigma_reference_time = 0.0;
  double window_start = 0.0;  // s
  double window_end = 0.0;    // s
  double residual_norm = 0.0;
  int iterations = 0;
};

struct SineFitOptions {
  bool poisson_weighted = false;  // weights 1 / max(count, 1)
  double frequency_tolerance = 0.05;
};

/// C + A sin(2 pi f u + psi) in local time u = t - t_centre, parameters
/// (C, A, f, psi).
struct SineModel {
  double operator()(double u, const Params<4>& p, Params<4>& g) const {
    const double arg = kTwoPi * p[2] * u + p[3];
    const double s = std::sin(arg);
    const double c = std::cos(arg);
    g[0] = 1.0;
    g[1] = s;
    g[2] = p[1] * c * kTwoPi * u;
    g[3] = p[1] * c;
    return p[0] + p[1] * s;
  }
};

/// Fits C + A sin(2 pi f (t - t_start) + phi) to a triggered histogram with
/// f free within +-5 % of the guess. The start point comes from a linear
/// least-squares scan over trial frequencies.
[[nodiscard]] inline SineFit fit_sine(const TriggeredHistogram& hist, double frequency_guess,
                                      const SineFitOptions& options = {}) {
  const double t0 = hist.offset();
  const double span = hist.length();
  if (!(frequency_guess > 0.0) || span * frequency_guess < 3.0)
    throw PreconditionError("histogram window must span at least three periods");
  const double tc = t0 + 0.5 * span;

  const std::size_t n = hist.counts.size();
  std::vector<double> u(n), y(n), w;
  for (std::size_t k = 0; k < n; ++k) {
    u[k] = hist.bin_center(k) - tc;
    y[k] = static_cast<double>(hist.counts[k]);
  }
  if (options.poisson_weighted) {
    w.resize(n);
    for (std::size_t k = 0; k < n; ++k) w[k] = 1.0 / std::max(y[k], 1.0);
  }

  // At fixed f the model is linear in (C, a, b) for C + a sin + b cos.
  struct Linear {
    Eigen::Vector3d c;
    double ssr;
    double sigma_amplitude;
  };
  auto linear_fit = [&](double f) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (std::size_t k = 0; k < n; ++k) {
      const double wk = w.empty() ? 1.0 : w[k];
      const Eigen::Vector3d row(1.0, std::sin(kTwoPi * f * u[k]), std::cos(kTwoPi * f * u[k]));
      a.noalias() += wk * row * row.transpose();
      b.noalias() += wk * y[k] * row;
    }
    Linear out{a.ldlt().solve(b), 0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
      const double r = y[k] - out.c(0) - out.c(1) * std::sin(kTwoPi * f * u[k]) -
                       out.c(2) * std::cos(kTwoPi * f * u[k]);
      out.ssr += (w.empty() ? 1.0 : w[k]) * r * r;
    }
    const Eigen::Matrix3d cov = a.inverse() * (out.ssr / static_cast<double>(n - 3));
    const double amp = std::hypot(out.c(1), out.c(2));
    if (amp > 0.0) {
      const Eigen::Vector2d dir(out.c(1) / amp, out.c(2) / amp);
      out.sigma_amplitude = std::sqrt(std::max(0.0, dir.dot(cov.block<2, 2>(1, 1) * dir)));
    }
    return out;
  };

  // Detection at the guessed frequency, before the free-frequency search can
  // latch onto a noise fluctuation.
  {
    const auto at_guess = linear_fit(frequency_guess);
    const double amp = std::hypot(at_guess.c(1), at_guess.c(2));
    // The second test catches flat data whose residuals are pure round-off.
    if (!(amp > 2.0 * at_guess.sigma_amplitude) || !(amp > 1e-9 * std::max(1.0, std::abs(at_guess.c(0)))))
      throw NoOscillationError("amplitude at the guessed frequency is consistent with zero at 2 sigma");
  }

  const double f_lo = frequency_guess * (1.0 - options.frequency_tolerance);
  const double f_hi = frequency_guess * (1.0 + options.frequency_tolerance);
  const double df = 0.1 / span;
  double best_ssr = std::numeric_limits<double>::infinity();
  Params<4> p0{};
  for (double f = f_lo; f <= f_hi; f += df) {
    const auto lin = linear_fit(f);
    if (lin.ssr < best_ssr) {
      best_ssr = lin.ssr;
      p0 = {lin.c(0), std::hypot(lin.c(1), lin.c(2)), f, std::atan2(lin.c(2), lin.c(1))};
    }
  }

  LmOptions<4> lm;
  const double yscale = std::max(1.0, std::abs(p0[0]));
  lm.typical = {yscale, yscale, frequency_guess, 1.0};
  auto res = levenberg_marquardt<4>(SineModel{}, u, y, w, p0, lm);
  const std::vector<double> last(res.params.begin(), res.params.end());
  if (!res.converged) throw FitError("sine fit did not converge", last);

  double amp = res.params[1];
  double psi = res.params[3];
  if (amp < 0.0) {
    amp = -amp;
    psi += kPi;
  }
  const double f = res.params[2];
  if (f < f_lo || f > f_hi) throw FitError("fitted frequency left the +-5% search range", last);

  SineFit out;
  out.amplitude = amp;
  out.offset = res.params[0];
  out.frequency = f;
  out.sigma_offset = res.sigma(0);
  out.sigma_amplitude = res.sigma(1);
  out.sigma_frequency = res.sigma(2);
  out.window_start = t0;
  out.window_end = t0 + span;
  out.iterations = res.iterations;
  out.residual_norm = std::sqrt(res.ssr / static_cast<double>(n)) / std::max(amp, 1e-300);
  if (!(amp > 2.0 * out.sigma_amplitude))
    throw NoOscillationError("fitted amplitude is consistent with zero at 2 sigma");

  const double var_f = res.covariance(2, 2);
  const double var_psi = res.covariance(3, 3);
  const double cov_fpsi = res.covariance(2, 3);

  // Phase at the window start: psi + 2 pi f (t0 - tc).
  const double lever0 = kTwoPi * (t0 - tc);
  out.phase = wrap_phase(psi + f * lever0);
  out.sigma_phase = std::sqrt(std::max(0.0, var_psi + lever0 * lever0 * var_f + 2.0 * lever0 * cov_fpsi));

  // Rising zero crossings at u_m = (2 pi m - psi) / (2 pi f); take the first
  // one at or after the window start.
  const double m = std::ceil((kTwoPi * f * (t0 - tc) + psi) / kTwoPi);
  double u_ref = (kTwoPi * m - psi) / (kTwoPi * f);
  if (tc + u_ref < t0) u_ref += 1.0 / f;
  out.reference_time = tc + u_ref;
  const double du_dpsi = -1.0 / (kTwoPi * f);
  const double du_df = -u_ref / f;
  out.sigma_reference_time = std::sqrt(std::max(
      0.0, du_dpsi * du_dpsi * var_psi + du_df * du_df * var_f + 2.0 * du_dpsi * du_df * cov_fpsi));
  return out;
}

struct PhaseFrequencyEstimate {
  double t1 = 0.0;  // s
  double t2 = 0.0;  // s
  long n_cycles = 0;
  double fractional_cycles = 0.0;  // delta phi / 2 pi, zero for equal-phase references
  double frequency = 0.0;          // Hz
  double sigma_frequency = 0.0;    // Hz
};

struct PhaseFrequencyOptions {
  /// Use the fitted phases at the two window starts and add the fractional
  /// cycle delta phi / 2 pi, instead of the equal-phase zero crossings.
  bool fractional = false;
  /// 1 sigma uncertainty of the coarse frequency, Hz. The cycle count is
  /// rejected as ambiguous if this could move it across a half cycle.
  double coarse_uncertainty = 0.0;
};

/// Frequency from two equal-phase instants t1 < t2 separated by a whole
/// number of cycles n = round(f_coarse (t2 - t1)): f = n / (t2 - t1), with
/// sigma_f = n sqrt(s1^2 + s2^2) / (t2 - t1)^2.
[[nodiscard]] inline PhaseFrequencyEstimate phase_frequency_estimate(double t1, double sigma_t1, double t2,
                                                                     double sigma_t2, double coarse_frequency,
                                                                     double coarse_uncertainty = 0.0) {
  if (!(t2 > t1)) throw PreconditionError("second reference time must follow the first");
  if (!(coarse_frequency > 0.0)) throw PreconditionError("coarse frequency must be positive");
  const double dt = t2 - t1;
  const double x = coarse_frequency * dt;
  const double n = std::round(x);
  const double margin = 0.5 - std::abs(x - n);
  if (!(coarse_uncertainty * dt < margin) || n < 1.0)
    throw AmbiguityError("cycle count ambiguous: coarse frequency must be accurate to better than " +
                             std::to_string(std::max(margin, 0.0) / dt) + " Hz",
                         std::max(margin, 0.0) / dt);
  PhaseFrequencyEstimate e;
  e.t1 = t1;
  e.t2 = t2;
  e.n_cycles = static_cast<long>(n);
  e.frequency = n / dt;
  e.sigma_frequency = n * std::sqrt(sigma_t1 * sigma_t1 + sigma_t2 * sigma_t2) / (dt * dt);
  return e;
}

[[nodiscard]] inline PhaseFrequencyEstimate phase_frequency_estimate(const SineFit& fit1, const SineFit& fit2,
                                                                     double coarse_frequency,
                                                                     const PhaseFrequencyOptions& options = {}) {
  if (!options.fractional)
    return phase_frequency_estimate(fit1.reference_time, fit1.sigma_reference_time, fit2.reference_time,
                                    fit2.sigma_reference_time, coarse_frequency, options.coarse_uncertainty);

  const double t1 = fit1.window_start;
  const double t2 = fit2.window_start;
  if (!(t2 > t1)) throw PreconditionError("second window must follow the first");
  const double dt = t2 - t1;
  const double frac = wrap_phase(fit2.phase - fit1.phase) / kTwoPi;
  const double x = coarse_frequency * dt - frac;
  const double n = std::round(x);
  const double margin = 0.5 - std::abs(x - n);
  if (!(options.coarse_uncertainty * dt < margin) || n < 1.0)
    throw AmbiguityError("cycle count ambiguous: coarse frequency must be accurate to better than " +
                             std::to_string(std::max(margin, 0.0) / dt) + " Hz",
                         std::max(margin, 0.0) / dt);
  PhaseFrequencyEstimate e;
  e.t1 = t1;
  e.t2 = t2;
  e.n_cycles = static_cast<long>(n);
  e.fractional_cycles = frac;
  e.frequency = (n + frac) / dt;
  e.sigma_frequency =
      std::sqrt(fit1.sigma_phase * fit1.sigma_phase + fit2.sigma_phase * fit2.sigma_phase) / (kTwoPi * dt);
  return e;
}

}  // namespace iontrap::fit
