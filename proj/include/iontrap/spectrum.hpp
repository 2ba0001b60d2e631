#pragma once

// Motional power spectra from correlation histograms, peak candidates and
// the noise-to-signal scan over the correlation window.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "iontrap/correlator.hpp"
#include "iontrap/error.hpp"
#include "iontrap/units.hpp"

namespace iontrap::corr {

enum class Window { rectangular, hann };
enum class Scale { magnitude, power };

[[nodiscard]] inline const char* to_string(Window w) { return w == Window::hann ? "hann" : "rectangular"; }
[[nodiscard]] inline const char* to_string(Scale s) { return s == Scale::power ? "power" : "magnitude"; }

struct SpectrumOptions {
  Window window = Window::rectangular;
  Scale scale = Scale::magnitude;
  /// Bins whose lag centre lies below this are replaced by the mean before
  /// the transform (sub-dead-time lags carry detector artefacts).
  double exclude_below = 0.0;
};

struct PowerSpectrum {
  std::vector<double> frequencies;  // Hz, 0 .. 1/(2 bin) in steps of 1/max_lag
  std::vector<double> amplitudes;
  /// Real-valued cosine transform before taking the magnitude. Noise on it
  /// is zero-mean, so line shapes fitted to it are not rectified.
  std::vector<double> transform;
  double resolution = 0.0;          // Hz
  SpectrumOptions options{};

  [[nodiscard]] std::size_t size() const { return amplitudes.size(); }
  [[nodiscard]] double nyquist() const { return frequencies.empty() ? 0.0 : frequencies.back(); }

  /// Index of the grid point nearest to f.
  [[nodiscard]] std::size_t index_of(double f) const {
    const double j = std::round(f / resolution);
    return static_cast<std::size_t>(std::clamp(j, 0.0, static_cast<double>(size() - 1)));
  }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Forward real DFT of y via FFTW.
inline std::vector<std::complex<double>> real_dft(const std::vector<double>& y) {
  const int n = static_cast<int>(y.size());
  const std::size_t bins = y.size() / 2 + 1;
  double* in = fftw_alloc_real(y.size());
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  std::copy(y.begin(), y.end(), in);
  fftw_execute(plan);
  std::vector<std::complex<double>> result(bins);
  for (std::size_t j = 0; j < bins; ++j) result[j] = {out[j][0], out[j][1]};
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return result;
}

/// Mean-subtracted, windowed histogram samples (the one-sided half of the
/// even correlation function).
inline std::vector<double> prepared_samples(const CorrelationHistogram& hist, const SpectrumOptions& opt) {
  const std::size_t m = hist.counts.size();
  const double max_lag = static_cast<double>(m) * hist.bin_width();
  std::size_t first = 0;
  while (first < m && hist.lag_center(first) < opt.exclude_below) ++first;
  double mean = 0.0;
  if (first < m) {
    for (std::size_t k = first; k < m; ++k) mean += static_cast<double>(hist.counts[k]);
    mean /= static_cast<double>(m - first);
  }
  std::vector<double> y(m, 0.0);
  for (std::size_t k = first; k < m; ++k) {
    double v = static_cast<double>(hist.counts[k]) - mean;
    if (opt.window == Window::hann) {
      // Hann window of the two-sided function over [-max_lag, max_lag].
      const double c = std::cos(kPi * hist.lag_center(k) / (2.0 * max_lag));
      v *= c * c;
    }
    y[k] = v;
  }
  return y;
}

}  // namespace detail

/// Fourier transform of g2(tau). The histogram holds the positive-lag half
/// of an even function sampled at bin centres (k + 1/2) * bin, so the
/// transform is the real cosine series
///     C(f_j) = 2 * sum_k y_k cos(2 pi f_j (k + 1/2) bin),  f_j = j / max_lag,
/// evaluated as 2 Re(exp(-i pi j / M) * DFT_M(y)_j). The spectrum is |C| (or
/// C^2); for an exp(-pi*FWHM*tau) cos(2 pi f0 tau) component it is a
/// Lorentzian of that FWHM centred on f0.
[[nodiscard]] inline PowerSpectrum power_spectrum(const CorrelationHistogram& hist, SpectrumOptions options = {}) {
  if (hist.counts.size() < 2) throw PreconditionError("histogram must have at least two bins");
  const std::size_t m = hist.counts.size();
  const auto y = detail::prepared_samples(hist, options);
  const auto dft = detail::real_dft(y);

  PowerSpectrum s;
  s.options = options;
  s.resolution = 1.0 / (static_cast<double>(m) * hist.bin_width());
  s.frequencies.resize(dft.size());
  s.amplitudes.resize(dft.size());
  s.transform.resize(dft.size());
  for (std::size_t j = 0; j < dft.size(); ++j) {
    const double shift = -kPi * static_cast<double>(j) / static_cast<double>(m);
    const double c = 2.0 * (dft[j] * std::polar(1.0, shift)).real();
    s.frequencies[j] = static_cast<double>(j) * s.resolution;
    s.transform[j] = c;
    s.amplitudes[j] = options.scale == Scale::power ? c * c : std::abs(c);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Peak candidates

struct Band {
  double low = 0.0;
  double high = 0.0;

  [[nodiscard]] bool contains(double f) const { return f >= low && f <= high; }
};

struct PeakOptions {
  double threshold_sigma = 5.0;
  Band noise_band{2e6, 3e6};
  double search_low = 50e3;   // Hz; the drift/feedback structure lives below
  double search_high = std::numeric_limits<double>::infinity();
  double min_separation = 2e3;  // Hz
  double mask_half_width = 5e3;  // Hz, masked around peaks found inside the noise band
};

struct PeakCandidate {
  double frequency = 0.0;
  double amplitude = 0.0;
};

struct PeakSearch {
  std::vector<PeakCandidate> peaks;  // amplitude descending
  double noise_mean = 0.0;
  double noise_std = 0.0;
  double threshold = 0.0;
  bool noise_band_masked = false;
};

namespace detail {

inline void band_stats(const PowerSpectrum& s, const Band& band, const std::vector<Band>& masks, double& mean,
                       double& sd) {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t j = s.index_of(band.low); j < s.size() && s.frequencies[j] <= band.high; ++j) {
    const double f = s.frequencies[j];
    if (f < band.low) continue;
    if (std::any_of(masks.begin(), masks.end(), [&](const Band& b) { return b.contains(f); })) continue;
    sum += s.amplitudes[j];
    sum2 += s.amplitudes[j] * s.amplitudes[j];
    ++n;
  }
  if (n < 2) throw PreconditionError("noise band holds fewer than two spectrum points");
  mean = sum / static_cast<double>(n);
  sd = std::sqrt(std::max(0.0, (sum2 - sum * mean) / static_cast<double>(n - 1)));
}

}  // namespace detail

/// Local maxima above mean + k*std of the noise band. A candidate must be
/// resolved: both neighbours exceed mean + (k/2)*std, which rejects
/// single-bin noise spikes. Candidates closer than min_separation to a
/// stronger one are dropped. If a candidate falls inside the noise band,
/// the band statistics are recomputed with that region masked.
[[nodiscard]] inline PeakSearch detect_peaks(const PowerSpectrum& s, const PeakOptions& opt = {}) {
  if (s.size() < 3) throw PreconditionError("spectrum too short for peak search");
  if (!(opt.noise_band.low >= 0.0) || !(opt.noise_band.high <= s.nyquist()) ||
      !(opt.noise_band.low < opt.noise_band.high))
    throw PreconditionError("noise band must lie within the spectrum range");

  PeakSearch out;
  std::vector<Band> masks;
  std::vector<PeakCandidate> candidates;
  for (int pass = 0; pass < 2; ++pass) {
    detail::band_stats(s, opt.noise_band, masks, out.noise_mean, out.noise_std);
    out.threshold = out.noise_mean + opt.threshold_sigma * out.noise_std;
    const double support = out.noise_mean + 0.5 * opt.threshold_sigma * out.noise_std;
    candidates.clear();
    for (std::size_t j = 1; j + 1 < s.size(); ++j) {
      const double f = s.frequencies[j];
      if (f < opt.search_low || f > opt.search_high) continue;
      const double a = s.amplitudes[j];
      if (!(a > out.threshold) || !(a > s.amplitudes[j - 1]) || !(a >= s.amplitudes[j + 1])) continue;
      if (!(s.amplitudes[j - 1] > support) || !(s.amplitudes[j + 1] > support)) continue;
      candidates.push_back({f, a});
    }
    if (pass == 1) break;
    bool in_band = false;
    for (const auto& c : candidates) {
      if (opt.noise_band.contains(c.frequency)) {
        masks.push_back({c.frequency - opt.mask_half_width, c.frequency + opt.mask_half_width});
        in_band = true;
      }
    }
    if (!in_band) break;
    out.noise_band_masked = true;
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.amplitude > b.amplitude; });
  for (const auto& c : candidates) {
    const bool clear = std::none_of(out.peaks.begin(), out.peaks.end(), [&](const PeakCandidate& p) {
      return std::abs(p.frequency - c.frequency) < opt.min_separation;
    });
    if (clear) out.peaks.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise-to-signal versus correlation window

struct NoiseToSignalRow {
  double max_lag = 0.0;           // s
  double signal = 0.0;            // highest spectrum amplitude above search_low
  double signal_frequency = 0.0;  // Hz
  double noise = 0.0;             // std of amplitudes in the noise band
  double ratio = 0.0;             // noise / signal
};

struct NoiseToSignalReport {
  std::vector<NoiseToSignalRow> rows;

  [[nodiscard]] const NoiseToSignalRow& best() const {
    return *std::min_element(rows.begin(), rows.end(),
                             [](const auto& a, const auto& b) { return a.ratio < b.ratio; });
  }
};

struct NoiseToSignalOptions {
  SpectrumOptions spectrum{};
  Band noise_band{2e6, 3e6};
  double search_low = 50e3;
  CorrelatorOptions correlator{};
};

/// Signal and noise of one spectrum, as used by the scan.
[[nodiscard]] inline NoiseToSignalRow noise_to_signal(const PowerSpectrum& s, double max_lag,
                                                      const NoiseToSignalOptions& opt) {
  NoiseToSignalRow row;
  row.max_lag = max_lag;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.frequencies[j] < opt.search_low) continue;
    if (s.amplitudes[j] > row.signal) {
      row.signal = s.amplitudes[j];
      row.signal_frequency = s.frequencies[j];
    }
  }
  double mean = 0.0;
  detail::band_stats(s, opt.noise_band, {}, mean, row.noise);
  row.ratio = row.signal > 0.0 ? row.noise / row.signal : std::numeric_limits<double>::infinity();
  return row;
}

/// Recomputes histogram and spectrum for every max lag. One histogram at
/// the largest lag is computed; a shorter window whose length is a whole
/// number of bins is exactly its prefix, other lags are recomputed.
[[nodiscard]] inline NoiseToSignalReport noise_to_signal_scan(const TagStream& stream,
                                                              std::vector<double> max_lags, double bin_width,
                                                              const NoiseToSignalOptions& opt = {}) {
  if (max_lags.empty()) throw PreconditionError("no correlation windows given");
  for (double l : max_lags)
    if (!(l >= 10.0 * bin_width)) throw PreconditionError("every max lag must span at least 10 bins");

  const auto ts = photon_timestamps(stream);
  const auto bin_ps = static_cast<std::uint64_t>(to_ps(bin_width));
  const double longest = *std::max_element(max_lags.begin(), max_lags.end());
  auto full = correlation_histogram_ps(ts, bin_ps, static_cast<std::uint64_t>(to_ps(longest)), opt.correlator);
  if (stream.acquisition_span_ps > 0) full.acquisition_span_ps = stream.acquisition_span_ps;

  NoiseToSignalReport report;
  for (double lag : max_lags) {
    const auto lag_ps = static_cast<std::uint64_t>(to_ps(lag));
    CorrelationHistogram h;
    if (lag_ps % bin_ps == 0) {
      h = full;
      h.max_lag_ps = lag_ps;
      h.counts.resize(static_cast<std::size_t>(lag_ps / bin_ps));
    } else {
      h = correlation_histogram_ps(ts, bin_ps, lag_ps, opt.correlator);
    }
    report.rows.push_back(noise_to_signal(power_spectrum(h, opt.spectrum), lag, opt));
  }
  return report;
}

}  // namespace iontrap::corr
