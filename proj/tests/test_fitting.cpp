#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "iontrap/fitting.hpp"

using namespace iontrap;
using namespace iontrap::fit;

namespace {

double lorentzian(double f, double f0, double fwhm, double a, double b) {
  const double h = 0.5 * fwhm;
  return a * h * h / ((f - f0) * (f - f0) + h * h) + b;
}

corr::PowerSpectrum grid_spectrum(double resolution, std::size_t n, const std::function<double(double)>& g) {
  corr::PowerSpectrum s;
  s.resolution = resolution;
  for (std::size_t j = 0; j < n; ++j) {
    const double f = static_cast<double>(j) * resolution;
    s.frequencies.push_back(f);
    const double v = g(f);
    s.transform.push_back(v);
    s.amplitudes.push_back(std::abs(v));
  }
  return s;
}

// Triggered histogram with counts sampled from g at the bin centres.
TriggeredHistogram sampled(double offset, double length, double bin, const std::function<double(double)>& g) {
  TriggeredHistogram h;
  h.offset_ps = static_cast<std::uint64_t>(to_ps(offset));
  h.bin_ps = static_cast<std::uint64_t>(to_ps(bin));
  h.n_triggers = 1;
  h.counts.resize(static_cast<std::size_t>(std::llround(length / bin)));
  for (std::size_t k = 0; k < h.counts.size(); ++k)
    h.counts[k] = static_cast<std::uint64_t>(std::llround(g(h.bin_center(k))));
  return h;
}

}  // namespace

TEST(WrapPhase, Range) {
  EXPECT_DOUBLE_EQ(wrap_phase(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_phase(-kPi), kPi);
  EXPECT_NEAR(wrap_phase(3.0 * kTwoPi + 0.5), 0.5, 1e-12);
  EXPECT_NEAR(wrap_phase(-0.5 - kTwoPi), -0.5, 1e-12);
  for (double x = -50.0; x < 50.0; x += 0.37) {
    const double w = wrap_phase(x);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
  }
}

// ---------------------------------------------------------------------------
// Lorentzian

TEST(Lorentzian, NoiselessRecoveryOnTheGrid) {
  const double f0 = 1.665212e6, fwhm = 800.0;
  const auto s = grid_spectrum(200.0, 10000, [&](double f) { return lorentzian(f, f0, fwhm, 3e5, 1e3); });
  const auto r = fit_lorentzian(s, 1.6652e6);
  EXPECT_NEAR(r.center_f0, f0, 1e-6 * f0);
  EXPECT_NEAR(r.fwhm, fwhm, 1e-6 * fwhm);
  EXPECT_NEAR(r.amplitude, 3e5, 1e-3);
  EXPECT_NEAR(r.offset, 1e3, 1e-3);
  EXPECT_TRUE(r.converged);
  EXPECT_FALSE(r.amplitude_clamped);
  EXPECT_NEAR(r.window_low, 1.6628e6, 1e-6);
  EXPECT_NEAR(r.window_high, 1.6676e6, 1e-6);
}

TEST(Lorentzian, AmplitudeDataOptionAndTransformFallback) {
  const double f0 = 711429.0;
  auto s = grid_spectrum(200.0, 5000, [&](double f) { return lorentzian(f, f0, 800.0, 1.0, 0.0); });
  LorentzianOptions opt;
  opt.data = FitData::amplitudes;
  EXPECT_NEAR(fit_lorentzian(s, f0, 5e3, opt).center_f0, f0, 1e-3);
  s.transform.clear();
  EXPECT_NEAR(fit_lorentzian(s, f0).center_f0, f0, 1e-3);
  opt.data = FitData::transform;
  EXPECT_THROW((void)fit_lorentzian(s, f0, 5e3, opt), PreconditionError);
}

TEST(Lorentzian, Preconditions) {
  const auto s = grid_spectrum(200.0, 100, [](double) { return 1.0; });
  EXPECT_THROW((void)fit_lorentzian(s, 1e3, 1000.0), PreconditionError);  // 6 points
  EXPECT_THROW((void)fit_lorentzian(s, 1e9), PreconditionError);
  EXPECT_THROW((void)fit_lorentzian(s, -1.0), PreconditionError);
}

TEST(Lorentzian, DipIsNeverReturnedWithNegativeAmplitude) {
  const auto s = grid_spectrum(200.0, 5000, [](double f) { return 10.0 - lorentzian(f, 5e5, 800.0, 5.0, 0.0); });
  try {
    const auto r = fit_lorentzian(s, 5e5);
    EXPECT_GE(r.amplitude, 0.0);
    EXPECT_TRUE(r.amplitude_clamped);
  } catch (const FitError& e) {
    EXPECT_EQ(e.last_iterate().size(), 4u);
  }
}

TEST(Lorentzian, UnbiasedWithHonestUncertainties) {
  const double f0 = 1.5054e6 + 37.0, fwhm = 800.0;
  std::vector<double> centres, sigmas;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto s = grid_spectrum(200.0, 8000, [&](double f) { return lorentzian(f, f0, fwhm, 10.0, 0.0) + noise(rng); });
    const auto r = fit_lorentzian(s, 1.5054e6);
    centres.push_back(r.center_f0);
    sigmas.push_back(r.sigma_f0);
  }
  const double n = static_cast<double>(centres.size());
  const double mean = std::accumulate(centres.begin(), centres.end(), 0.0) / n;
  const double mean_sigma = std::accumulate(sigmas.begin(), sigmas.end(), 0.0) / n;
  double var = 0.0;
  for (double c : centres) var += (c - mean) * (c - mean);
  const double scatter = std::sqrt(var / (n - 1.0));
  EXPECT_LT(std::abs(mean - f0), 0.3 * mean_sigma);
  EXPECT_LT(scatter, 1.5 * mean_sigma);
  EXPECT_GT(scatter, mean_sigma / 1.5);
}

// ---------------------------------------------------------------------------
// Triggered histograms

TEST(TriggeredHistogram, SingleTriggerExample) {
  TagStream s;
  s.records = {{0, kTriggerChannel}, {1'000'000, 0}, {2'000'000, 1}, {3'000'000, 0}};
  const auto h = triggered_histogram(s, {0.0, 5e-6}, 1e-6);
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{0, 1, 1, 1, 0}));
  EXPECT_EQ(h.n_triggers, 1u);
}

TEST(TriggeredHistogram, InterleavedSequencesAdd) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::uint64_t> jitter(0, 20'000'000);
  TagStream a, b, both;
  for (std::uint64_t r = 0; r < 50; ++r) {
    const std::uint64_t ta = r * 100'000'000, tb = ta + 50'000'000;
    a.records.push_back({ta, kTriggerChannel});
    b.records.push_back({tb, kTriggerChannel});
    for (int i = 0; i < 20; ++i) {
      a.records.push_back({ta + jitter(rng), 0});
      b.records.push_back({tb + jitter(rng), 0});
    }
  }
  for (auto* s : {&a, &b}) {
    std::sort(s->records.begin(), s->records.end());
    both.records.insert(both.records.end(), s->records.begin(), s->records.end());
  }
  std::sort(both.records.begin(), both.records.end());
  const TriggerWindow w{2e-6, 15e-6};
  const auto ha = triggered_histogram(a, w, 100e-9);
  const auto hb = triggered_histogram(b, w, 100e-9);
  const auto hab = triggered_histogram(both, w, 100e-9);
  ASSERT_EQ(hab.counts.size(), ha.counts.size());
  for (std::size_t k = 0; k < hab.counts.size(); ++k) EXPECT_EQ(hab.counts[k], ha.counts[k] + hb.counts[k]);
  EXPECT_EQ(hab.n_triggers, 100u);
}

TEST(TriggeredHistogram, EarlyPhotonsCountedAndErrors) {
  TagStream s;
  s.records = {{5, 0}, {6, 1}, {10, kTriggerChannel}, {20, 0}};
  EXPECT_EQ(triggered_histogram(s, {0.0, 1e-9}, 1e-12).photons_before_first_trigger, 2u);
  TagStream none;
  none.records = {{1, 0}};
  EXPECT_THROW((void)triggered_histogram(none, {0.0, 1e-6}, 1e-9), PreconditionError);
  TagStream unsorted;
  unsorted.records = {{10, kTriggerChannel}, {5, 0}};
  EXPECT_THROW((void)triggered_histogram(unsorted, {0.0, 1e-6}, 1e-9), OrderingError);
  EXPECT_THROW((void)triggered_histogram(s, {0.0, 1e-6}, 0.0), PreconditionError);
}

// ---------------------------------------------------------------------------
// Sine fits

TEST(Sine, NoiselessPhaseRecovery) {
  const double f = 1.6465e6, phi = 0.7, t0 = 62e-6;
  const auto h = sampled(t0, 12e-6, 16e-9, [&](double t) { return 1e9 + 1e8 * std::sin(kTwoPi * f * (t - t0) + phi); });
  const auto r = fit_sine(h, 1.64e6);
  EXPECT_NEAR(r.phase, phi, 1e-6);
  EXPECT_NEAR(r.frequency, f, 1e-2);
  EXPECT_NEAR(r.amplitude, 1e8, 1.0);
  EXPECT_NEAR(r.offset, 1e9, 1.0);
  EXPECT_GE(r.reference_time, r.window_start);
  EXPECT_LE(r.reference_time, r.window_end);
  // Rising zero crossing: phase zero at the reference time.
  EXPECT_NEAR(wrap_phase(kTwoPi * f * (r.reference_time - t0) + phi), 0.0, 1e-6);
}

TEST(Sine, NegativeAmplitudeIsFolded) {
  const double f = 1.6465e6, t0 = 0.0;
  const auto h = sampled(t0, 5e-6, 16e-9, [&](double t) { return 1e6 - 1e5 * std::sin(kTwoPi * f * t + 2.5); });
  const auto r = fit_sine(h, f);
  EXPECT_GT(r.amplitude, 0.0);
  EXPECT_NEAR(r.phase, wrap_phase(2.5 + kPi), 1e-5);
}

TEST(Sine, OnePeriodShiftMovesReferenceByOnePeriod) {
  const double period = 608e-9;  // 38 bins of 16 ns
  const double f = 1.0 / period;
  auto g = [&](double t) { return 1e9 + 2e8 * std::sin(kTwoPi * f * t + 1.1); };
  const auto a = fit_sine(sampled(62e-6, 12e-6, 16e-9, g), 1.65e6);
  const auto b = fit_sine(sampled(62e-6 + period, 12e-6, 16e-9, g), 1.65e6);
  EXPECT_NEAR(b.reference_time - a.reference_time, period, 1e-13);
  EXPECT_NEAR(a.phase, b.phase, 1e-6);
}

TEST(Sine, Preconditions) {
  const auto h = sampled(0.0, 1e-6, 16e-9, [](double) { return 10.0; });
  EXPECT_THROW((void)fit_sine(h, 1.6465e6), PreconditionError);  // < 3 periods
  EXPECT_THROW((void)fit_sine(h, -1.0), PreconditionError);
  const auto flat = sampled(0.0, 12e-6, 16e-9, [](double) { return 10.0; });
  EXPECT_THROW((void)fit_sine(flat, 1.6465e6), NoOscillationError);
}

TEST(Sine, PoissonWeightsOnCleanDataAgree) {
  const double f = 1.6465e6;
  const auto h = sampled(62e-6, 12e-6, 16e-9, [&](double t) { return 1e8 + 1e7 * std::sin(kTwoPi * f * (t - 62e-6) + 0.3); });
  SineFitOptions opt;
  opt.poisson_weighted = true;
  EXPECT_NEAR(fit_sine(h, f, opt).phase, 0.3, 1e-5);
}

// ---------------------------------------------------------------------------
// Cycle counting

TEST(PhaseFrequency, GoldenPulsedArithmetic) {
  const auto e = phase_frequency_estimate(62.484e-6, 5e-9, 413.528e-6, 8e-9, 1.6465e6);
  EXPECT_EQ(e.n_cycles, 578);
  EXPECT_NEAR(e.frequency, 1.64652e6, 5.0);
  EXPECT_NEAR(e.frequency, 578.0 / 351.044e-6, 1e-6);
  EXPECT_NEAR(e.sigma_frequency, 44.0, 1.0);
  EXPECT_EQ(e.fractional_cycles, 0.0);
}

TEST(PhaseFrequency, AmbiguityNamesRequiredAccuracy) {
  // Coarse frequency 0.4 cycles off over the interval, margin 0.1 cycle.
  const double dt = 351.044e-6;
  try {
    (void)phase_frequency_estimate(0.0, 1e-9, dt, 1e-9, (578.4) / dt, 1000.0);
    FAIL() << "expected AmbiguityError";
  } catch (const AmbiguityError& e) {
    EXPECT_NEAR(e.required_accuracy_hz(), 0.1 / dt, 1e-3);
  }
  EXPECT_NO_THROW((void)phase_frequency_estimate(0.0, 1e-9, dt, 1e-9, 578.4 / dt, 100.0));
  EXPECT_THROW((void)phase_frequency_estimate(1.0, 0.0, 0.5, 0.0, 1e6), PreconditionError);
  EXPECT_THROW((void)phase_frequency_estimate(0.0, 0.0, 1e-7, 0.0, 1e6), AmbiguityError);  // n = 0
}

TEST(PhaseFrequency, WholeCycleIntervalRecoversTruth) {
  const double f = 1.6465e6, t1 = 62e-6, t2 = t1 + 578.0 / f;
  auto g = [&](double t) { return 1e9 + 1e8 * std::sin(kTwoPi * f * t + 0.4); };
  const auto a = fit_sine(sampled(t1, 12e-6, 16e-9, g), 1.6465e6);
  const auto b = fit_sine(sampled(t2, 12e-6, 16e-9, g), 1.6465e6);
  const auto e = phase_frequency_estimate(a, b, 1.6465e6);
  EXPECT_EQ(e.n_cycles, 578);
  EXPECT_NEAR(e.frequency, f, 0.01);

  // Windows not a whole number of cycles apart: only the fractional form is exact.
  const auto c = fit_sine(sampled(t2 + 100e-9, 12e-6, 16e-9, g), 1.6465e6);
  PhaseFrequencyOptions frac;
  frac.fractional = true;
  const auto ef = phase_frequency_estimate(a, c, 1.6465e6, frac);
  EXPECT_NEAR(ef.frequency, f, 0.05);
  EXPECT_NEAR(ef.n_cycles + ef.fractional_cycles, f * (t2 + 100e-9 - t1), 1e-4);
  EXPECT_NEAR(phase_frequency_estimate(a, c, 1.6465e6).frequency, f, 0.05);
}
