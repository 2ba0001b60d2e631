#pragma once

// Ion-mirror interferometer: the detected rate as a sinusoidal fringe of the
// optical path between the detected ion and the mirror.

#include <cmath>
#include <span>

#include "iontrap/error.hpp"
#include "iontrap/units.hpp"

namespace iontrap {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  [[nodiscard]] double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
  friend Vec3 operator+(Vec3 a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

enum class Configuration { self_ion1, self_ion2, mutual };

[[nodiscard]] inline const char* to_string(Configuration c) {
  switch (c) {
    case Configuration::self_ion1: return "self1";
    case Configuration::self_ion2: return "self2";
    case Configuration::mutual: return "mutual";
  }
  return "?";
}

inline constexpr double kDefaultSelfContrast = 0.35;
inline constexpr double kDefaultMutualContrast = 0.15;

struct InterferometerConfig {
  double wavelength = 493.4e-9;       // m, Ba+ 6P1/2 -> 6S1/2
  double mirror_distance_q0 = 0.30;   // m
  double contrast_nu = kDefaultSelfContrast;
  double base_rate_r0 = 5e4;          // photons/s
  int lock_slope = +1;                // +1 or -1
  Configuration configuration = Configuration::self_ion1;
  Vec3 optical_axis{1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2, 0.0};
  double axis_misalignment_z = 0.33;
  double mutual_axial_coupling = 1.0;
  double mirror_shift_pkpk = 0.0;     // Hz, 0 disables

  /// Default parameters for a configuration; mutual interference has a
  /// reduced fringe contrast.
  [[nodiscard]] static InterferometerConfig preset(Configuration c) {
    InterferometerConfig cfg;
    cfg.configuration = c;
    cfg.contrast_nu = c == Configuration::mutual ? kDefaultMutualContrast : kDefaultSelfContrast;
    return cfg;
  }

  void validate() const {
    if (!(contrast_nu >= 0.0 && contrast_nu <= 1.0))
      throw ConfigError("interferometer.contrast_nu", "fringe contrast must lie in [0, 1]");
    if (!(base_rate_r0 > 0.0)) throw ConfigError("interferometer.base_rate_r0", "base rate must be positive");
    if (!(wavelength > 0.0)) throw ConfigError("interferometer.wavelength", "wavelength must be positive");
    if (lock_slope != 1 && lock_slope != -1) throw ConfigError("interferometer.lock_slope", "must be +1 or -1");
    if (std::abs(optical_axis.norm() - 1.0) > 1e-9)
      throw ConfigError("interferometer.optical_axis", "optical axis must be a unit vector");
    if (!(std::abs(axis_misalignment_z) < 0.5))
      throw ConfigError("interferometer.axis_misalignment_z", "projection onto the trap axis must stay below 0.5");
    if (!(mirror_shift_pkpk >= 0.0))
      throw ConfigError("interferometer.mirror_shift_pkpk", "peak-to-peak shift must be non-negative");
  }

  /// 4 pi / lambda: the round trip to the mirror doubles the path change.
  [[nodiscard]] double wavenumber() const { return 2.0 * kTwoPi / wavelength; }

  /// Fringe phase offset that puts (q0, zero displacement) on the zero
  /// crossing with the configured slope.
  [[nodiscard]] double lock_phase() const {
    const double base = lock_slope > 0 ? 0.0 : kPi;
    return base - std::fmod(wavenumber() * mirror_distance_q0, kTwoPi);
  }
};

/// Path-length change seen by the interferometer for the given per-ion
/// displacements (ion 0 first).
[[nodiscard]] inline double path_projection(const InterferometerConfig& cfg,
                                            std::span<const Vec3> displacements) {
  auto self = [&](const Vec3& u) { return u.dot(cfg.optical_axis) + cfg.axis_misalignment_z * u.z; };
  switch (cfg.configuration) {
    case Configuration::self_ion1: return self(displacements[0]);
    case Configuration::self_ion2: return self(displacements[1]);
    case Configuration::mutual: {
      const Vec3& u1 = displacements[0];
      const Vec3& u2 = displacements[1];
      return 0.5 * (u1 + u2).dot(cfg.optical_axis) + 0.5 * cfg.mutual_axial_coupling * (u1.z - u2.z);
    }
  }
  return 0.0;
}

/// Sine argument relative to the lock point. The q0 term cancels against
/// the lock phase exactly, so it is dropped to keep full precision.
[[nodiscard]] inline double fringe_phase(const InterferometerConfig& cfg, double path_change) {
  return (cfg.lock_slope > 0 ? 0.0 : kPi) + cfg.wavenumber() * path_change;
}

/// R0 (1 + nu sin(4 pi / lambda * q_eff + phi_lock)), with
/// q_eff = q0 + mirror_offset + path_projection(displacements).
[[nodiscard]] inline double instantaneous_rate(const InterferometerConfig& cfg,
                                               std::span<const Vec3> displacements,
                                               double mirror_offset) {
  const double q = mirror_offset + path_projection(cfg, displacements);
  return cfg.base_rate_r0 * (1.0 + cfg.contrast_nu * std::sin(fringe_phase(cfg, q)));
}

/// Same fringe, given the total path change (mirror offset plus projected
/// displacement) directly.
[[nodiscard]] inline double rate_from_path(const InterferometerConfig& cfg, double path_change) {
  return cfg.base_rate_r0 * (1.0 + cfg.contrast_nu * std::sin(fringe_phase(cfg, path_change)));
}

/// Upper bound of instantaneous_rate, used as the thinning envelope.
[[nodiscard]] inline double peak_rate(const InterferometerConfig& cfg) {
  return cfg.base_rate_r0 * (1.0 + cfg.contrast_nu);
}

}  // namespace iontrap
