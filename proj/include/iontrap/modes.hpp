#pragma once

// Normal modes of a one- or two-ion chain in a linear Paul trap, in the
// harmonic approximation with equal ion masses.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "iontrap/error.hpp"
#include "iontrap/units.hpp"

namespace iontrap::modes {

enum class Axis { x, y, z };
enum class Character { single, common, breathing, rocking };

[[nodiscard]] inline const char* to_string(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

[[nodiscard]] inline const char* to_string(Character c) {
  switch (c) {
    case Character::single: return "single";
    case Character::common: return "common";
    case Character::breathing: return "breathing";
    case Character::rocking: return "rocking";
  }
  return "?";
}

/// Secular frequencies of a single ion plus chain metadata. All angular
/// frequencies in rad/s; omega_rf is carried along but never used.
struct TrapConfig {
  double omega_x = kTwoPi * 1.665117e6;
  double omega_y = kTwoPi * 1.698637e6;
  double omega_z = kTwoPi * 0.711429e6;
  double omega_rf = kTwoPi * 15e6;
  double ion_mass = kBa138Mass;
  int ion_count = 2;
  double charge = kElementaryCharge;

  void validate() const {
    if (!(omega_x > 0.0) || !(omega_y > 0.0) || !(omega_z > 0.0))
      throw ConfigError("trap.freq", "secular frequencies must be positive");
    if (ion_count != 1 && ion_count != 2)
      throw ConfigError("trap.ion_count", "only 1 or 2 ions are supported");
    if (!(ion_mass > 0.0)) throw ConfigError("trap.ion_mass", "mass must be positive");
    if (!(charge > 0.0)) throw ConfigError("trap.charge", "charge must be positive");
    if (!(omega_z < omega_x) || !(omega_z < omega_y))
      throw StabilityError("linear chain requires omega_z below both radial frequencies");
  }
};

/// Per-ion rms thermal displacement for each kind of mode. A single ion's
/// axial mode uses `axial_common`, its radial modes `radial_common`.
/// Defaults are the quoted peak-to-peak amplitudes (80 nm axial centre of
/// mass, 40 nm otherwise) divided by 2*sqrt(2).
struct ThermalAmplitudes {
  double axial_common = 80e-9 / (2.0 * std::numbers::sqrt2);
  double axial_breathing = 40e-9 / (2.0 * std::numbers::sqrt2);
  double radial_common = 40e-9 / (2.0 * std::numbers::sqrt2);
  double radial_rocking = 40e-9 / (2.0 * std::numbers::sqrt2);

  [[nodiscard]] double for_mode(Axis axis, Character c) const {
    const bool axial = axis == Axis::z;
    switch (c) {
      case Character::single:
      case Character::common: return axial ? axial_common : radial_common;
      case Character::breathing: return axial_breathing;
      case Character::rocking: return radial_rocking;
    }
    return 0.0;
  }
};

struct Mode {
  double frequency = 0.0;  // rad/s
  Axis axis = Axis::x;
  Character character = Character::single;
  std::vector<double> mode_vector;  // unit norm, one entry per ion
  double rms_amplitude = 0.0;       // m, per ion
  double coherence_fwhm = 800.0;    // Hz

  [[nodiscard]] double frequency_hz() const { return frequency / kTwoPi; }

  /// Short label in the usual table notation: x1/y1/z1 for single-ion and
  /// common modes, z2 for breathing, x2/y2 for rocking.
  [[nodiscard]] std::string label() const {
    const bool second = character == Character::breathing || character == Character::rocking;
    return std::string(to_string(axis)) + (second ? "2" : "1");
  }

  /// Displacement of ion `ion` per unit mode coordinate, scaled so that
  /// each participating ion has rms displacement `rms_amplitude`.
  [[nodiscard]] double ion_weight(std::size_t ion) const {
    return mode_vector[ion] * std::sqrt(static_cast<double>(mode_vector.size()));
  }
};

struct ModeSet {
  std::vector<Mode> modes;
  double equilibrium_separation = 0.0;  // m

  [[nodiscard]] std::size_t ion_count() const {
    return modes.empty() ? 0 : modes.front().mode_vector.size();
  }

  [[nodiscard]] const Mode& find(Axis axis, Character c) const {
    for (const auto& m : modes)
      if (m.axis == axis && m.character == c) return m;
    throw PreconditionError(std::string("no ") + to_string(c) + " mode on axis " + to_string(axis));
  }

  [[nodiscard]] const Mode* find_label(const std::string& label) const {
    for (const auto& m : modes)
      if (m.label() == label) return &m;
    return nullptr;
  }
};

/// Two-ion Coulomb equilibrium spacing, d = (q^2 / (2 pi eps0 M wz^2))^(1/3).
/// Zero for a single ion.
[[nodiscard]] inline double equilibrium_separation(const TrapConfig& trap) {
  if (trap.ion_count == 1) return 0.0;
  const double q2 = trap.charge * trap.charge;
  return std::cbrt(q2 / (kTwoPi * kVacuumPermittivity * trap.ion_mass * trap.omega_z * trap.omega_z));
}

[[nodiscard]] inline ModeSet compute_normal_modes(const TrapConfig& trap,
                                                  const ThermalAmplitudes& amplitudes = {},
                                                  double fwhm_hz = 800.0) {
  trap.validate();
  if (!(fwhm_hz > 0.0)) throw ConfigError("modes.fwhm", "linewidth must be positive");

  ModeSet set;
  auto add = [&](double omega, Axis axis, Character c, std::vector<double> vec) {
    Mode m;
    m.frequency = omega;
    m.axis = axis;
    m.character = c;
    m.mode_vector = std::move(vec);
    m.rms_amplitude = amplitudes.for_mode(axis, c);
    m.coherence_fwhm = fwhm_hz;
    set.modes.push_back(std::move(m));
  };

  if (trap.ion_count == 1) {
    add(trap.omega_x, Axis::x, Character::single, {1.0});
    add(trap.omega_y, Axis::y, Character::single, {1.0});
    add(trap.omega_z, Axis::z, Character::single, {1.0});
    return set;
  }

  const double wz2 = trap.omega_z * trap.omega_z;
  const double rx2 = trap.omega_x * trap.omega_x - wz2;
  const double ry2 = trap.omega_y * trap.omega_y - wz2;
  if (!(rx2 > 0.0) || !(ry2 > 0.0))
    throw StabilityError("radial rocking frequency is imaginary (omega_radial <= omega_z)");

  const double h = 1.0 / std::numbers::sqrt2;
  add(trap.omega_z, Axis::z, Character::common, {h, h});
  add(std::numbers::sqrt3 * trap.omega_z, Axis::z, Character::breathing, {h, -h});
  add(trap.omega_x, Axis::x, Character::common, {h, h});
  add(trap.omega_y, Axis::y, Character::common, {h, h});
  add(std::sqrt(rx2), Axis::x, Character::rocking, {h, -h});
  add(std::sqrt(ry2), Axis::y, Character::rocking, {h, -h});
  set.equilibrium_separation = equilibrium_separation(trap);
  return set;
}

}  // namespace iontrap::modes
