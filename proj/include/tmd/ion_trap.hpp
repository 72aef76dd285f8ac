#pragma once

// Trapped-ion realisation: two transverse centre-of-mass modes as the bosons,
// bichromatic sideband drives as the spin-boson couplings.
//   omega_a = delta_x, omega_b = delta_y, g_a = eta_x Omega_x, g_b = eta_y Omega_y
// Inputs are ordinary frequencies in kHz (angular frequency over 2 pi). The
// dimensionless model is expressed in units of delta_x, so one unit of model
// time is 1 / (2 pi delta_x).

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tmd/errors.hpp"
#include "tmd/model.hpp"

namespace tmd {

struct IonTrapParams {
  double eta_x = 0.1;
  double eta_y = 0.1;
  double rabi_x_khz = 0.0;  // peak Rabi frequency Omega_x / 2 pi
  double rabi_y_khz = 0.0;
  double delta_x_khz = 0.0;  // sideband detunings delta / 2 pi
  double delta_y_khz = 0.0;
  double spin_detuning_khz = 0.0;  // Delta / 2 pi
  int n_ions = 2;

  void validate() const {
    const auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError(std::string("IonTrapParams: ") + name + " must be positive and finite");
    };
    positive(eta_x, "eta_x");
    positive(eta_y, "eta_y");
    positive(rabi_x_khz, "rabi_x_khz");
    positive(rabi_y_khz, "rabi_y_khz");
    positive(delta_x_khz, "delta_x_khz");
    positive(delta_y_khz, "delta_y_khz");
    positive(spin_detuning_khz, "spin_detuning_khz");
    if (n_ions < 1) throw ValidationError("IonTrapParams: n_ions must be >= 1");
  }
};

struct IonTrapMapping {
  ModelParams params;
  double g_a_khz = 0.0;
  double g_b_khz = 0.0;
  double energy_unit_khz = 0.0;  // delta_x / 2 pi
  double time_unit_us = 0.0;     // microseconds per unit of model time
  std::vector<std::string> warnings;

  double physical_time_us(double t) const { return t * time_unit_us; }
};

/// Lamb-Dicke parameters above this make the first-order sideband picture doubtful.
inline constexpr double kLambDickeWarning = 0.3;

inline IonTrapMapping map_ion_trap(const IonTrapParams& ion) {
  ion.validate();
  IonTrapMapping out;
  out.g_a_khz = ion.eta_x * ion.rabi_x_khz;
  out.g_b_khz = ion.eta_y * ion.rabi_y_khz;
  out.energy_unit_khz = ion.delta_x_khz;
  out.time_unit_us = 1e3 / (2.0 * std::numbers::pi * ion.delta_x_khz);
  const double u = ion.delta_x_khz;
  out.params = {1.0, ion.delta_y_khz / u, ion.spin_detuning_khz / u, out.g_a_khz / u, out.g_b_khz / u, ion.n_ions};
  if (ion.eta_x > kLambDickeWarning) out.warnings.push_back("eta_x above 0.3: Lamb-Dicke expansion questionable");
  if (ion.eta_y > kLambDickeWarning) out.warnings.push_back("eta_y above 0.3: Lamb-Dicke expansion questionable");
  return out;
}

}  // namespace tmd
