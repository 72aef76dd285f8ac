#pragma once

// Mean-field limit of the two-mode Dicke model: classical Hamiltonian and
// Hamilton equations in X = (Q, q_a, q_b, P, p_a, p_b), linear stability of
// the stationary point X = 0, the normal-phase quadratic form and the
// superradiant order parameters.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "tmd/errors.hpp"
#include "tmd/fotoc.hpp"
#include "tmd/model.hpp"

namespace tmd {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

struct ClassicalState {
  double Q = 0.0, q_a = 0.0, q_b = 0.0;
  double P = 0.0, p_a = 0.0, p_b = 0.0;

  /// Q^2 + P^2, bounded by 4 on the spin sphere.
  double spin_radius2() const { return Q * Q + P * P; }

  Vector6 to_vector() const {
    Vector6 x;
    x << Q, q_a, q_b, P, p_a, p_b;
    return x;
  }

  static ClassicalState from_vector(const Vector6& x) { return {x(0), x(1), x(2), x(3), x(4), x(5)}; }
};

namespace detail {

inline double spin_factor(const ClassicalState& x, bool strict) {
  const double r2 = x.spin_radius2();
  if (r2 > 4.0 || (strict && r2 >= 4.0))
    throw std::domain_error("classical state outside the spin sphere (Q^2 + P^2 = " + std::to_string(r2) + ")");
  return std::sqrt(1.0 - r2 / 4.0);
}

}  // namespace detail

inline double classical_hamiltonian(const ModelParams& p, const ClassicalState& x) {
  const double s = detail::spin_factor(x, false);
  return 0.5 * p.omega_a * (x.q_a * x.q_a + x.p_a * x.p_a) + 0.5 * p.omega_b * (x.q_b * x.q_b + x.p_b * x.p_b) +
         0.5 * p.delta * x.spin_radius2() + 2.0 * p.g_a * s * x.q_a * x.Q + 2.0 * p.g_b * s * x.p_b * x.P -
         0.5 * p.delta;
}

/// dX/dt: dq/dt = dH/dp, dp/dt = -dH/dq for each canonical pair.
inline Vector6 equations_of_motion(const ModelParams& p, const ClassicalState& x) {
  const double s = detail::spin_factor(x, true);
  const double coupling = 2.0 * p.g_a * x.q_a * x.Q + 2.0 * p.g_b * x.p_b * x.P;
  const double dh_dQ = p.delta * x.Q + 2.0 * p.g_a * s * x.q_a - coupling * x.Q / (4.0 * s);
  const double dh_dP = p.delta * x.P + 2.0 * p.g_b * s * x.p_b - coupling * x.P / (4.0 * s);
  const double dh_dqa = p.omega_a * x.q_a + 2.0 * p.g_a * s * x.Q;
  const double dh_dpa = p.omega_a * x.p_a;
  const double dh_dqb = p.omega_b * x.q_b;
  const double dh_dpb = p.omega_b * x.p_b + 2.0 * p.g_b * s * x.P;
  Vector6 f;
  f << dh_dP, dh_dpa, dh_dpb, -dh_dQ, -dh_dqa, -dh_dqb;
  return f;
}

/// Central-difference Jacobian of the equations of motion.
inline Matrix6 numerical_jacobian(const ModelParams& p, const ClassicalState& x, double h = 1e-5) {
  Matrix6 j;
  const Vector6 x0 = x.to_vector();
  for (int k = 0; k < 6; ++k) {
    Vector6 xp = x0, xm = x0;
    xp(k) += h;
    xm(k) -= h;
    j.col(k) = (equations_of_motion(p, ClassicalState::from_vector(xp)) -
                equations_of_motion(p, ClassicalState::from_vector(xm))) /
               (2.0 * h);
  }
  return j;
}

/// Analytic Jacobian at X = 0.
inline Matrix6 origin_jacobian_matrix(const ModelParams& p) {
  const double d = p.delta, wa = p.omega_a, wb = p.omega_b, ga2 = 2.0 * p.g_a, gb2 = 2.0 * p.g_b;
  Matrix6 a;
  a << 0, 0, 0, d, 0, gb2,   //
      0, 0, 0, 0, wa, 0,     //
      0, 0, 0, gb2, 0, wb,   //
      -d, -ga2, 0, 0, 0, 0,  //
      -ga2, -wa, 0, 0, 0, 0, //
      0, 0, -wb, 0, 0, 0;
  return a;
}

enum class StabilityClass { stable_center, unstable_real_saddle, complex_quartet };

inline const char* to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::stable_center: return "stable-center";
    case StabilityClass::unstable_real_saddle: return "unstable-real-saddle";
    case StabilityClass::complex_quartet: return "complex-quartet";
  }
  return "unknown";
}

struct StabilityReport {
  Matrix6 jacobian;
  std::array<cplx, 6> eigenvalues;  // sorted by real part, then imaginary part
  /// Largest purely real eigenvalue (0 when none is positive).
  double lambda_cl = 0.0;
  /// Largest real part over all eigenvalues, complex ones included.
  double max_real_part = 0.0;
  int positive_real_count = 0;
  StabilityClass classification = StabilityClass::stable_center;
  /// max over mu of min over nu |mu + nu|; zero for an exactly paired spectrum.
  double pairing_defect = 0.0;

  bool unstable() const { return classification != StabilityClass::stable_center; }
};

/// Real parts below this are zero (noise floor of the 6x6 eigensolve).
inline constexpr double kLambdaThreshold = 1e-9;
/// Imaginary parts below this (relative to |mu|) mark an eigenvalue as real.
inline constexpr double kRealEigenTolerance = 1e-7;

inline StabilityReport stability_report(const Matrix6& a) {
  StabilityReport r;
  r.jacobian = a;
  Eigen::EigenSolver<Matrix6> es(a, false);
  if (es.info() != Eigen::Success) throw NumericalError("stability_report: eigensolver failed");
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + 6);
  std::sort(ev.begin(), ev.end(), [](cplx x, cplx y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  std::copy(ev.begin(), ev.end(), r.eigenvalues.begin());

  for (cplx mu : ev) {
    r.max_real_part = std::max(r.max_real_part, mu.real());
    const bool is_real = std::abs(mu.imag()) <= kRealEigenTolerance * std::max(1.0, std::abs(mu));
    if (is_real && mu.real() > kLambdaThreshold) {
      ++r.positive_real_count;
      r.lambda_cl = std::max(r.lambda_cl, mu.real());
    }
    double best = std::numeric_limits<double>::infinity();
    for (cplx nu : ev) best = std::min(best, std::abs(mu + nu));
    r.pairing_defect = std::max(r.pairing_defect, best);
  }
  if (r.max_real_part <= kLambdaThreshold) r.max_real_part = 0.0;
  if (r.positive_real_count > 0)
    r.classification = StabilityClass::unstable_real_saddle;
  else if (r.max_real_part > 0.0)
    r.classification = StabilityClass::complex_quartet;
  return r;
}

inline StabilityReport jacobian_at_origin(const ModelParams& p) { return stability_report(origin_jacobian_matrix(p)); }

struct StabilityScanRow {
  double g_a = 0.0;
  double g_b = 0.0;
  StabilityReport report;
  /// max |A - finite-difference Jacobian| at the origin.
  double jacobian_fd_error = 0.0;
};

inline StabilityScanRow stability_point(const ModelParams& p) {
  StabilityScanRow row{p.g_a, p.g_b, jacobian_at_origin(p), 0.0};
  row.jacobian_fd_error = (row.report.jacobian - numerical_jacobian(p, ClassicalState{})).cwiseAbs().maxCoeff();
  return row;
}

/// Scan of g_b at fixed g_a (other parameters from `base`).
inline std::vector<StabilityScanRow> stability_scan(const ModelParams& base, std::span<const double> g_b_grid,
                                                    double g_a) {
  if (g_b_grid.empty()) throw std::invalid_argument("stability_scan: empty grid");
  std::vector<StabilityScanRow> rows;
  for (double gb : g_b_grid) {
    ModelParams p = base;
    p.g_a = g_a;
    p.g_b = gb;
    rows.push_back(stability_point(p));
  }
  return rows;
}

/// Scan along g_a = g_b = g.
inline std::vector<StabilityScanRow> stability_scan_equal(const ModelParams& base, std::span<const double> g_grid) {
  if (g_grid.empty()) throw std::invalid_argument("stability_scan_equal: empty grid");
  std::vector<StabilityScanRow> rows;
  for (double g : g_grid) {
    ModelParams p = base;
    p.g_a = p.g_b = g;
    rows.push_back(stability_point(p));
  }
  return rows;
}

/// g_c = sqrt(omega Delta) / 2 for a mode of frequency omega.
inline double critical_coupling(double omega, double delta) { return 0.5 * std::sqrt(omega * delta); }

inline double critical_coupling(const ModelParams& p, Mode mode) {
  return critical_coupling(mode == Mode::a ? p.omega_a : p.omega_b, p.delta);
}

/// Common critical coupling; only defined for omega_a = omega_b. Use the
/// per-mode overload otherwise.
inline double critical_coupling(const ModelParams& p) {
  if (p.omega_a != p.omega_b)
    throw std::invalid_argument("critical_coupling: omega_a != omega_b, ask for a specific mode");
  return critical_coupling(p.omega_a, p.delta);
}

enum class MeanFieldPhase { normal, superradiant_a, superradiant_b, superradiant_u1 };

inline const char* to_string(MeanFieldPhase phase) {
  switch (phase) {
    case MeanFieldPhase::normal: return "normal";
    case MeanFieldPhase::superradiant_a: return "SR-a";
    case MeanFieldPhase::superradiant_b: return "SR-b";
    case MeanFieldPhase::superradiant_u1: return "SR-U1";
  }
  return "unknown";
}

struct MeanFieldSolution {
  MeanFieldPhase phase = MeanFieldPhase::normal;
  double g_c = 0.0;
  double density_a = 0.0;  // <a^+a>/S
  double density_b = 0.0;  // <b^+b>/S
  double spin_z = -1.0;    // <S_z>/S
  /// |sqrt(alpha)|^2 for the three displaced modes at S = n_spins / 2.
  double alpha_a = 0.0;
  double alpha_b = 0.0;
  double alpha_c = 0.0;
  /// Free angle of the U(1) family; the split is cos^2(phi) / sin^2(phi).
  double phi = 0.0;
};

/// Closed-form mean-field phases, valid for omega_a = omega_b.
inline MeanFieldSolution order_parameters(const ModelParams& p, double phi = 0.0) {
  p.validate();
  if (p.omega_a != p.omega_b)
    throw std::invalid_argument("order_parameters: closed forms need omega_a = omega_b");
  const double w = p.omega_a;
  MeanFieldSolution sol;
  sol.g_c = critical_coupling(p);
  const double gc = sol.g_c;
  const double g = std::max(p.g_a, p.g_b);
  if (g <= gc) return sol;

  const double density = 2.0 * (g / w) * (g / w) * (1.0 - std::pow(gc / g, 4));
  sol.spin_z = -(gc * gc) / (g * g);
  if (p.g_a == p.g_b) {
    sol.phase = MeanFieldPhase::superradiant_u1;
    sol.phi = phi;
    sol.density_a = density * std::cos(phi) * std::cos(phi);
    sol.density_b = density * std::sin(phi) * std::sin(phi);
  } else if (p.g_a > p.g_b) {
    sol.phase = MeanFieldPhase::superradiant_a;
    sol.density_a = density;
  } else {
    sol.phase = MeanFieldPhase::superradiant_b;
    sol.density_b = density;
  }
  const double s = p.spin();
  sol.alpha_a = sol.density_a * s;
  sol.alpha_b = sol.density_b * s;
  sol.alpha_c = s * (1.0 - (gc * gc) / (g * g));
  return sol;
}

struct NormalPhaseMatrix {
  Eigen::Matrix3cd b;
  Eigen::Vector3cd eigenvalues;
  double m2_inverse = 0.0;
  double m3_inverse = 0.0;
  /// g_b below sqrt(omega_b Delta)/2, where every entry is real.
  bool in_validity_region = true;
  /// All eigenvalues real and positive: the normal phase is locally stable.
  bool stable = true;
};

/// Quadratic form of the normal phase in the thermodynamic limit. The spin
/// mode enters through its squared frequency Delta^2, the same way the boson
/// frequencies do.
inline NormalPhaseMatrix normal_phase_matrix(const ModelParams& p) {
  p.validate();
  NormalPhaseMatrix out;
  const double ratio = 2.0 * p.g_b / std::sqrt(p.omega_b * p.delta);
  out.m2_inverse = 1.0 - ratio;
  out.m3_inverse = 1.0 + ratio;
  if (std::abs(out.m2_inverse) < 1e-14)
    throw NumericalError("normal_phase_matrix: m2 is singular at g_b = sqrt(omega_b Delta) / 2");
  out.in_validity_region = out.m2_inverse > 0.0;

  const cplx inv_sqrt_m2 = std::sqrt(cplx(out.m2_inverse));
  const cplx inv_sqrt_m3 = std::sqrt(cplx(out.m3_inverse));
  const double d2 = p.delta * p.delta;
  const double eps2 = 0.5 * (p.omega_b * p.omega_b + d2);
  const double lam = 0.5 * (p.omega_b * p.omega_b - d2);
  const double coupling = p.g_a * std::sqrt(2.0 * p.omega_a * p.delta);

  Eigen::Matrix3cd& b = out.b;
  b(0, 0) = p.omega_a * p.omega_a;
  b(0, 1) = b(1, 0) = coupling * inv_sqrt_m2;
  b(0, 2) = b(2, 0) = -coupling * inv_sqrt_m3;
  b(1, 1) = eps2 * out.m2_inverse;
  b(2, 2) = eps2 * out.m3_inverse;
  b(1, 2) = b(2, 1) = lam * inv_sqrt_m2 * inv_sqrt_m3;

  Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(b, false);
  out.eigenvalues = es.eigenvalues();
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  for (int k = 0; k < 3; ++k) {
    const cplx mu = out.eigenvalues(k);
    if (std::abs(mu.imag()) > 1e-12 * scale || !(mu.real() > 0.0)) out.stable = false;
  }
  return out;
}

struct QuantumClassicalComparison {
  double lambda_cl = 0.0;
  double lambda_q = 0.0;
  bool fit_found = false;
  /// lambda_q / (2 lambda_cl) and its one-sigma uncertainty from the slope error.
  std::optional<double> ratio;
  double ratio_uncertainty = 0.0;
  std::string flag;  // "consistent", "deviates", "quantum-only growth", "classical-only instability", "no growth"
  StabilityReport stability;
};

inline QuantumClassicalComparison compare_quantum_classical(const ModelParams& p, const LyapunovFit& fit,
                                                            double tolerance = 0.2) {
  QuantumClassicalComparison c;
  c.stability = jacobian_at_origin(p);
  c.lambda_cl = c.stability.lambda_cl;
  c.fit_found = fit.found;
  c.lambda_q = fit.found ? fit.lambda_q : 0.0;
  const bool classical_growth = c.lambda_cl > 0.0;
  if (classical_growth && fit.found) {
    c.ratio = fit.lambda_q / (2.0 * c.lambda_cl);
    c.ratio_uncertainty = fit.slope_stderr / (2.0 * c.lambda_cl);
    c.flag = std::abs(*c.ratio - 1.0) <= tolerance ? "consistent" : "deviates";
  } else if (fit.found) {
    c.flag = "quantum-only growth";
  } else if (classical_growth) {
    c.flag = "classical-only instability";
  } else {
    c.flag = "no growth";
  }
  return c;
}

/// Fixed-step fourth-order Runge-Kutta trajectory (debugging aid).
inline std::vector<ClassicalState> classical_trajectory(const ModelParams& p, const ClassicalState& x0, double dt,
                                                        std::size_t steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("classical_trajectory: dt must be positive");
  std::vector<ClassicalState> out{x0};
  out.reserve(steps + 1);
  Vector6 x = x0.to_vector();
  auto f = [&](const Vector6& y) { return equations_of_motion(p, ClassicalState::from_vector(y)); };
  for (std::size_t i = 0; i < steps; ++i) {
    const Vector6 k1 = f(x);
    const Vector6 k2 = f(x + 0.5 * dt * k1);
    const Vector6 k3 = f(x + 0.5 * dt * k2);
    const Vector6 k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push_back(ClassicalState::from_vector(x));
  }
  return out;
}

}  // namespace tmd
