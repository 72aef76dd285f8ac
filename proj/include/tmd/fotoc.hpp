#pragma once

// Fidelity out-of-time-order correlators.
//
// Two routes to the same quantity:
//   variance form  G(t) = <G^2(t)> - <G(t)>^2
//   echo form      1 - F(t),  F(t) = |<psi0| e^{iHt} e^{i dphi G} e^{-iHt} |psi0>|^2
// with 1 - F = dphi^2 G(t) + O(dphi^4). The echo form never needs the backward
// branch explicitly: F(t) = |<psi(t)| e^{i dphi G} |psi(t)>|^2.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "tmd/krylov.hpp"
#include "tmd/model.hpp"
#include "tmd/spectral.hpp"

namespace tmd {

/// Quadrature (a^+ + a)/2 of one boson mode.
inline OperatorMatrix quadrature(const BasisSpec& basis, Mode mode) {
  const auto ops = build_boson_operators(basis, mode);
  return {basis, SparseOp(0.5 * (ops.create.entries + ops.annihilate.entries)), true};
}

enum class FotocMode { variance, echo };

struct FitPolicy {
  /// Window opens at the first sample with G > start_factor * G(0).
  double start_factor = 3.0;
  /// Window closes at the first sample with G >= end_fraction * max G.
  double end_fraction = 1.0 / std::numbers::e;
  std::size_t min_samples = 8;
  /// Below this the log-linear fit is not accepted as exponential growth.
  double min_r_squared = 0.9;
  /// Fraction of the grid (at the end) averaged into the saturation value.
  double saturation_fraction = 0.2;

  void validate() const {
    if (!(start_factor > 1.0)) throw std::invalid_argument("FitPolicy: start_factor must exceed 1");
    if (!(end_fraction > 0.0 && end_fraction <= 1.0))
      throw std::invalid_argument("FitPolicy: end_fraction must lie in (0, 1]");
    if (min_samples < 2) throw std::invalid_argument("FitPolicy: min_samples must be >= 2");
    if (!(min_r_squared >= 0.0 && min_r_squared <= 1.0))
      throw std::invalid_argument("FitPolicy: min_r_squared must lie in [0, 1]");
    if (!(saturation_fraction > 0.0 && saturation_fraction <= 1.0))
      throw std::invalid_argument("FitPolicy: saturation_fraction must lie in (0, 1]");
  }
};

struct FotocConfig {
  std::variant<Mode, OperatorMatrix> generator = Mode::b;
  FotocMode mode = FotocMode::variance;
  double delta_phi = 1e-3;
  std::vector<double> times;
  FitPolicy fit;

  void validate() const {
    if (mode == FotocMode::echo && !(delta_phi > 0.0 && delta_phi <= 0.1))
      throw std::invalid_argument("FotocConfig: delta_phi must lie in (0, 0.1] in echo mode");
    require_increasing(times);
    fit.validate();
  }

  OperatorMatrix generator_matrix(const BasisSpec& basis) const {
    if (const Mode* m = std::get_if<Mode>(&generator)) return quadrature(basis, *m);
    const auto& custom = std::get<OperatorMatrix>(generator);
    require_same_basis(basis, custom.basis, "FotocConfig::generator_matrix");
    return custom;
  }

  std::string generator_name() const {
    if (const Mode* m = std::get_if<Mode>(&generator)) return std::string("G_") + to_string(*m);
    return "custom";
  }
};

struct LyapunovFit {
  bool found = false;
  std::string reason;  // why no window qualified, when !found
  double lambda_q = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::size_t samples = 0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;  // standard error of lambda_q from the regression
  double saturation_value = 0.0;
};

namespace detail {

inline void require_generator(const OperatorMatrix& g, const BasisSpec& basis, const char* where) {
  require_same_basis(basis, g.basis, where);
  if (!g.hermitian) throw std::invalid_argument(std::string(where) + ": generator must be Hermitian");
}

}  // namespace detail

/// Var G(t) along the trajectory. Computed as ||(G - <G>) psi||^2, which is
/// non-negative by construction.
template <class Propagator>
TimeSeries fotoc_variance(const Propagator& propagator, const StateVector& psi0, const OperatorMatrix& g,
                          std::span<const double> times) {
  detail::require_generator(g, propagator.basis(), "fotoc_variance");
  require_same_basis(propagator.basis(), psi0.basis, "fotoc_variance");
  require_increasing(times);
  TimeSeries out;
  out.label = "fotoc_variance";
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  out.leakage.resize(times.size());
  propagator.sample(psi0, times, [&](std::size_t i, const Eigen::VectorXcd& psi) {
    const Eigen::VectorXcd gpsi = g.entries * psi;
    const double mean = psi.dot(gpsi).real();
    out.values[i] = (gpsi - mean * psi).squaredNorm();
    out.leakage[i] = leakage(g.basis, psi);
  });
  return out;
}

inline TimeSeries fotoc_variance(const SpectralDecomposition& spec, const StateVector& psi0, const OperatorMatrix& g,
                                 std::span<const double> times) {
  return fotoc_variance(SpectralPropagator(spec), psi0, g, times);
}

/// 1 - |<psi| e^{i dphi G} |psi>|^2 for a unit vector psi, evaluated as the
/// squared norm of the component of e^{i dphi G} psi orthogonal to psi.
inline double echo_deficit(const SparseOp& g, const Eigen::VectorXcd& psi, double delta_phi,
                           const KrylovOptions& options = {40, 1e-14}) {
  if (delta_phi == 0.0) return 0.0;
  const Eigen::VectorXcd w = expm_hermitian_apply(g, psi, -delta_phi, options);
  const cplx overlap = psi.dot(w);
  return std::clamp((w - overlap * psi).squaredNorm(), 0.0, 1.0);
}

template <class Propagator>
TimeSeries fotoc_echo(const Propagator& propagator, const StateVector& psi0, const OperatorMatrix& g,
                      double delta_phi, std::span<const double> times) {
  detail::require_generator(g, propagator.basis(), "fotoc_echo");
  require_same_basis(propagator.basis(), psi0.basis, "fotoc_echo");
  require_increasing(times);
  if (delta_phi < 0.0) throw std::invalid_argument("fotoc_echo: delta_phi must be non-negative");
  TimeSeries out;
  out.label = "fotoc_echo";
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  out.leakage.resize(times.size());
  out.metadata["delta_phi"] = std::to_string(delta_phi);
  propagator.sample(psi0, times, [&](std::size_t i, const Eigen::VectorXcd& psi) {
    out.values[i] = echo_deficit(g.entries, psi, delta_phi);
    out.leakage[i] = leakage(g.basis, psi);
  });
  return out;
}

inline TimeSeries fotoc_echo(const SpectralDecomposition& spec, const StateVector& psi0, const OperatorMatrix& g,
                             double delta_phi, std::span<const double> times) {
  return fotoc_echo(SpectralPropagator(spec), psi0, g, delta_phi, times);
}

/// Least-squares slope of log G over the automatically selected growth window.
inline LyapunovFit fit_lyapunov(const TimeSeries& series, const FitPolicy& policy = {}) {
  policy.validate();
  series.validate();
  const std::size_t n = series.size();
  if (n == 0) throw std::invalid_argument("fit_lyapunov: empty series");
  const std::vector<double> g = series.real_values();

  LyapunovFit fit;
  const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(policy.saturation_fraction * n)));
  double acc = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) acc += g[i];
  fit.saturation_value = acc / static_cast<double>(tail);

  if (!(g[0] > 0.0)) throw std::invalid_argument("fit_lyapunov: G(0) must be positive");
  std::size_t start = n;
  for (std::size_t i = 0; i < n; ++i)
    if (g[i] > policy.start_factor * g[0]) {
      start = i;
      break;
    }
  if (start == n) {
    fit.reason = "series never exceeds start_factor * G(0)";
    return fit;
  }
  const double peak = *std::max_element(g.begin(), g.end());
  std::size_t end = n;
  for (std::size_t i = start; i < n; ++i)
    if (g[i] >= policy.end_fraction * peak) {
      end = i;
      break;
    }
  if (end == n || end < start || end - start + 1 < policy.min_samples) {
    fit.reason = "growth window shorter than min_samples";
    fit.t_start = series.times[start];
    fit.t_end = series.times[std::min(end, n - 1)];
    return fit;
  }

  double st = 0, sy = 0, stt = 0, sty = 0;
  const std::size_t m = end - start + 1;
  for (std::size_t i = start; i <= end; ++i) {
    if (!(g[i] > 0.0)) throw std::invalid_argument("fit_lyapunov: non-positive value inside the fit window");
    const double t = series.times[i];
    const double y = std::log(g[i]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double md = static_cast<double>(m);
  const double denom = md * stt - st * st;
  const double slope = (md * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / md;
  double ss_res = 0, ss_tot = 0;
  const double y_mean = sy / md;
  for (std::size_t i = start; i <= end; ++i) {
    const double y = std::log(g[i]);
    const double r = y - (intercept + slope * series.times[i]);
    ss_res += r * r;
    ss_tot += (y - y_mean) * (y - y_mean);
  }
  fit.lambda_q = slope;
  fit.t_start = series.times[start];
  fit.t_end = series.times[end];
  fit.samples = m;
  if (m > 2) fit.slope_stderr = std::sqrt(ss_res / (md - 2.0) / (stt - st * st / md));
  fit.r_squared = ss_tot > 0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 0.0;
  if (slope <= 0.0) {
    fit.reason = "non-positive slope";
  } else if (fit.r_squared < policy.min_r_squared) {
    fit.reason = "log-linear fit below min_r_squared";
  } else {
    fit.found = true;
  }
  return fit;
}

/// G(t) / G(0), for plotting curves of different N on a common scale.
inline TimeSeries normalized(const TimeSeries& series) {
  TimeSeries out = series;
  if (series.values.empty() || series.values[0].real() == 0.0) return out;
  const double g0 = series.values[0].real();
  for (auto& v : out.values) v /= g0;
  out.label = series.label + "_normalized";
  return out;
}

}  // namespace tmd
