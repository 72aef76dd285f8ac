#include <gtest/gtest.h>

#include <cmath>

#include "tmd/errors.hpp"
#include "tmd/fotoc.hpp"

using namespace tmd;

namespace {

const ModelParams kFree{1.0, 2.0, 2.0, 0.0, 0.0, 2};
const ModelParams kCoupled{1.0, 2.0, 2.0, 0.5, 1.5, 2};

TimeSeries synthetic(const std::vector<double>& t, auto&& f) {
  TimeSeries s;
  s.times = t;
  for (double x : t) s.values.emplace_back(f(x), 0.0);
  return s;
}

}  // namespace

TEST(Fotoc, VacuumQuadratureVarianceIsQuarter) {
  const BasisSpec basis(2, 6, 6);
  const auto spec = diagonalize(build_hamiltonian(kFree, basis), kFree);
  const StateVector psi0 = basis_state(basis, {0, 0, 0});
  const auto times = linspace(0.0, 5.0, 11);
  for (Mode m : {Mode::a, Mode::b}) {
    const auto g = fotoc_variance(spec, psi0, quadrature(basis, m), times);
    for (double v : g.real_values()) EXPECT_NEAR(v, 0.25, 1e-12);
  }
}

TEST(Fotoc, FockStateVarianceConstantUnderFreeEvolution) {
  const BasisSpec basis(2, 6, 6);
  const auto spec = diagonalize(build_hamiltonian(kFree, basis), kFree);
  const StateVector psi0 = basis_state(basis, {1, 0, 3});
  const auto g = fotoc_variance(spec, psi0, quadrature(basis, Mode::b), linspace(0.0, 7.0, 15));
  for (double v : g.real_values()) EXPECT_NEAR(v, (2.0 * 3 + 1) / 4.0, 1e-12);
}

TEST(Fotoc, EchoAtTimeZeroMatchesGaussianOverlap) {
  // <0| exp(i dphi x) |0> = exp(-dphi^2 / 8) for x = (b + b^+)/2.
  const BasisSpec basis(2, 4, 20);
  const auto spec = diagonalize(build_hamiltonian(kFree, basis), kFree);
  const StateVector psi0 = basis_state(basis, {0, 0, 0});
  for (double dphi : {1e-1, 1e-2, 1e-3}) {
    const auto e = fotoc_echo(spec, psi0, quadrature(basis, Mode::b), dphi, std::vector<double>{0.0});
    const double expected = -std::expm1(-dphi * dphi / 4.0);
    EXPECT_NEAR(e.real_values()[0] / expected, 1.0, 1e-9) << dphi;
  }
}

TEST(Fotoc, EchoApproachesScaledVariance) {
  const BasisSpec basis(2, 10, 14);
  const auto spec = diagonalize(build_hamiltonian(kCoupled, basis), kCoupled);
  const StateVector psi0 = spin_coherent_state(basis, 0.0, 0.0, 0, 0);
  const auto g = quadrature(basis, Mode::b);
  const auto times = linspace(0.0, 4.0, 9);
  const auto var = fotoc_variance(spec, psi0, g, times).real_values();
  for (double dphi : {1e-2, 1e-3}) {
    const auto echo = fotoc_echo(spec, psi0, g, dphi, times).real_values();
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double rel = std::abs(echo[i] / (dphi * dphi) - var[i]) / var[i];
      // Leading correction is O(dphi^2) times a ratio of moments of order a few.
      EXPECT_LT(rel, 50.0 * dphi * dphi) << "dphi=" << dphi << " t=" << times[i];
    }
  }
}

TEST(Fotoc, ZeroPerturbationGivesZeroEcho) {
  const BasisSpec basis(2, 5, 5);
  const auto spec = diagonalize(build_hamiltonian(kCoupled, basis), kCoupled);
  const auto e = fotoc_echo(spec, spin_coherent_state(basis, 0.0, 0.0, 0, 0), quadrature(basis, Mode::a), 0.0,
                            linspace(0.0, 2.0, 5));
  for (double v : e.real_values()) EXPECT_EQ(v, 0.0);
}

TEST(Fotoc, ConservedGeneratorHasConstantVariance) {
  const BasisSpec basis(2, 6, 6);
  const OperatorMatrix h = build_hamiltonian(kCoupled, basis);
  const auto spec = diagonalize(h, kCoupled);
  const StateVector psi0 = spin_coherent_state(basis, std::numbers::pi / 2, 0.0, 1, 0);
  const auto g = fotoc_variance(spec, psi0, h, linspace(0.0, 10.0, 21)).real_values();
  for (double v : g) EXPECT_NEAR(v, g[0], 1e-9 * std::max(1.0, g[0]));
}

TEST(Fotoc, VarianceIsNonNegativeAndTracksLeakage) {
  const BasisSpec basis(2, 6, 6);
  const auto spec = diagonalize(build_hamiltonian(kCoupled, basis), kCoupled);
  const auto g = fotoc_variance(spec, spin_coherent_state(basis, 0.0, 0.0, 0, 0), quadrature(basis, Mode::b),
                                linspace(0.0, 20.0, 41));
  ASSERT_EQ(g.leakage.size(), g.size());
  for (double v : g.real_values()) EXPECT_GE(v, 0.0);
  EXPECT_GT(g.leakage_max(), 0.0);
}

TEST(Fotoc, KrylovAndSpectralRoutesAgree) {
  const BasisSpec basis(2, 8, 8);
  const OperatorMatrix h = build_hamiltonian(kCoupled, basis);
  const auto spec = diagonalize(h, kCoupled);
  const StateVector psi0 = spin_coherent_state(basis, 0.0, 0.0, 0, 0);
  const auto g = quadrature(basis, Mode::b);
  const auto times = linspace(0.0, 6.0, 13);
  const auto a = fotoc_variance(spec, psi0, g, times).real_values();
  const auto b = fotoc_variance(KrylovPropagator(h), psi0, g, times).real_values();
  for (std::size_t i = 0; i < times.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-8);
}

TEST(Fotoc, RejectsMismatchedBasisAndBadInput) {
  const BasisSpec basis(2, 5, 5);
  const BasisSpec other(2, 5, 6);
  const auto spec = diagonalize(build_hamiltonian(kCoupled, basis), kCoupled);
  const StateVector psi0 = spin_coherent_state(basis, 0.0, 0.0, 0, 0);
  const std::vector<double> t{0.0, 1.0};
  EXPECT_THROW(fotoc_variance(spec, psi0, quadrature(other, Mode::a), t), BasisMismatch);
  EXPECT_THROW(fotoc_echo(spec, psi0, quadrature(basis, Mode::a), -1e-3, t), std::invalid_argument);
  EXPECT_THROW(fotoc_variance(spec, psi0, quadrature(basis, Mode::a), std::vector<double>{1.0, 0.5}),
               std::invalid_argument);
  FotocConfig cfg;
  cfg.mode = FotocMode::echo;
  cfg.delta_phi = 0.2;
  cfg.times = t;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(LyapunovFit, RecoversSyntheticExponent) {
  const auto t = linspace(0.0, 10.0, 201);
  const auto s = synthetic(t, [](double x) { return std::min(0.01 * std::exp(2.0 * x), 50.0); });
  const auto fit = fit_lyapunov(s);
  ASSERT_TRUE(fit.found) << fit.reason;
  EXPECT_NEAR(fit.lambda_q, 2.0, 1e-9);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(fit.saturation_value, 50.0, 1e-12);
  EXPECT_GE(fit.samples, 8u);
  // Window bounds follow the policy: first G > 3 G(0), first G >= max/e.
  EXPECT_GT(0.01 * std::exp(2.0 * fit.t_start), 0.03);
  EXPECT_LE(0.01 * std::exp(2.0 * (fit.t_start - 0.05)), 0.03);
  EXPECT_GE(0.01 * std::exp(2.0 * fit.t_end), 50.0 / std::numbers::e);
}

TEST(LyapunovFit, SlopeInvariantUnderScaling) {
  const auto t = linspace(0.0, 10.0, 201);
  const auto f = [](double x) { return std::min(0.02 * std::exp(1.3 * x), 7.0); };
  const auto base = fit_lyapunov(synthetic(t, f));
  const auto scaled = fit_lyapunov(synthetic(t, [&](double x) { return 123.0 * f(x); }));
  ASSERT_TRUE(base.found && scaled.found);
  EXPECT_NEAR(base.lambda_q, scaled.lambda_q, 1e-10);
}

TEST(LyapunovFit, OscillationIsNotGrowth) {
  const auto t = linspace(0.0, 30.0, 301);
  const auto fit = fit_lyapunov(synthetic(t, [](double x) { return 1.0 + 0.5 * std::sin(x); }));
  EXPECT_FALSE(fit.found);
  EXPECT_FALSE(fit.reason.empty());
}

TEST(LyapunovFit, ShortWindowIsRejected) {
  const auto t = linspace(0.0, 10.0, 21);
  const auto fit = fit_lyapunov(synthetic(t, [](double x) { return std::min(std::exp(8.0 * x), 1e3); }));
  EXPECT_FALSE(fit.found);
}

TEST(LyapunovFit, RejectsEmptyOrNonPositiveSeries) {
  EXPECT_THROW(fit_lyapunov(TimeSeries{}), std::invalid_argument);
  const auto t = linspace(0.0, 1.0, 5);
  EXPECT_THROW(fit_lyapunov(synthetic(t, [](double) { return 0.0; })), std::invalid_argument);
  FitPolicy bad;
  bad.start_factor = 0.5;
  EXPECT_THROW(fit_lyapunov(synthetic(t, [](double) { return 1.0; }), bad), std::invalid_argument);
}

TEST(Fotoc, NormalizedStartsAtOne) {
  const auto t = linspace(0.0, 1.0, 5);
  const auto n = normalized(synthetic(t, [](double x) { return 0.25 + x; }));
  EXPECT_DOUBLE_EQ(n.real_values()[0], 1.0);
  EXPECT_DOUBLE_EQ(n.real_values()[4], 5.0);
}
