#include <gtest/gtest.h>

#include <random>

#include "tmd/krylov.hpp"
#include "tmd/model.hpp"
#include "tmd/spectral.hpp"

using namespace tmd;

namespace {

Eigen::VectorXcd random_state(Eigen::Index dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXcd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = cplx(n(rng), n(rng));
  return v.normalized();
}

/// Fixed-step RK4 for i dpsi/dt = H psi.
Eigen::VectorXcd rk4(const SparseOp& h, Eigen::VectorXcd psi, double t, int steps) {
  const double dt = t / steps;
  const cplx mi(0, -1);
  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXcd k1 = mi * (h * psi);
    const Eigen::VectorXcd k2 = mi * (h * (psi + 0.5 * dt * k1));
    const Eigen::VectorXcd k3 = mi * (h * (psi + 0.5 * dt * k2));
    const Eigen::VectorXcd k4 = mi * (h * (psi + dt * k3));
    psi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return psi;
}

const ModelParams kSmall{1.0, 2.0, 2.0, 0.5, 1.2, 2};

}  // namespace

TEST(Diagonalize, ResidualsAndOrthonormality) {
  const BasisSpec basis(3, 6, 6);
  const ModelParams p{1.0, 2.0, 2.0, 1.5, 3.0, 3};
  const OperatorMatrix h = build_hamiltonian(p, basis);
  const auto spec = diagonalize(h, p);
  ASSERT_EQ(spec.dim(), basis.dim());
  for (Eigen::Index k = 1; k < spec.dim(); ++k) EXPECT_LE(spec.eigenvalues()(k - 1), spec.eigenvalues()(k));
  std::mt19937 rng(3);
  std::uniform_int_distribution<Eigen::Index> pick(0, spec.dim() - 1);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Index k = pick(rng);
    const Eigen::VectorXcd v = spec.eigenvector(k);
    EXPECT_LT((h.entries * v - spec.eigenvalues()(k) * v).norm(), 1e-8 * spec.norm_estimate());
  }
  Eigen::MatrixXcd vmat(basis.dim(), basis.dim());
  for (Eigen::Index k = 0; k < spec.dim(); ++k) vmat.col(k) = spec.eigenvector(k);
  const Eigen::MatrixXcd gram = vmat.adjoint() * vmat;
  EXPECT_LT((gram - Eigen::MatrixXcd::Identity(basis.dim(), basis.dim())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Diagonalize, ParityBlocksMatchFullSolve) {
  const BasisSpec basis(2, 5, 5);
  const OperatorMatrix h = build_hamiltonian(kSmall, basis);
  const auto blocked = diagonalize(h, kSmall);
  const auto full = diagonalize(h, kSmall, {.use_parity_blocks = false});
  EXPECT_EQ(blocked.blocks().size(), 2u);
  EXPECT_EQ(full.blocks().size(), 1u);
  EXPECT_LT((blocked.eigenvalues() - full.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Diagonalize, DeterministicPhases) {
  const BasisSpec basis(2, 4, 4);
  const OperatorMatrix h = build_hamiltonian(kSmall, basis);
  const auto s1 = diagonalize(h, kSmall);
  const auto s2 = diagonalize(h, kSmall);
  for (Eigen::Index k = 0; k < s1.dim(); ++k) EXPECT_EQ(s1.eigenvector(k), s2.eigenvector(k));
}

TEST(Diagonalize, RejectsNonHermitian) {
  const BasisSpec basis(1, 2, 2);
  const auto a = build_boson_operators(basis, Mode::a);
  EXPECT_THROW(diagonalize(a.annihilate), std::invalid_argument);
}

TEST(Diagonalize, RabiSpectrumOracle) {
  const int cutoff = 30;
  const double w = 1.0, delta = 2.0, g = 0.6;
  const ModelParams p{w, 1.0, delta, g, 0.0, 1};
  const BasisSpec basis(1, cutoff, 0);
  const auto spec = diagonalize(build_hamiltonian(p, basis), p);
  Eigen::MatrixXd rabi = Eigen::MatrixXd::Zero(2 * (cutoff + 1), 2 * (cutoff + 1));
  for (int s = 0; s < 2; ++s)
    for (int n = 0; n <= cutoff; ++n) {
      const int i = s * (cutoff + 1) + n;
      rabi(i, i) = w * n + (s == 0 ? -0.5 : 0.5) * delta;
      if (n < cutoff) {
        const int j = (1 - s) * (cutoff + 1) + n + 1;
        rabi(i, j) = rabi(j, i) = g * std::sqrt(n + 1.0);
      }
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rabi, Eigen::EigenvaluesOnly);
  EXPECT_LT((es.eigenvalues() - spec.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Diagonalize, GroundStateNearMeanFieldSpin) {
  // Fig. 3 parameters: g_b = 3 > g_c(b) = 1, mean field <S_z>/S = -g_c^2/g_b^2 = -1/9.
  // At N = 4 the finite-size value only needs to sit well inside the superradiant side.
  const ModelParams p{1.0, 2.0, 2.0, 1.5, 3.0, 4};
  const BasisSpec basis(4, 24, 30);
  const auto spec = diagonalize(build_hamiltonian(p, basis), p);
  const Eigen::VectorXcd g0 = spec.eigenvector(0);
  const double sz = build_spin_operators(basis).z.expectation(g0).real() / basis.spin();
  EXPECT_GT(sz, -0.5);
  EXPECT_LT(sz, 0.0);
}

TEST(Amplitudes, EigenvectorAndParseval) {
  const BasisSpec basis(2, 4, 4);
  const auto spec = diagonalize(build_hamiltonian(kSmall, basis), kSmall);
  const StateVector e0(basis, spec.eigenvector(0));
  const Eigen::VectorXcd c = amplitudes(spec, e0);
  EXPECT_NEAR(std::abs(c(0)), 1.0, 1e-12);
  EXPECT_NEAR(c.tail(c.size() - 1).norm(), 0.0, 1e-12);
  const StateVector r(basis, random_state(basis.dim(), 5));
  EXPECT_NEAR(amplitudes(spec, r).squaredNorm(), 1.0, 1e-10);
  EXPECT_THROW(amplitudes(spec, basis_state(BasisSpec(2, 3, 4), {0, 0, 0})), BasisMismatch);
}

TEST(Evolve, IdentityAtZeroAndNormPreserved) {
  const BasisSpec basis(2, 5, 5);
  const auto spec = diagonalize(build_hamiltonian(kSmall, basis), kSmall);
  const StateVector psi0(basis, random_state(basis.dim(), 9));
  EXPECT_LT((evolve(spec, psi0, 0.0).amplitudes - psi0.amplitudes).norm(), 1e-12);
  for (double t : {0.5, 3.0, 17.0, 250.0}) EXPECT_NEAR(evolve(spec, psi0, t).norm(), 1.0, 1e-10);
}

TEST(Evolve, FreeEvolutionIsAPhase) {
  const ModelParams p{1.0, 2.0, 2.0, 0.0, 0.0, 2};
  const BasisSpec basis(2, 3, 3);
  const auto spec = diagonalize(build_hamiltonian(p, basis), p);
  const StateVector psi0 = basis_state(basis, {1, 2, 1});
  const double energy = 2 * 1.0 + 1 * 2.0 + 0.0;
  const StateVector psi = evolve(spec, psi0, 1.7);
  EXPECT_LT((psi.amplitudes - std::exp(cplx(0, -energy * 1.7)) * psi0.amplitudes).norm(), 1e-12);
}

TEST(Evolve, MatchesRungeKuttaOracle) {
  // N = 2, cutoffs 8; RK4 with dt = 1e-4 has global error far below 1e-6 at these norms.
  const ModelParams p{1.0, 2.0, 2.0, 0.5, 3.0, 2};
  const BasisSpec basis(2, 8, 8);
  const OperatorMatrix h = build_hamiltonian(p, basis);
  const auto spec = diagonalize(h, p);
  const StateVector psi0 = spin_coherent_state(basis, std::numbers::pi / 2, 0.0, 0, 0);
  Eigen::VectorXcd psi = psi0.amplitudes;
  double worst = 0.0;
  for (int seg = 1; seg <= 10; ++seg) {
    psi = rk4(h.entries, psi, 1.0, 10000);
    worst = std::max(worst, (psi - evolve(spec, psi0, seg).amplitudes).norm());
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(ExpectationSeries, IdentityAndEnergyConservation) {
  const ModelParams p{1.0, 2.0, 2.0, 1.5, 3.0, 2};
  const BasisSpec basis(2, 10, 10);
  const OperatorMatrix h = build_hamiltonian(p, basis);
  const auto spec = diagonalize(h, p);
  const StateVector psi0 = basis_state(basis, {0, 3, 2});
  const auto times = linspace(0.0, 40.0, 81);
  const TimeSeries one = expectation_series(spec, psi0, identity(basis), times);
  for (cplx v : one.values) EXPECT_NEAR(std::abs(v - 1.0), 0.0, 1e-10);
  const TimeSeries energy = expectation_series(spec, psi0, h, times, "energy");
  const double e0 = h.expectation(psi0.amplitudes).real();
  for (cplx v : energy.values) EXPECT_LT(std::abs(v.real() - e0), 1e-9 * std::abs(e0));
  EXPECT_LT(energy.max_imaginary(), 1e-10);
  EXPECT_EQ(energy.leakage.size(), times.size());
}

TEST(ExpectationSeries, ParallelSamplingIsDeterministic) {
  const BasisSpec basis(2, 6, 6);
  const auto spec = diagonalize(build_hamiltonian(kSmall, basis), kSmall);
  const StateVector psi0 = basis_state(basis, {0, 1, 1});
  const OperatorMatrix sz = build_spin_operators(basis).z;
  const auto times = linspace(0.0, 10.0, 33);
  const TimeSeries serial = expectation_series(SpectralPropagator(spec, 1), psi0, sz, times);
  const TimeSeries parallel = expectation_series(SpectralPropagator(spec, 4), psi0, sz, times);
  EXPECT_EQ(serial.values, parallel.values);
}

TEST(ExpectationSeries, RejectsNonIncreasingTimes) {
  const BasisSpec basis(1, 2, 2);
  const ModelParams p{1, 1, 1, 0.2, 0.2, 1};
  const auto spec = diagonalize(build_hamiltonian(p, basis), p);
  const std::vector<double> times{0.0, 1.0, 1.0};
  EXPECT_THROW(expectation_series(spec, basis_state(basis, {0, 0, 0}), identity(basis), times),
               std::invalid_argument);
}

TEST(Leakage, ThresholdEnforcement) {
  TimeSeries s;
  s.label = "x";
  s.times = {0.0, 1.0};
  s.values = {1.0, 1.0};
  s.leakage = {1e-9, 2e-6};
  EXPECT_THROW(require_leakage_below(s, 1e-6), NumericalError);
  EXPECT_NO_THROW(require_leakage_below(s, 1e-5));
}

TEST(Krylov, MatchesSpectralPropagation) {
  const ModelParams p{1.0, 2.0, 2.0, 1.5, 3.0, 2};
  const BasisSpec basis(2, 12, 14);
  const OperatorMatrix h = build_hamiltonian(p, basis);
  const auto spec = diagonalize(h, p);
  const StateVector psi0 = basis_state(basis, {0, 2, 3});
  const auto times = linspace(0.0, 20.0, 41);
  const KrylovPropagator kp(h);
  double worst = 0.0;
  kp.sample(psi0, times, [&](std::size_t i, const Eigen::VectorXcd& psi) {
    worst = std::max(worst, (psi - evolve(spec, psi0, times[i]).amplitudes).norm());
  });
  EXPECT_LT(worst, 1e-8);
}

TEST(Krylov, ExactOnSmallInvariantSubspace) {
  SparseOp sx(2, 2);
  sx.insert(0, 1) = 1.0;
  sx.insert(1, 0) = 1.0;
  Eigen::VectorXcd v(2);
  v << 1.0, 0.0;
  const Eigen::VectorXcd out = expm_hermitian_apply(sx, v, 0.3);
  EXPECT_NEAR(std::abs(out(0) - std::cos(0.3)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(out(1) - cplx(0, -std::sin(0.3))), 0.0, 1e-14);
}
