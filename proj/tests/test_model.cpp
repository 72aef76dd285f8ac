#include <gtest/gtest.h>

#include <random>

#include "tmd/model.hpp"
#include "tmd/spectral.hpp"

using namespace tmd;

namespace {

Eigen::MatrixXcd dense(const OperatorMatrix& op) { return Eigen::MatrixXcd(op.entries); }

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

/// ||P [A, B] P|| with P the projector on states at least two levels below the cutoffs,
/// so that one application of a ladder operator cannot reach the truncation edge.
double interior_commutator(const OperatorMatrix& a, const OperatorMatrix& b) {
  const BasisSpec& basis = a.basis;
  Eigen::VectorXd mask(basis.dim());
  for (Eigen::Index i = 0; i < basis.dim(); ++i) {
    const BasisIndex t = basis.unflatten(i);
    mask(i) = (t.n_a < basis.cutoff_a() - 1 && t.n_b < basis.cutoff_b() - 1) ? 1.0 : 0.0;
  }
  const Eigen::MatrixXcd c = dense(commutator(a, b));
  return max_abs(mask.asDiagonal() * c * mask.asDiagonal());
}

}  // namespace

TEST(Basis, DimensionAndRoundTrip) {
  const BasisSpec basis(3, 4, 2);
  EXPECT_EQ(basis.dim(), 4 * 5 * 3);
  for (Eigen::Index i = 0; i < basis.dim(); ++i) EXPECT_EQ(basis.flatten(basis.unflatten(i)), i);
  for (int m = 0; m <= 3; ++m)
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; b <= 2; ++b) EXPECT_EQ(basis.unflatten(basis.flatten({m, a, b})), (BasisIndex{m, a, b}));
}

TEST(Basis, DocumentedIndexMap) {
  const BasisSpec basis(2, 3, 4);
  EXPECT_EQ(basis.flatten({0, 0, 0}), 0);
  EXPECT_EQ(basis.flatten({0, 0, 1}), 1);
  EXPECT_EQ(basis.flatten({0, 1, 0}), 5);
  EXPECT_EQ(basis.flatten({1, 0, 0}), 20);
  EXPECT_EQ(basis.m_value(0), -1.0);
  EXPECT_EQ(basis.offset_of(1.0), 2);
  EXPECT_THROW(basis.offset_of(0.5), std::out_of_range);
}

TEST(Basis, OutOfRangeIndexThrows) {
  const BasisSpec basis(2, 3, 3);
  EXPECT_THROW(basis_state(basis, {0, 4, 0}), std::out_of_range);
  EXPECT_THROW(basis_state(basis, {3, 0, 0}), std::out_of_range);
  EXPECT_THROW(BasisSpec(0, 1, 1), std::invalid_argument);
}

TEST(SpinOperators, SpinHalfIsHalfPauli) {
  const BasisSpec basis(1, 0, 0);
  const auto s = build_spin_operators(basis);
  Eigen::Matrix2cd sx, sy, sz;
  sx << 0, 0.5, 0.5, 0;
  sy << 0, cplx(0, 0.5), cplx(0, -0.5), 0;  // rows/cols ordered m = -1/2, +1/2
  sz << -0.5, 0, 0, 0.5;
  EXPECT_LT(max_abs(dense(s.x) - sx), 1e-15);
  EXPECT_LT(max_abs(dense(s.y) - sy), 1e-15);
  EXPECT_LT(max_abs(dense(s.z) - sz), 1e-15);
}

TEST(SpinOperators, SpinOneSzEntries) {
  const BasisSpec basis(2, 1, 1);
  const auto s = build_spin_operators(basis);
  for (int m = 0; m <= 2; ++m)
    for (int a = 0; a <= 1; ++a)
      for (int b = 0; b <= 1; ++b) {
        const Eigen::Index i = basis.flatten({m, a, b});
        EXPECT_EQ(s.z.entries.coeff(i, i), cplx(m - 1.0));
      }
}

TEST(SpinOperators, AlgebraAndCasimirUpToSixSpins) {
  for (int n = 1; n <= 6; ++n) {
    const BasisSpec basis(n, 2, 2);
    const auto s = build_spin_operators(basis);
    const cplx i(0, 1);
    EXPECT_LT(max_abs(commutator(s.x, s.y) - i * s.z), 1e-12) << n;
    EXPECT_LT(max_abs(commutator(s.y, s.z) - i * s.x), 1e-12) << n;
    EXPECT_LT(max_abs(commutator(s.z, s.x) - i * s.y), 1e-12) << n;
    const double ss1 = basis.spin() * (basis.spin() + 1);
    const OperatorMatrix casimir = s.x * s.x + s.y * s.y + s.z * s.z;
    EXPECT_LT(max_abs(casimir - ss1 * identity(basis)), 1e-12) << n;
  }
}

TEST(BosonOperators, LadderElements) {
  const BasisSpec basis(1, 2, 1);
  const auto a = build_boson_operators(basis, Mode::a);
  const StateVector two = basis_state(basis, {0, 2, 0});
  const StateVector lowered = a.annihilate.apply(two);
  Eigen::VectorXcd expected = Eigen::VectorXcd::Zero(basis.dim());
  expected(basis.flatten({0, 1, 0})) = std::sqrt(2.0);
  EXPECT_LT((lowered.amplitudes - expected).norm(), 1e-15);
  const StateVector vac = basis_state(basis, {1, 0, 1});
  EXPECT_EQ(a.annihilate.apply(vac).amplitudes.norm(), 0.0);
  EXPECT_LT(max_abs(a.create - a.annihilate.adjoint()), 1e-15);
}

TEST(BosonOperators, CanonicalCommutatorBelowCutoff) {
  const BasisSpec basis(2, 5, 4);
  for (Mode mode : {Mode::a, Mode::b}) {
    const auto op = build_boson_operators(basis, mode);
    const Eigen::MatrixXcd c = dense(commutator(op.annihilate, op.create));
    for (Eigen::Index i = 0; i < basis.dim(); ++i) {
      const BasisIndex t = basis.unflatten(i);
      const int n = mode == Mode::a ? t.n_a : t.n_b;
      const int cutoff = mode == Mode::a ? basis.cutoff_a() : basis.cutoff_b();
      if (n < cutoff) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(basis.dim());
        e(i) = 1.0;
        EXPECT_LT((c * e - e).norm(), 1e-12);
      }
    }
    const OperatorMatrix num = op.number();
    EXPECT_TRUE(num.hermitian);
    for (Eigen::Index i = 0; i < basis.dim(); ++i) {
      const BasisIndex t = basis.unflatten(i);
      EXPECT_NEAR(num.entries.coeff(i, i).real(), mode == Mode::a ? t.n_a : t.n_b, 1e-14);
    }
  }
}

TEST(Hamiltonian, HermitianForRandomParameters) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int draw = 0; draw < 5; ++draw) {
    const ModelParams p{u(rng), u(rng), u(rng), u(rng), u(rng), 3};
    const OperatorMatrix h = build_hamiltonian(p, BasisSpec(3, 6, 5));
    EXPECT_TRUE(h.hermitian);
    EXPECT_LT(h.hermiticity_defect(), 1e-12);
  }
}

TEST(Hamiltonian, DecoupledSpectrumIsTheGrid) {
  const ModelParams p{1.0, 2.0, 2.0, 0.0, 0.0, 2};
  const BasisSpec basis(2, 4, 3);
  const auto spec = diagonalize(build_hamiltonian(p, basis), p);
  std::vector<double> grid;
  for (int m = 0; m <= 2; ++m)
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; b <= 3; ++b) grid.push_back(a * 1.0 + b * 2.0 + 2.0 * (m - 1.0));
  std::sort(grid.begin(), grid.end());
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(spec.eigenvalues()(k), grid[k], 1e-12);
}

TEST(Hamiltonian, ReducesToRabiModel) {
  // Independent build: sigma-basis Rabi model w a^+a + (Delta/2) sigma_z + g sigma_x (a + a^+).
  const int cutoff = 7;
  const double w = 1.3, delta = 0.8, g = 0.45;
  const ModelParams p{w, 2.0, delta, g, 0.0, 1};
  const BasisSpec basis(1, cutoff, 0);
  const Eigen::MatrixXcd h = dense(build_hamiltonian(p, basis));
  Eigen::MatrixXcd rabi = Eigen::MatrixXcd::Zero(2 * (cutoff + 1), 2 * (cutoff + 1));
  for (int s = 0; s < 2; ++s)
    for (int n = 0; n <= cutoff; ++n) {
      const int i = s * (cutoff + 1) + n;
      rabi(i, i) = w * n + (s == 0 ? -0.5 : 0.5) * delta;
      if (n < cutoff) {
        const int j = (1 - s) * (cutoff + 1) + n + 1;
        rabi(i, j) = g * std::sqrt(n + 1.0);
        rabi(j, i) = g * std::sqrt(n + 1.0);
      }
    }
  EXPECT_LT(max_abs(h - rabi), 1e-14);
}

TEST(Hamiltonian, RejectsSpinCountMismatch) {
  const ModelParams p{1, 1, 1, 0.1, 0.1, 3};
  EXPECT_THROW(build_hamiltonian(p, BasisSpec(2, 2, 2)), BasisMismatch);
}

TEST(Hamiltonian, GroundStateConvergesWithCutoff) {
  const ModelParams p{1.0, 2.0, 2.0, 1.5, 3.0, 4};
  const auto e0 = [&](int ca, int cb) {
    const OperatorMatrix h = build_hamiltonian(p, BasisSpec(4, ca, cb));
    return diagonalize(h, p).eigenvalues()(0);
  };
  EXPECT_NEAR(e0(36, 40), e0(40, 44), 1e-8);
  // Independent dense solver on the same truncated matrix.
  const Eigen::MatrixXcd hd = dense(build_hamiltonian(p, BasisSpec(4, 14, 16)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hd, Eigen::EigenvaluesOnly);
  EXPECT_NEAR(es.eigenvalues()(0), e0(14, 16), 1e-9);
}

TEST(Parity, ConventionAndSquare) {
  const BasisSpec basis(3, 3, 3);
  const OperatorMatrix pi = build_parity(basis);
  EXPECT_EQ(pi.entries.coeff(basis.flatten({0, 0, 0}), basis.flatten({0, 0, 0})), cplx(1.0));
  EXPECT_EQ(pi.entries.coeff(basis.flatten({1, 0, 0}), basis.flatten({1, 0, 0})), cplx(-1.0));
  EXPECT_LT(max_abs(pi * pi - identity(basis)), 1e-15);
}

TEST(Parity, CommutesWithHamiltonianForRandomDraws) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  std::uniform_int_distribution<int> spins(1, 4), cut(2, 7);
  for (int draw = 0; draw < 10; ++draw) {
    const int n = spins(rng);
    const BasisSpec basis(n, cut(rng), cut(rng));
    const ModelParams p{u(rng), u(rng), u(rng), u(rng), u(rng), n};
    EXPECT_LT(max_abs(commutator(build_hamiltonian(p, basis), build_parity(basis))), 1e-10);
  }
}

TEST(Charge, TwoConstructionsAgree) {
  const BasisSpec basis(2, 4, 4);
  const auto a = build_boson_operators(basis, Mode::a);
  const auto b = build_boson_operators(basis, Mode::b);
  const OperatorMatrix direct =
      build_spin_operators(basis).z - (a.create * b.annihilate + b.create * a.annihilate);
  EXPECT_LT(max_abs(build_charge(basis) - direct), 1e-14);
  EXPECT_TRUE(build_charge(basis).hermitian);
}

TEST(Charge, ConservedOnlyWithU1Parameters) {
  const BasisSpec basis(2, 8, 8);
  const OperatorMatrix c = build_charge(basis);
  const ModelParams u1{1.0, 1.0, 2.0, 1.5, 1.5, 2};
  EXPECT_LT(interior_commutator(build_hamiltonian(u1, basis), c), 1e-10);
  const ModelParams z2{1.0, 1.0, 2.0, 0.5, 1.5, 2};
  EXPECT_GT(interior_commutator(build_hamiltonian(z2, basis), c), 0.1);
  const ModelParams detuned{1.0, 2.0, 2.0, 1.5, 1.5, 2};
  EXPECT_GT(interior_commutator(build_hamiltonian(detuned, basis), c), 0.1);
}

TEST(States, BasisStateIsUnitVector) {
  const BasisSpec basis(4, 12, 12);
  const StateVector s = basis_state(basis, {0, 5, 10});
  EXPECT_DOUBLE_EQ(s.norm(), 1.0);
  EXPECT_EQ(s.amplitudes(basis.flatten({0, 5, 10})), cplx(1.0));
}

TEST(States, CoherentStateConvention) {
  const BasisSpec basis(4, 2, 2);
  const auto s = build_spin_operators(basis);
  const StateVector down = spin_coherent_state(basis, 0.0, 0.0, 1, 2);
  EXPECT_LT((down.amplitudes - basis_state(basis, {0, 1, 2}).amplitudes).norm(), 1e-14);

  const StateVector minus_x = spin_coherent_state(basis, std::numbers::pi / 2, 0.0, 0, 0);
  const double S = basis.spin();
  EXPECT_LT((s.x.entries * minus_x.amplitudes + S * minus_x.amplitudes).norm(), 1e-10);

  for (double theta : {0.2, 1.0, 2.0, 2.9}) {
    const StateVector psi = spin_coherent_state(basis, theta, 0.7, 0, 0);
    EXPECT_NEAR(psi.norm(), 1.0, 1e-14);
    EXPECT_NEAR(s.z.expectation(psi.amplitudes).real(), -S * std::cos(theta), 1e-12);
  }
}

TEST(States, CoherentStateMatchesRotationOracle) {
  // exp(-i phi Sz) exp(-i theta Sy)|-S> built from a dense matrix exponential.
  const BasisSpec basis(3, 0, 0);
  const auto s = build_spin_operators(basis);
  const double theta = 1.1, phi = -0.4;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ey(dense(s.y));
  const Eigen::MatrixXcd ry = ey.eigenvectors() *
                              (ey.eigenvalues().cast<cplx>() * cplx(0, -theta)).array().exp().matrix().asDiagonal() *
                              ey.eigenvectors().adjoint();
  Eigen::VectorXcd rz(basis.dim());
  for (int k = 0; k <= 3; ++k) rz(k) = std::exp(cplx(0, -phi * basis.m_value(k)));
  const Eigen::VectorXcd oracle = rz.asDiagonal() * ry.col(0);
  EXPECT_LT((spin_coherent_state(basis, theta, phi, 0, 0).amplitudes - oracle).norm(), 1e-12);
}

TEST(States, CoherentStateFockBounds) {
  const BasisSpec basis(2, 3, 3);
  EXPECT_THROW(spin_coherent_state(basis, 0.1, 0.0, 4, 0), std::out_of_range);
}

TEST(Leakage, BoundaryLayers) {
  const BasisSpec basis(2, 4, 3);
  EXPECT_EQ(leakage(basis_state(basis, {0, 0, 0})), 0.0);
  EXPECT_EQ(leakage(basis_state(basis, {1, 4, 0})), 1.0);
  EXPECT_EQ(leakage(basis_state(basis, {1, 0, 3})), 1.0);
}

TEST(OperatorMatrix, BasisTagsMustMatch) {
  const BasisSpec b1(2, 2, 2), b2(2, 3, 2);
  EXPECT_THROW(identity(b1) + identity(b2), BasisMismatch);
  EXPECT_THROW(commutator(identity(b1), identity(b2)), BasisMismatch);
  EXPECT_THROW(identity(b1).apply(basis_state(b2, {0, 0, 0})), BasisMismatch);
}

TEST(OperatorMatrix, RejectsFalseHermitianFlag) {
  const BasisSpec basis(1, 1, 1);
  const auto a = build_boson_operators(basis, Mode::a);
  EXPECT_THROW(OperatorMatrix(basis, a.annihilate.entries, true), std::invalid_argument);
}
