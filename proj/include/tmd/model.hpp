#pragma once

// Truncated Hilbert space, collective spin and boson operators, the two-mode
// Dicke Hamiltonian, its symmetry generators and the initial states used by the
// dynamical runs.
//
// Basis ordering: |m>|n_a>|n_b> with m slowest and n_b fastest,
//   flat = ((m + S) * (cutoff_a + 1) + n_a) * (cutoff_b + 1) + n_b.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "tmd/errors.hpp"

namespace tmd {

using cplx = std::complex<double>;
using SparseOp = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

inline constexpr double kHermitianTol = 1e-12;

struct ModelParams {
  double omega_a = 1.0;
  double omega_b = 1.0;
  double delta = 1.0;
  double g_a = 0.0;
  double g_b = 0.0;
  int n_spins = 1;

  double spin() const { return 0.5 * n_spins; }

  void validate() const {
    if (!(omega_a > 0.0) || !(omega_b > 0.0) || !(delta > 0.0))
      throw std::invalid_argument("ModelParams: omega_a, omega_b and delta must be positive");
    if (!(g_a >= 0.0) || !(g_b >= 0.0))
      throw std::invalid_argument("ModelParams: couplings must be non-negative");
    if (n_spins < 1) throw std::invalid_argument("ModelParams: n_spins must be >= 1");
  }

  bool operator==(const ModelParams&) const = default;
};

enum class Mode { a, b };

inline const char* to_string(Mode mode) { return mode == Mode::a ? "a" : "b"; }

/// Basis triple. m_offset = m + S runs over 0..N.
struct BasisIndex {
  int m_offset = 0;
  int n_a = 0;
  int n_b = 0;
  bool operator==(const BasisIndex&) const = default;
};

class BasisSpec {
 public:
  BasisSpec(int n_spins, int cutoff_a, int cutoff_b)
      : n_spins_(n_spins), cutoff_a_(cutoff_a), cutoff_b_(cutoff_b) {
    if (n_spins < 1) throw std::invalid_argument("BasisSpec: n_spins must be >= 1");
    if (cutoff_a < 0 || cutoff_b < 0)
      throw std::invalid_argument("BasisSpec: cutoffs must be non-negative");
  }

  int n_spins() const { return n_spins_; }
  int cutoff_a() const { return cutoff_a_; }
  int cutoff_b() const { return cutoff_b_; }
  double spin() const { return 0.5 * n_spins_; }

  Eigen::Index spin_dim() const { return n_spins_ + 1; }
  Eigen::Index dim_a() const { return cutoff_a_ + 1; }
  Eigen::Index dim_b() const { return cutoff_b_ + 1; }
  Eigen::Index dim() const { return spin_dim() * dim_a() * dim_b(); }

  bool contains(const BasisIndex& t) const {
    return t.m_offset >= 0 && t.m_offset <= n_spins_ && t.n_a >= 0 && t.n_a <= cutoff_a_ &&
           t.n_b >= 0 && t.n_b <= cutoff_b_;
  }

  Eigen::Index flatten(const BasisIndex& t) const {
    if (!contains(t))
      throw std::out_of_range("BasisSpec: index (" + std::to_string(t.m_offset) + ", " +
                              std::to_string(t.n_a) + ", " + std::to_string(t.n_b) +
                              ") outside the truncated basis");
    return (static_cast<Eigen::Index>(t.m_offset) * dim_a() + t.n_a) * dim_b() + t.n_b;
  }

  BasisIndex unflatten(Eigen::Index flat) const {
    if (flat < 0 || flat >= dim()) throw std::out_of_range("BasisSpec: flat index out of range");
    BasisIndex t;
    t.n_b = static_cast<int>(flat % dim_b());
    flat /= dim_b();
    t.n_a = static_cast<int>(flat % dim_a());
    t.m_offset = static_cast<int>(flat / dim_a());
    return t;
  }

  /// S_z eigenvalue m for a given offset.
  double m_value(int m_offset) const { return m_offset - spin(); }

  /// Offset m + S for an S_z eigenvalue; rejects values off the half-integer ladder.
  int offset_of(double m) const {
    const double k = m + spin();
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-9 || r < 0 || r > n_spins_)
      throw std::out_of_range("BasisSpec: m = " + std::to_string(m) + " is not on the spin ladder");
    return static_cast<int>(r);
  }

  bool operator==(const BasisSpec&) const = default;

 private:
  int n_spins_;
  int cutoff_a_;
  int cutoff_b_;
};

inline void require_same_basis(const BasisSpec& lhs, const BasisSpec& rhs, const char* where) {
  if (!(lhs == rhs)) throw BasisMismatch(where);
}

struct StateVector {
  BasisSpec basis;
  Eigen::VectorXcd amplitudes;

  StateVector(BasisSpec b, Eigen::VectorXcd amps) : basis(b), amplitudes(std::move(amps)) {
    if (amplitudes.size() != basis.dim())
      throw std::invalid_argument("StateVector: amplitude length does not match basis dimension");
  }

  double norm() const { return amplitudes.norm(); }
};

struct OperatorMatrix {
  BasisSpec basis;
  SparseOp entries;
  bool hermitian = false;

  OperatorMatrix(BasisSpec b, SparseOp m, bool is_hermitian = false)
      : basis(b), entries(std::move(m)), hermitian(is_hermitian) {
    if (entries.rows() != basis.dim() || entries.cols() != basis.dim())
      throw std::invalid_argument("OperatorMatrix: matrix shape does not match basis dimension");
    entries.makeCompressed();
    if (hermitian && hermiticity_defect() >= kHermitianTol)
      throw std::invalid_argument("OperatorMatrix: flagged Hermitian but M != M^dagger");
  }

  Eigen::Index dim() const { return entries.rows(); }

  /// max_ij |M_ij - conj(M_ji)|
  double hermiticity_defect() const {
    const SparseOp diff = entries - SparseOp(entries.adjoint());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
      for (SparseOp::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    return worst;
  }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    if (v.size() != dim()) throw BasisMismatch("operator applied to vector of wrong length");
    return entries * v;
  }

  StateVector apply(const StateVector& s) const {
    require_same_basis(basis, s.basis, "OperatorMatrix::apply");
    return StateVector(basis, entries * s.amplitudes);
  }

  OperatorMatrix adjoint() const { return {basis, SparseOp(entries.adjoint()), hermitian}; }

  /// <psi|M|psi>
  cplx expectation(const Eigen::VectorXcd& psi) const { return psi.dot(entries * psi); }
};

inline double max_abs(const SparseOp& m) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (SparseOp::InnerIterator it(m, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  return worst;
}

inline double max_abs(const OperatorMatrix& m) { return max_abs(m.entries); }

inline OperatorMatrix operator+(const OperatorMatrix& lhs, const OperatorMatrix& rhs) {
  require_same_basis(lhs.basis, rhs.basis, "operator+");
  return {lhs.basis, SparseOp(lhs.entries + rhs.entries), lhs.hermitian && rhs.hermitian};
}

inline OperatorMatrix operator-(const OperatorMatrix& lhs, const OperatorMatrix& rhs) {
  require_same_basis(lhs.basis, rhs.basis, "operator-");
  return {lhs.basis, SparseOp(lhs.entries - rhs.entries), lhs.hermitian && rhs.hermitian};
}

inline OperatorMatrix operator*(const OperatorMatrix& lhs, const OperatorMatrix& rhs) {
  require_same_basis(lhs.basis, rhs.basis, "operator*");
  return {lhs.basis, SparseOp(lhs.entries * rhs.entries), false};
}

inline OperatorMatrix operator*(double s, const OperatorMatrix& op) {
  return {op.basis, SparseOp(cplx(s) * op.entries), op.hermitian};
}

inline OperatorMatrix operator*(cplx s, const OperatorMatrix& op) {
  return {op.basis, SparseOp(s * op.entries), op.hermitian && s.imag() == 0.0};
}

inline OperatorMatrix commutator(const OperatorMatrix& lhs, const OperatorMatrix& rhs) {
  require_same_basis(lhs.basis, rhs.basis, "commutator");
  return {lhs.basis, SparseOp(lhs.entries * rhs.entries - rhs.entries * lhs.entries), false};
}

inline OperatorMatrix identity(const BasisSpec& basis) {
  SparseOp id(basis.dim(), basis.dim());
  id.setIdentity();
  return {basis, std::move(id), true};
}

namespace detail {

using Triplets = std::vector<Eigen::Triplet<cplx>>;

/// Small factor matrix on one tensor slot, stored as triplets.
struct Factor {
  Eigen::Index dim;
  Triplets entries;

  static Factor identity(Eigen::Index n) {
    Factor f{n, {}};
    for (Eigen::Index i = 0; i < n; ++i) f.entries.emplace_back(i, i, 1.0);
    return f;
  }
};

/// spin (x) mode_a (x) mode_b in the documented index order.
inline SparseOp kron3(const Factor& spin, const Factor& a, const Factor& b) {
  const Eigen::Index n = spin.dim * a.dim * b.dim;
  Triplets out;
  out.reserve(spin.entries.size() * a.entries.size() * b.entries.size());
  for (const auto& s : spin.entries)
    for (const auto& x : a.entries)
      for (const auto& y : b.entries) {
        const Eigen::Index row = (s.row() * a.dim + x.row()) * b.dim + y.row();
        const Eigen::Index col = (s.col() * a.dim + x.col()) * b.dim + y.col();
        out.emplace_back(row, col, s.value() * x.value() * y.value());
      }
  SparseOp m(n, n);
  m.setFromTriplets(out.begin(), out.end());
  m.prune(cplx(0.0));
  return m;
}

/// S_+ on the |S, m> ladder, m ascending.
inline Factor spin_raise(int n_spins) {
  const double s = 0.5 * n_spins;
  Factor f{n_spins + 1, {}};
  for (int k = 0; k < n_spins; ++k) {
    const double m = k - s;
    f.entries.emplace_back(k + 1, k, std::sqrt(s * (s + 1) - m * (m + 1)));
  }
  return f;
}

inline Factor transpose(const Factor& f) {
  Factor t{f.dim, {}};
  for (const auto& e : f.entries) t.entries.emplace_back(e.col(), e.row(), std::conj(e.value()));
  return t;
}

inline Factor lowering(int cutoff) {
  Factor f{cutoff + 1, {}};
  for (int n = 1; n <= cutoff; ++n) f.entries.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  return f;
}

}  // namespace detail

struct SpinOperators {
  OperatorMatrix x;
  OperatorMatrix y;
  OperatorMatrix z;
};

inline SpinOperators build_spin_operators(const BasisSpec& basis) {
  using detail::Factor;
  const Factor plus = detail::spin_raise(basis.n_spins());
  const Factor minus = detail::transpose(plus);
  const Factor ia = Factor::identity(basis.dim_a());
  const Factor ib = Factor::identity(basis.dim_b());

  const SparseOp sp = detail::kron3(plus, ia, ib);
  const SparseOp sm = detail::kron3(minus, ia, ib);

  Factor sz{basis.spin_dim(), {}};
  for (int k = 0; k <= basis.n_spins(); ++k) sz.entries.emplace_back(k, k, basis.m_value(k));

  const cplx half_i(0.0, 0.5);
  return {OperatorMatrix(basis, SparseOp(0.5 * (sp + sm)), true),
          OperatorMatrix(basis, SparseOp(-half_i * (sp - sm)), true),
          OperatorMatrix(basis, detail::kron3(sz, ia, ib), true)};
}

struct BosonOperators {
  OperatorMatrix annihilate;
  OperatorMatrix create;

  OperatorMatrix number() const {
    OperatorMatrix n = create * annihilate;
    n.hermitian = true;
    return n;
  }
};

inline BosonOperators build_boson_operators(const BasisSpec& basis, Mode mode) {
  using detail::Factor;
  const Factor spin_id = Factor::identity(basis.spin_dim());
  SparseOp lower = mode == Mode::a
                       ? detail::kron3(spin_id, detail::lowering(basis.cutoff_a()), Factor::identity(basis.dim_b()))
                       : detail::kron3(spin_id, Factor::identity(basis.dim_a()), detail::lowering(basis.cutoff_b()));
  SparseOp raise = lower.adjoint();
  return {OperatorMatrix(basis, std::move(lower)), OperatorMatrix(basis, std::move(raise))};
}

/// H = w_a a^+a + w_b b^+b + Delta S_z + (2 g_a/sqrt N) S_x (a^+ + a) + (2 i g_b/sqrt N) S_y (b^+ - b)
inline OperatorMatrix build_hamiltonian(const ModelParams& params, const BasisSpec& basis) {
  params.validate();
  if (params.n_spins != basis.n_spins())
    throw BasisMismatch("Hamiltonian n_spins " + std::to_string(params.n_spins) +
                        " vs basis n_spins " + std::to_string(basis.n_spins()));
  const auto spin = build_spin_operators(basis);
  const auto a = build_boson_operators(basis, Mode::a);
  const auto b = build_boson_operators(basis, Mode::b);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(params.n_spins));

  SparseOp h = params.omega_a * SparseOp(a.create.entries * a.annihilate.entries);
  h += params.omega_b * SparseOp(b.create.entries * b.annihilate.entries);
  h += params.delta * spin.z.entries;
  h += (2.0 * params.g_a * inv_sqrt_n) * SparseOp(spin.x.entries * (a.create.entries + a.annihilate.entries));
  h += cplx(0.0, 2.0 * params.g_b * inv_sqrt_n) *
       SparseOp(spin.y.entries * (b.create.entries - b.annihilate.entries));
  h.prune(cplx(0.0));

  // Round the last bits so that H is exactly self-adjoint in storage.
  SparseOp sym = 0.5 * (h + SparseOp(h.adjoint()));
  return {basis, std::move(sym), true};
}

/// Pi = exp{i pi (a^+a + b^+b + S_z + S)}: diagonal with entries (-1)^(n_a + n_b + m + S).
inline OperatorMatrix build_parity(const BasisSpec& basis) {
  SparseOp p(basis.dim(), basis.dim());
  p.reserve(Eigen::VectorXi::Constant(basis.dim(), 1));
  for (Eigen::Index i = 0; i < basis.dim(); ++i) {
    const BasisIndex t = basis.unflatten(i);
    p.insert(i, i) = ((t.m_offset + t.n_a + t.n_b) % 2 == 0) ? 1.0 : -1.0;
  }
  return {basis, std::move(p), true};
}

/// Parity eigenvalue (+1 / -1) of a basis state.
inline int parity_of(const BasisSpec& basis, Eigen::Index flat) {
  const BasisIndex t = basis.unflatten(flat);
  return ((t.m_offset + t.n_a + t.n_b) % 2 == 0) ? 1 : -1;
}

/// U(1) charge C = a_l^+ a_l - a_r^+ a_r + S_z with a_l = (a - b)/sqrt2, a_r = (a + b)/sqrt2.
inline OperatorMatrix build_charge(const BasisSpec& basis) {
  const auto a = build_boson_operators(basis, Mode::a);
  const auto b = build_boson_operators(basis, Mode::b);
  const double r = 1.0 / std::numbers::sqrt2;
  const SparseOp al = r * (a.annihilate.entries - b.annihilate.entries);
  const SparseOp ar = r * (a.annihilate.entries + b.annihilate.entries);
  SparseOp c = SparseOp(SparseOp(al.adjoint()) * al) - SparseOp(SparseOp(ar.adjoint()) * ar) +
               build_spin_operators(basis).z.entries;
  c.prune(cplx(0.0), 1e-15);
  SparseOp sym = 0.5 * (c + SparseOp(c.adjoint()));
  return {basis, std::move(sym), true};
}

inline StateVector basis_state(const BasisSpec& basis, const BasisIndex& index) {
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(basis.dim());
  amps(basis.flatten(index)) = 1.0;
  return {basis, std::move(amps)};
}

/// Spin amplitudes of exp(-i phi S_z) exp(-i theta S_y) |m = -S>, m ascending.
///
/// The resulting spin points along (-sin t cos p, -sin t sin p, -cos t): theta is
/// measured from the south pole, so theta = pi/2, phi = 0 gives |-S>_x.
inline Eigen::VectorXcd coherent_spin_amplitudes(int n_spins, double theta, double phi) {
  const double s = 0.5 * n_spins;
  const double c = std::cos(0.5 * theta);
  const double sn = -std::sin(0.5 * theta);
  Eigen::VectorXcd amps(n_spins + 1);
  for (int k = 0; k <= n_spins; ++k) {
    // sqrt(binomial(N, k)) via lgamma stays finite for large N.
    const double log_binom = std::lgamma(n_spins + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_spins - k + 1.0);
    const double mag = std::exp(0.5 * log_binom) * std::pow(c, n_spins - k) * std::pow(sn, k);
    const double m = k - s;
    amps(k) = mag * std::exp(cplx(0.0, -phi * m));
  }
  return amps;
}

inline StateVector spin_coherent_state(const BasisSpec& basis, double theta, double phi, int n_a, int n_b) {
  if (!std::isfinite(theta) || !std::isfinite(phi))
    throw std::invalid_argument("spin_coherent_state: angles must be finite");
  if (n_a < 0 || n_a > basis.cutoff_a() || n_b < 0 || n_b > basis.cutoff_b())
    throw std::out_of_range("spin_coherent_state: Fock index outside the truncated basis");
  const Eigen::VectorXcd spin = coherent_spin_amplitudes(basis.n_spins(), theta, phi);
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(basis.dim());
  for (int k = 0; k <= basis.n_spins(); ++k) amps(basis.flatten({k, n_a, n_b})) = spin(k);
  amps.normalize();
  return {basis, std::move(amps)};
}

/// Probability in the top Fock layers n_a = cutoff_a or n_b = cutoff_b.
inline double leakage(const BasisSpec& basis, const Eigen::VectorXcd& psi) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    const BasisIndex t = basis.unflatten(i);
    if (t.n_a == basis.cutoff_a() || t.n_b == basis.cutoff_b()) total += std::norm(psi(i));
  }
  return std::min(1.0, total);
}

inline double leakage(const StateVector& state) { return leakage(state.basis, state.amplitudes); }

}  // namespace tmd
