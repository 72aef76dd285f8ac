#pragma once

// Lanczos approximation of exp(-i tau A) v for sparse Hermitian A, with
// adaptive substeps. Used as the fast path for long trajectories in large
// truncated bases where a dense eigendecomposition is out of reach, and for
// applying the perturbation exp(i dphi G) in echo-mode correlators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>

#include "tmd/model.hpp"

namespace tmd {

struct KrylovOptions {
  int max_dim = 40;
  /// Target error per unit of propagated time (2-norm of the state).
  double tolerance = 1e-12;
};

namespace detail {

struct LanczosBasis {
  Eigen::MatrixXcd v;  // columns q_0..q_{m-1}
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;  // beta(j) couples q_j and q_{j+1}; beta(m-1) is the residual norm
  int m = 0;
  bool exhausted = false;  // invariant subspace found
};

inline LanczosBasis lanczos(const SparseOp& a, const Eigen::VectorXcd& start, int max_dim) {
  const Eigen::Index n = start.size();
  const int m_cap = static_cast<int>(std::min<Eigen::Index>(max_dim, n));
  LanczosBasis lb;
  lb.v.resize(n, m_cap);
  lb.alpha.setZero(m_cap);
  lb.beta.setZero(m_cap);
  lb.v.col(0) = start / start.norm();
  for (int j = 0; j < m_cap; ++j) {
    Eigen::VectorXcd w = a * lb.v.col(j);
    lb.alpha(j) = lb.v.col(j).dot(w).real();
    w -= lb.alpha(j) * lb.v.col(j);
    if (j > 0) w -= lb.beta(j - 1) * lb.v.col(j - 1);
    // Full reorthogonalization, twice.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXcd h = lb.v.leftCols(j + 1).adjoint() * w;
      w.noalias() -= lb.v.leftCols(j + 1) * h;
    }
    lb.beta(j) = w.norm();
    lb.m = j + 1;
    const double scale = std::max(1.0, std::abs(lb.alpha(j)));
    if (lb.beta(j) <= 1e-14 * scale) {
      lb.exhausted = true;
      break;
    }
    if (j + 1 < m_cap) lb.v.col(j + 1) = w / lb.beta(j);
  }
  return lb;
}

}  // namespace detail

/// exp(-i tau A) v for Hermitian sparse A.
inline Eigen::VectorXcd expm_hermitian_apply(const SparseOp& a, const Eigen::VectorXcd& v, double tau,
                                             const KrylovOptions& options = {}) {
  const double v_norm = v.norm();
  if (v_norm == 0.0 || tau == 0.0) return v;
  Eigen::VectorXcd psi = v / v_norm;
  double remaining = std::abs(tau);
  const double sign = tau > 0 ? 1.0 : -1.0;
  const double total = remaining;

  while (remaining > 0.0) {
    const detail::LanczosBasis lb = detail::lanczos(a, psi, options.max_dim);
    const int m = lb.m;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      t(j, j) = lb.alpha(j);
      if (j + 1 < m) t(j, j + 1) = t(j + 1, j) = lb.beta(j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::MatrixXd& q = es.eigenvectors();
    const Eigen::VectorXd& theta = es.eigenvalues();

    auto propagate_small = [&](double step) {
      Eigen::VectorXcd y(m);
      for (int k = 0; k < m; ++k) y(k) = std::exp(cplx(0.0, -sign * step * theta(k))) * q(0, k);
      return Eigen::VectorXcd(q.cast<cplx>() * y);
    };

    double step = remaining;
    Eigen::VectorXcd y = propagate_small(step);
    if (!lb.exhausted) {
      // Residual estimate beta_m |e_m^T exp(-i T step) e_1|; halve until it fits the budget.
      const double residual_norm = lb.beta(m - 1);
      for (int tries = 0; tries < 60; ++tries) {
        const double err = residual_norm * std::abs(y(m - 1));
        if (err <= options.tolerance * std::max(step / total, 1e-3)) break;
        step *= 0.5;
        y = propagate_small(step);
      }
    }
    psi = lb.v.leftCols(m) * y;
    psi.normalize();
    remaining -= step;
    if (remaining < 1e-15 * total) remaining = 0.0;
  }
  return v_norm * psi;
}

/// Sequential propagation of one trajectory by Krylov substeps.
class KrylovPropagator {
 public:
  explicit KrylovPropagator(OperatorMatrix hamiltonian, KrylovOptions options = {})
      : h_(std::move(hamiltonian)), options_(options) {
    if (!h_.hermitian) throw std::invalid_argument("KrylovPropagator: Hamiltonian must be Hermitian");
  }

  const BasisSpec& basis() const { return h_.basis; }
  const OperatorMatrix& hamiltonian() const { return h_; }

  /// psi <- exp(-i H dt) psi
  void step(Eigen::VectorXcd& psi, double dt) const { psi = expm_hermitian_apply(h_.entries, psi, dt, options_); }

  template <class Visit>
  void sample(const StateVector& psi0, std::span<const double> times, Visit&& visit) const {
    require_same_basis(h_.basis, psi0.basis, "KrylovPropagator::sample");
    Eigen::VectorXcd psi = psi0.amplitudes;
    double t_now = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] != t_now) step(psi, times[i] - t_now);
      t_now = times[i];
      visit(i, static_cast<const Eigen::VectorXcd&>(psi));
    }
  }

 private:
  OperatorMatrix h_;
  KrylovOptions options_;
};

}  // namespace tmd
