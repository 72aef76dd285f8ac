#pragma once

// Ensemble averages for thermalization diagnostics: diagonal ensemble,
// microcanonical shells, infinite-time temporal fluctuations and the
// effective dimension of an initial state.
//
// Degenerate eigenvalue clusters are folded into one vector per cluster,
// u_A = P_A |psi0>, so every quantity below is invariant under rotations of
// the eigenbasis inside a cluster. With rho = sum_A |u_A><u_A|:
//   diagonal average    Tr[rho O]
//   fluctuation         Tr[rho O rho O] - sum_A <u_A|O|u_A>^2
// The fluctuation formula drops the time-independent part of coincident gaps
// E_j - E_k = E_m - E_n between distinct pairs.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "tmd/model.hpp"
#include "tmd/spectral.hpp"

namespace tmd {

struct DiagonalEnsemble {
  Eigen::VectorXd weights;  // |c_k|^2 in ascending-energy order

  double total() const { return weights.sum(); }
};

inline DiagonalEnsemble diagonal_ensemble(const SpectralDecomposition& spec, const StateVector& psi0) {
  return {amplitudes(spec, psi0).cwiseAbs2()};
}

/// <psi0|H|psi0>, evaluated with the same truncated H that produced the spectrum.
inline double energy_expectation(const OperatorMatrix& h, const StateVector& psi0) {
  require_same_basis(h.basis, psi0.basis, "energy_expectation");
  return h.expectation(psi0.amplitudes).real();
}

/// d_eff = 1 / sum_k |c_k|^4
inline double effective_dimension(const Eigen::VectorXcd& c) {
  const double norm2 = c.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-8) throw std::invalid_argument("effective_dimension: amplitudes are not normalized");
  return 1.0 / c.cwiseAbs2().squaredNorm();
}

namespace detail {

/// Cluster-folded representation of the diagonal ensemble.
struct FoldedEnsemble {
  Eigen::VectorXd singleton_weights;     // |c_k|^2 for non-degenerate levels, 0 inside clusters
  std::vector<Eigen::VectorXcd> folded;  // u_A = P_A psi0 for degenerate clusters with weight
};

inline FoldedEnsemble fold(const SpectralDecomposition& spec, const Eigen::VectorXcd& c) {
  FoldedEnsemble out;
  out.singleton_weights = c.cwiseAbs2();
  for (const auto& [begin, end] : spec.degenerate_clusters()) {
    if (end - begin < 2) continue;
    Eigen::VectorXcd coeffs = Eigen::VectorXcd::Zero(c.size());
    double weight = 0.0;
    for (Eigen::Index k = begin; k < end; ++k) {
      coeffs(k) = c(k);
      weight += std::norm(c(k));
      out.singleton_weights(k) = 0.0;
    }
    if (weight > 0.0) out.folded.push_back(spec.expand(coeffs));
  }
  return out;
}

/// sum_{j in b1, k in b2} p_j p_k |<E_j|O|E_k>|^2, processed in column chunks.
inline double weighted_offdiag_sum(const SpectralDecomposition& spec, const OperatorMatrix& op, int b1, int b2,
                                   const Eigen::VectorXd& weights) {
  const EigenBlock& row_blk = spec.blocks()[b1];
  const EigenBlock& col_blk = spec.blocks()[b2];
  const SparseOp ob = restrict_operator(op, row_blk.states, col_blk.states);
  if (ob.nonZeros() == 0) return 0.0;

  auto active_of = [&](const EigenBlock& blk, int b) {
    std::vector<Eigen::Index> idx;
    Eigen::VectorXd w;
    for (Eigen::Index k = 0; k < blk.size(); ++k)
      if (weights(spec.global_index(b, k)) > 0.0) idx.push_back(k);
    w.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) w(static_cast<Eigen::Index>(i)) = weights(spec.global_index(b, idx[i]));
    return std::pair{idx, w};
  };
  const auto [rows, row_w] = active_of(row_blk, b1);
  const auto [cols, col_w] = active_of(col_blk, b2);
  if (rows.empty() || cols.empty()) return 0.0;

  const bool real_path = row_blk.is_real() && col_blk.is_real() && detail::is_real(ob);
  constexpr Eigen::Index kChunk = 256;
  double total = 0.0;

  if (real_path) {
    const Eigen::MatrixXd& vr = std::get<Eigen::MatrixXd>(row_blk.vectors);
    const Eigen::MatrixXd& vc = std::get<Eigen::MatrixXd>(col_blk.vectors);
    const Eigen::SparseMatrix<double, Eigen::RowMajor> obr = ob.real();
    Eigen::MatrixXd vr_active(vr.rows(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) vr_active.col(static_cast<Eigen::Index>(i)) = vr.col(rows[i]);
    for (std::size_t start = 0; start < cols.size(); start += kChunk) {
      const Eigen::Index width = std::min<Eigen::Index>(kChunk, static_cast<Eigen::Index>(cols.size() - start));
      Eigen::MatrixXd vchunk(vc.rows(), width);
      for (Eigen::Index j = 0; j < width; ++j) vchunk.col(j) = vc.col(cols[start + j]);
      const Eigen::MatrixXd y = obr * vchunk;
      const Eigen::MatrixXd z = vr_active.transpose() * y;
      total += (row_w.transpose() * z.cwiseAbs2() * col_w.segment(static_cast<Eigen::Index>(start), width))(0, 0);
    }
    return total;
  }

  auto as_complex = [](const EigenBlock& blk) -> Eigen::MatrixXcd {
    return std::visit([](const auto& v) -> Eigen::MatrixXcd { return v.template cast<cplx>(); }, blk.vectors);
  };
  const Eigen::MatrixXcd vr = as_complex(row_blk);
  const Eigen::MatrixXcd vc = as_complex(col_blk);
  Eigen::MatrixXcd vr_active(vr.rows(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) vr_active.col(static_cast<Eigen::Index>(i)) = vr.col(rows[i]);
  for (std::size_t start = 0; start < cols.size(); start += kChunk) {
    const Eigen::Index width = std::min<Eigen::Index>(kChunk, static_cast<Eigen::Index>(cols.size() - start));
    Eigen::MatrixXcd vchunk(vc.rows(), width);
    for (Eigen::Index j = 0; j < width; ++j) vchunk.col(j) = vc.col(cols[start + j]);
    const Eigen::MatrixXcd y = ob * vchunk;
    const Eigen::MatrixXcd z = vr_active.adjoint() * y;
    total += (row_w.transpose() * z.cwiseAbs2() * col_w.segment(static_cast<Eigen::Index>(start), width))(0, 0);
  }
  return total;
}

inline void require_hermitian(const OperatorMatrix& op, const char* where) {
  if (!op.hermitian) throw std::invalid_argument(std::string(where) + ": observable must be Hermitian");
}

}  // namespace detail

/// Infinite-time average Tr[rho_DE O], exact also for degenerate levels.
inline double diagonal_average(const SpectralDecomposition& spec, const StateVector& psi0, const OperatorMatrix& op) {
  require_same_basis(spec.basis(), op.basis, "diagonal_average");
  detail::require_hermitian(op, "diagonal_average");
  const Eigen::VectorXcd c = amplitudes(spec, psi0);
  const detail::FoldedEnsemble ens = detail::fold(spec, c);
  const Eigen::VectorXd okk = spec.diagonal_elements(op);
  double avg = ens.singleton_weights.dot(okk);
  for (const auto& u : ens.folded) avg += u.dot(op.entries * u).real();
  return avg;
}

struct MicrocanonicalShell {
  double e0 = 0.0;
  double delta_e = 0.0;
  std::vector<Eigen::Index> members;  // ascending-energy indices with |E_k - e0| <= delta_e

  std::size_t count() const { return members.size(); }
};

inline MicrocanonicalShell microcanonical_shell(const SpectralDecomposition& spec, double e0, double delta_e) {
  if (!(delta_e >= 0.0)) throw std::invalid_argument("microcanonical_shell: delta_e must be non-negative");
  MicrocanonicalShell shell{e0, delta_e, {}};
  const Eigen::VectorXd& e = spec.eigenvalues();
  const auto lo = std::lower_bound(e.data(), e.data() + e.size(), e0 - delta_e);
  for (const double* p = lo; p != e.data() + e.size() && *p <= e0 + delta_e; ++p)
    shell.members.push_back(static_cast<Eigen::Index>(p - e.data()));
  return shell;
}

struct MicrocanonicalResult {
  double average = 0.0;
  std::size_t count = 0;
};

/// Unweighted mean of the precomputed O_kk over a shell. Throws NumericalError on an empty shell.
inline MicrocanonicalResult microcanonical_average(const SpectralDecomposition& spec, const Eigen::VectorXd& okk,
                                                   double e0, double delta_e) {
  const MicrocanonicalShell shell = microcanonical_shell(spec, e0, delta_e);
  if (shell.members.empty())
    throw NumericalError("microcanonical shell around E0 = " + std::to_string(e0) + " with dE = " +
                         std::to_string(delta_e) + " contains no eigenstates");
  double acc = 0.0;
  for (Eigen::Index k : shell.members) acc += okk(k);
  return {acc / static_cast<double>(shell.count()), shell.count()};
}

inline MicrocanonicalResult microcanonical_average(const SpectralDecomposition& spec, double e0, double delta_e,
                                                   const OperatorMatrix& op) {
  require_same_basis(spec.basis(), op.basis, "microcanonical_average");
  detail::require_hermitian(op, "microcanonical_average");
  return microcanonical_average(spec, spec.diagonal_elements(op), e0, delta_e);
}

struct ShellScanRow {
  double delta_e = 0.0;
  std::optional<double> average;  // empty shell -> nullopt
  std::size_t count = 0;
};

struct ShellScan {
  std::vector<ShellScanRow> rows;
  /// Longest run [plateau_begin, plateau_end] of non-empty rows whose
  /// consecutive averages differ by less than the relative tolerance.
  std::optional<std::size_t> plateau_begin;
  std::optional<std::size_t> plateau_end;
  std::optional<std::size_t> recommended;

  double plateau_span() const {
    if (!plateau_begin || !plateau_end) return 0.0;
    const double lo = rows[*plateau_begin].delta_e;
    return lo > 0.0 ? rows[*plateau_end].delta_e / lo : std::numeric_limits<double>::infinity();
  }
};

inline ShellScan shell_stability_scan(const SpectralDecomposition& spec, const Eigen::VectorXd& okk, double e0,
                                      std::span<const double> delta_e_grid, double rel_tol = 0.01) {
  if (delta_e_grid.empty()) throw std::invalid_argument("shell_stability_scan: empty delta_e grid");
  ShellScan scan;
  bool any = false;
  for (double de : delta_e_grid) {
    const MicrocanonicalShell shell = microcanonical_shell(spec, e0, de);
    ShellScanRow row{de, std::nullopt, shell.count()};
    if (!shell.members.empty()) {
      double acc = 0.0;
      for (Eigen::Index k : shell.members) acc += okk(k);
      row.average = acc / static_cast<double>(shell.count());
      any = true;
    }
    scan.rows.push_back(row);
  }
  if (!any) throw NumericalError("shell_stability_scan: every shell is empty");

  std::size_t best_begin = 0, best_len = 0;
  std::size_t run_begin = 0, run_len = 0;
  for (std::size_t i = 0; i < scan.rows.size(); ++i) {
    if (!scan.rows[i].average) {
      run_len = 0;
      continue;
    }
    const bool continues = run_len > 0 && [&] {
      const double prev = *scan.rows[i - 1].average;
      const double cur = *scan.rows[i].average;
      const double scale = std::max({std::abs(prev), std::abs(cur), 1e-300});
      return std::abs(cur - prev) < rel_tol * scale;
    }();
    if (continues) {
      ++run_len;
    } else {
      run_begin = i;
      run_len = 1;
    }
    if (run_len > best_len) {
      best_len = run_len;
      best_begin = run_begin;
    }
  }
  scan.plateau_begin = best_begin;
  scan.plateau_end = best_begin + best_len - 1;
  scan.recommended = best_begin + (best_len - 1) / 2;
  return scan;
}

inline ShellScan shell_stability_scan(const SpectralDecomposition& spec, double e0, const OperatorMatrix& op,
                                      std::span<const double> delta_e_grid, double rel_tol = 0.01) {
  require_same_basis(spec.basis(), op.basis, "shell_stability_scan");
  detail::require_hermitian(op, "shell_stability_scan");
  return shell_stability_scan(spec, spec.diagonal_elements(op), e0, delta_e_grid, rel_tol);
}

/// Infinite-time variance of <O>(t) around its mean, in closed form.
inline double long_time_fluctuation(const SpectralDecomposition& spec, const StateVector& psi0,
                                    const OperatorMatrix& op) {
  require_same_basis(spec.basis(), op.basis, "long_time_fluctuation");
  detail::require_hermitian(op, "long_time_fluctuation");
  const Eigen::VectorXcd c = amplitudes(spec, psi0);
  const detail::FoldedEnsemble ens = detail::fold(spec, c);
  const Eigen::VectorXd& p = ens.singleton_weights;

  // Tr[rho_s O rho_s O] over singleton levels, block pair by block pair.
  double trace = 0.0;
  const int n_blocks = static_cast<int>(spec.blocks().size());
  for (int b1 = 0; b1 < n_blocks; ++b1)
    for (int b2 = 0; b2 < n_blocks; ++b2) trace += detail::weighted_offdiag_sum(spec, op, b1, b2, p);

  // Cross terms with folded degenerate clusters.
  std::vector<Eigen::VectorXcd> o_u;
  for (const auto& u : ens.folded) o_u.push_back(op.entries * u);
  for (const auto& ou : o_u) {
    const Eigen::VectorXcd d = spec.project(ou);
    trace += 2.0 * p.dot(d.cwiseAbs2());
  }
  for (std::size_t a = 0; a < ens.folded.size(); ++a)
    for (std::size_t b = 0; b < ens.folded.size(); ++b) trace += std::norm(ens.folded[a].dot(o_u[b]));

  // Remove the A == B terms.
  const Eigen::VectorXd okk = spec.diagonal_elements(op);
  double diag = (p.array() * okk.array()).square().sum();
  for (std::size_t a = 0; a < ens.folded.size(); ++a) diag += std::norm(ens.folded[a].dot(o_u[a]));

  const double value = trace - diag;
  const double scale = std::max(1.0, trace);
  if (value < -1e-10 * scale) throw NumericalError("long_time_fluctuation: negative result, inconsistent spectrum");
  return std::max(0.0, value);
}

struct ThermalizationReport {
  double e0 = 0.0;
  double diag_avg = 0.0;
  double micro_avg = 0.0;
  std::size_t micro_count = 0;
  double micro_delta_e = 0.0;
  double fluctuation = 0.0;
  double d_eff = 1.0;
  ShellScan shell_scan;
  double leakage_max = 0.0;
};

/// Diagonal vs microcanonical comparison at E0 = <psi0|H|psi0>, with the shell
/// width picked by the plateau detector.
inline ThermalizationReport thermalization_report(const SpectralDecomposition& spec, const OperatorMatrix& h,
                                                  const StateVector& psi0, const OperatorMatrix& op,
                                                  std::span<const double> delta_e_grid, double rel_tol = 0.01) {
  ThermalizationReport r;
  r.e0 = energy_expectation(h, psi0);
  r.diag_avg = diagonal_average(spec, psi0, op);
  const Eigen::VectorXd okk = spec.diagonal_elements(op);
  r.shell_scan = shell_stability_scan(spec, okk, r.e0, delta_e_grid, rel_tol);
  const ShellScanRow& pick = r.shell_scan.rows[*r.shell_scan.recommended];
  r.micro_avg = *pick.average;
  r.micro_count = pick.count;
  r.micro_delta_e = pick.delta_e;
  r.fluctuation = long_time_fluctuation(spec, psi0, op);
  r.d_eff = effective_dimension(amplitudes(spec, psi0));
  r.leakage_max = leakage(psi0);
  return r;
}

}  // namespace tmd
