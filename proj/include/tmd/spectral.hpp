#pragma once

// Full eigendecomposition of the Hamiltonian and spectral-propagation time
// evolution |psi(t)> = sum_k c_k exp(-i E_k t) |E_k>.
//
// The decomposition is stored per symmetry block. When H commutes with the
// parity operator (always true for the two-mode Dicke Hamiltonian, also under
// truncation) the two parity sectors are diagonalized separately, which cuts
// the dense work by a factor of four. Real Hamiltonians use a real solver and
// keep real eigenvectors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "tmd/detail/lapack.hpp"
#include "tmd/model.hpp"

namespace tmd {

/// One invariant subspace of H: a subset of basis states and the eigenpairs within it.
struct EigenBlock {
  std::vector<Eigen::Index> states;  // flat basis indices, ascending
  Eigen::VectorXd energies;          // ascending within the block
  std::variant<Eigen::MatrixXd, Eigen::MatrixXcd> vectors;

  Eigen::Index size() const { return static_cast<Eigen::Index>(states.size()); }
  bool is_real() const { return std::holds_alternative<Eigen::MatrixXd>(vectors); }

  /// Restriction of a full-length vector to this block's states.
  Eigen::VectorXcd gather(const Eigen::VectorXcd& full) const {
    Eigen::VectorXcd out(size());
    for (Eigen::Index i = 0; i < size(); ++i) out(i) = full(states[i]);
    return out;
  }

  /// V^dagger x for a block-local vector x.
  Eigen::VectorXcd to_eigenbasis(const Eigen::VectorXcd& local) const {
    return std::visit(
        [&](const auto& v) -> Eigen::VectorXcd {
          using M = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<M, Eigen::MatrixXd>) {
            Eigen::VectorXcd out(v.cols());
            out.real() = v.transpose() * local.real();
            out.imag() = v.transpose() * local.imag();
            return out;
          } else {
            return v.adjoint() * local;
          }
        },
        vectors);
  }

  /// V c for block eigen-coefficients c.
  Eigen::VectorXcd from_eigenbasis(const Eigen::VectorXcd& coeffs) const {
    return std::visit(
        [&](const auto& v) -> Eigen::VectorXcd {
          using M = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<M, Eigen::MatrixXd>) {
            Eigen::VectorXcd out(v.rows());
            out.real() = v * coeffs.real();
            out.imag() = v * coeffs.imag();
            return out;
          } else {
            return v * coeffs;
          }
        },
        vectors);
  }

  Eigen::VectorXcd column(Eigen::Index k) const {
    return std::visit([&](const auto& v) -> Eigen::VectorXcd { return v.col(k).template cast<cplx>(); },
                      vectors);
  }
};

class SpectralDecomposition {
 public:
  struct Location {
    int block;
    Eigen::Index local;
  };

  SpectralDecomposition(BasisSpec basis, std::vector<EigenBlock> blocks, std::optional<ModelParams> params)
      : basis_(basis), blocks_(std::move(blocks)), params_(params) {
    struct Entry {
      double energy;
      int block;
      Eigen::Index local;
    };
    std::vector<Entry> entries;
    entries.reserve(basis_.dim());
    for (int b = 0; b < static_cast<int>(blocks_.size()); ++b)
      for (Eigen::Index k = 0; k < blocks_[b].size(); ++k) entries.push_back({blocks_[b].energies(k), b, k});
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
      if (x.energy != y.energy) return x.energy < y.energy;
      return x.block < y.block;
    });
    energies_.resize(static_cast<Eigen::Index>(entries.size()));
    order_.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      energies_(static_cast<Eigen::Index>(k)) = entries[k].energy;
      order_.push_back({entries[k].block, entries[k].local});
    }
    global_of_.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) global_of_[b].resize(blocks_[b].size());
    for (std::size_t k = 0; k < order_.size(); ++k)
      global_of_[order_[k].block][order_[k].local] = static_cast<Eigen::Index>(k);
  }

  const BasisSpec& basis() const { return basis_; }
  Eigen::Index dim() const { return energies_.size(); }
  const Eigen::VectorXd& eigenvalues() const { return energies_; }
  const std::vector<EigenBlock>& blocks() const { return blocks_; }
  const std::optional<ModelParams>& params() const { return params_; }
  Location location(Eigen::Index k) const { return order_[k]; }
  Eigen::Index global_index(int block, Eigen::Index local) const { return global_of_[block][local]; }

  /// Spectral radius, used as the scale for degeneracy and residual tolerances.
  double norm_estimate() const {
    if (dim() == 0) return 0.0;
    return std::max(std::abs(energies_(0)), std::abs(energies_(dim() - 1)));
  }

  /// Full-length eigenvector |E_k>.
  Eigen::VectorXcd eigenvector(Eigen::Index k) const {
    const auto [b, local] = order_[k];
    const EigenBlock& blk = blocks_[b];
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(basis_.dim());
    const Eigen::VectorXcd col = blk.column(local);
    for (Eigen::Index i = 0; i < blk.size(); ++i) out(blk.states[i]) = col(i);
    return out;
  }

  /// c_k = <E_k|psi>, in ascending-energy order.
  Eigen::VectorXcd project(const Eigen::VectorXcd& psi) const {
    if (psi.size() != basis_.dim()) throw BasisMismatch("project: vector length");
    Eigen::VectorXcd c(dim());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Eigen::VectorXcd local = blocks_[b].to_eigenbasis(blocks_[b].gather(psi));
      for (Eigen::Index k = 0; k < local.size(); ++k) c(global_of_[b][k]) = local(k);
    }
    return c;
  }

  /// sum_k c_k |E_k>.
  Eigen::VectorXcd expand(const Eigen::VectorXcd& c) const {
    if (c.size() != dim()) throw std::invalid_argument("expand: coefficient length");
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis_.dim());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const EigenBlock& blk = blocks_[b];
      Eigen::VectorXcd local(blk.size());
      for (Eigen::Index k = 0; k < blk.size(); ++k) local(k) = c(global_of_[b][k]);
      const Eigen::VectorXcd v = blk.from_eigenbasis(local);
      for (Eigen::Index i = 0; i < blk.size(); ++i) psi(blk.states[i]) = v(i);
    }
    return psi;
  }

  /// O_kk = <E_k|O|E_k> (real part; O must be Hermitian).
  Eigen::VectorXd diagonal_elements(const OperatorMatrix& op) const;

  /// Groups of consecutive eigenvalues closer than rel_tol * ||H||, as [begin, end) ranges.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> degenerate_clusters(double rel_tol = 1e-9) const {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
    const double tol = rel_tol * std::max(1.0, norm_estimate());
    Eigen::Index begin = 0;
    for (Eigen::Index k = 1; k <= dim(); ++k) {
      if (k == dim() || energies_(k) - energies_(k - 1) >= tol) {
        out.emplace_back(begin, k);
        begin = k;
      }
    }
    return out;
  }

 private:
  BasisSpec basis_;
  std::vector<EigenBlock> blocks_;
  std::optional<ModelParams> params_;
  Eigen::VectorXd energies_;
  std::vector<Location> order_;
  std::vector<std::vector<Eigen::Index>> global_of_;
};

namespace detail {

/// Rows of `op` in `row_states`, columns in `col_states`, in local indices.
inline SparseOp restrict_operator(const OperatorMatrix& op, const std::vector<Eigen::Index>& row_states,
                                  const std::vector<Eigen::Index>& col_states) {
  std::vector<Eigen::Index> local(op.dim(), -1);
  for (std::size_t i = 0; i < col_states.size(); ++i) local[col_states[i]] = static_cast<Eigen::Index>(i);
  std::vector<Eigen::Triplet<cplx>> trips;
  for (std::size_t i = 0; i < row_states.size(); ++i)
    for (SparseOp::InnerIterator it(op.entries, row_states[i]); it; ++it)
      if (local[it.col()] >= 0) trips.emplace_back(static_cast<Eigen::Index>(i), local[it.col()], it.value());
  SparseOp out(static_cast<Eigen::Index>(row_states.size()), static_cast<Eigen::Index>(col_states.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace detail

inline Eigen::VectorXd SpectralDecomposition::diagonal_elements(const OperatorMatrix& op) const {
  require_same_basis(basis_, op.basis, "diagonal_elements");
  if (!op.hermitian) throw std::invalid_argument("diagonal_elements: operator must be Hermitian");
  Eigen::VectorXd out(dim());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const EigenBlock& blk = blocks_[b];
    const SparseOp ob = detail::restrict_operator(op, blk.states, blk.states);
    std::visit(
        [&](const auto& v) {
          constexpr Eigen::Index kChunk = 512;
          for (Eigen::Index start = 0; start < v.cols(); start += kChunk) {
            const Eigen::Index width = std::min(kChunk, v.cols() - start);
            const Eigen::MatrixXcd cols = v.middleCols(start, width).template cast<cplx>();
            const Eigen::MatrixXcd ov = ob * cols;
            for (Eigen::Index k = 0; k < width; ++k)
              out(global_of_[b][start + k]) = cols.col(k).dot(ov.col(k)).real();
          }
        },
        blk.vectors);
  }
  return out;
}

struct DiagonalizeOptions {
  /// Split into parity sectors when H commutes with the parity operator.
  bool use_parity_blocks = true;
};

namespace detail {

inline bool commutes_with_parity(const OperatorMatrix& h) {
  for (Eigen::Index r = 0; r < h.entries.outerSize(); ++r)
    for (SparseOp::InnerIterator it(h.entries, r); it; ++it)
      if (it.value() != cplx(0.0) && parity_of(h.basis, it.row()) != parity_of(h.basis, it.col())) return false;
  return true;
}

inline bool is_real(const SparseOp& m) {
  for (Eigen::Index r = 0; r < m.outerSize(); ++r)
    for (SparseOp::InnerIterator it(m, r); it; ++it)
      if (it.value().imag() != 0.0) return false;
  return true;
}

/// Rotate each eigenvector so its first significant component is real and positive.
template <class Matrix>
void fix_phases(Matrix& v) {
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    const double scale = v.col(k).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const auto x = v(i, k);
      if (std::abs(x) > 1e-8 * scale) {
        if constexpr (std::is_same_v<Matrix, Eigen::MatrixXd>) {
          if (x < 0) v.col(k) *= -1.0;
        } else {
          v.col(k) *= std::conj(x) / std::abs(x);
        }
        break;
      }
    }
  }
}

inline EigenBlock diagonalize_block(const OperatorMatrix& h, std::vector<Eigen::Index> states, bool real) {
  const Eigen::Index n = static_cast<Eigen::Index>(states.size());
  std::vector<Eigen::Index> local(h.dim(), -1);
  for (Eigen::Index i = 0; i < n; ++i) local[states[i]] = i;

  EigenBlock blk;
  blk.states = std::move(states);
  if (real) {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (SparseOp::InnerIterator it(h.entries, blk.states[i]); it; ++it) {
        const Eigen::Index j = local[it.col()];
        if (j < 0) throw std::logic_error("diagonalize: block is not invariant under H");
        dense(i, j) = it.value().real();
      }
    blk.energies = syevd_inplace(dense);
    fix_phases(dense);
    blk.vectors = std::move(dense);
  } else {
    Eigen::MatrixXcd dense = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (SparseOp::InnerIterator it(h.entries, blk.states[i]); it; ++it) {
        const Eigen::Index j = local[it.col()];
        if (j < 0) throw std::logic_error("diagonalize: block is not invariant under H");
        dense(i, j) = it.value();
      }
    blk.energies = heevd_inplace(dense);
    fix_phases(dense);
    blk.vectors = std::move(dense);
  }
  return blk;
}

}  // namespace detail

inline SpectralDecomposition diagonalize(const OperatorMatrix& h, std::optional<ModelParams> params = std::nullopt,
                                         const DiagonalizeOptions& options = {}) {
  if (!h.hermitian) throw std::invalid_argument("diagonalize: operator is not flagged Hermitian");
  const bool real = detail::is_real(h.entries);
  std::vector<std::vector<Eigen::Index>> sectors;
  if (options.use_parity_blocks && detail::commutes_with_parity(h)) {
    sectors.resize(2);
    for (Eigen::Index i = 0; i < h.dim(); ++i) sectors[parity_of(h.basis, i) > 0 ? 0 : 1].push_back(i);
  } else {
    sectors.emplace_back(h.dim());
    for (Eigen::Index i = 0; i < h.dim(); ++i) sectors[0][i] = i;
  }
  std::vector<EigenBlock> blocks;
  for (auto& s : sectors)
    if (!s.empty()) blocks.push_back(detail::diagonalize_block(h, std::move(s), real));
  SpectralDecomposition spec(h.basis, std::move(blocks), params);

  // Spot-check residuals so that a faulty dense solver cannot pass silently.
  const double tol = 1e-8 * std::max(1.0, spec.norm_estimate());
  for (Eigen::Index k : {Eigen::Index{0}, spec.dim() / 2, spec.dim() - 1}) {
    const Eigen::VectorXcd v = spec.eigenvector(k);
    const double r = (h.entries * v - spec.eigenvalues()(k) * v).norm();
    if (!(r <= tol))
      throw NumericalError("diagonalize: eigenpair residual " + std::to_string(r) + " exceeds " + std::to_string(tol));
  }
  return spec;
}

/// Time-stamped samples with run metadata.
struct TimeSeries {
  std::vector<double> times;
  std::vector<cplx> values;
  std::string label;
  std::string initial_state;
  std::optional<ModelParams> params;
  std::vector<double> leakage;  // per sample, empty when not tracked
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return times.size(); }

  double leakage_max() const {
    return leakage.empty() ? 0.0 : *std::max_element(leakage.begin(), leakage.end());
  }

  std::vector<double> real_values() const {
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](cplx v) { return v.real(); });
    return out;
  }

  double max_imaginary() const {
    double worst = 0.0;
    for (const cplx& v : values) worst = std::max(worst, std::abs(v.imag()));
    return worst;
  }

  void validate() const {
    if (values.size() != times.size()) throw std::invalid_argument("TimeSeries: values/times length mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw std::invalid_argument("TimeSeries: times must be strictly increasing");
  }
};

/// Throws NumericalError when the series leaked more than `threshold` into the top Fock layers.
inline void require_leakage_below(const TimeSeries& series, double threshold) {
  if (series.leakage_max() > threshold)
    throw NumericalError("leakage " + std::to_string(series.leakage_max()) + " exceeds tolerance " +
                         std::to_string(threshold) + " in series '" + series.label + "'");
}

inline std::vector<double> linspace(double start, double stop, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {start};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

inline void require_increasing(std::span<const double> times) {
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("time grid must be strictly increasing");
}

/// c_k = <E_k|psi0>.
inline Eigen::VectorXcd amplitudes(const SpectralDecomposition& spec, const StateVector& psi0) {
  require_same_basis(spec.basis(), psi0.basis, "amplitudes");
  return spec.project(psi0.amplitudes);
}

inline StateVector evolve(const SpectralDecomposition& spec, const StateVector& psi0, double t) {
  require_same_basis(spec.basis(), psi0.basis, "evolve");
  Eigen::VectorXcd c = spec.project(psi0.amplitudes);
  for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::exp(cplx(0.0, -spec.eigenvalues()(k) * t));
  return {spec.basis(), spec.expand(c)};
}

namespace detail {

/// Runs body(i) for i in [0, count) on up to `workers` threads.
template <class Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  const std::size_t n_threads = std::clamp<std::size_t>(workers < 1 ? 1 : workers, 1, std::max<std::size_t>(count, 1));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < n_threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += n_threads) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Propagation by the stored eigensystem. Samples are independent and may be
/// computed concurrently.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const SpectralDecomposition& spec, int workers = 1) : spec_(&spec), workers_(workers) {}

  const BasisSpec& basis() const { return spec_->basis(); }
  const SpectralDecomposition& decomposition() const { return *spec_; }

  /// visit(i, psi(times[i])) for every time. With workers > 1 the visitor is
  /// called concurrently for distinct i.
  template <class Visit>
  void sample(const StateVector& psi0, std::span<const double> times, Visit&& visit) const {
    require_same_basis(spec_->basis(), psi0.basis, "SpectralPropagator::sample");
    const Eigen::VectorXcd c0 = spec_->project(psi0.amplitudes);
    const Eigen::VectorXd& e = spec_->eigenvalues();
    detail::parallel_for(times.size(), workers_, [&](std::size_t i) {
      Eigen::VectorXcd c(c0.size());
      for (Eigen::Index k = 0; k < c.size(); ++k) c(k) = c0(k) * std::exp(cplx(0.0, -e(k) * times[i]));
      const Eigen::VectorXcd psi = spec_->expand(c);
      visit(i, psi);
    });
  }

 private:
  const SpectralDecomposition* spec_;
  int workers_;
};

/// O(t) = <psi(t)|O|psi(t)> with per-sample leakage.
template <class Propagator>
TimeSeries expectation_series(const Propagator& propagator, const StateVector& psi0, const OperatorMatrix& op,
                              std::span<const double> times, std::string label = "expectation") {
  require_same_basis(propagator.basis(), psi0.basis, "expectation_series");
  require_same_basis(propagator.basis(), op.basis, "expectation_series");
  require_increasing(times);
  TimeSeries out;
  out.label = std::move(label);
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  out.leakage.resize(times.size());
  propagator.sample(psi0, times, [&](std::size_t i, const Eigen::VectorXcd& psi) {
    out.values[i] = psi.dot(op.entries * psi);
    out.leakage[i] = leakage(op.basis, psi);
  });
  return out;
}

inline TimeSeries expectation_series(const SpectralDecomposition& spec, const StateVector& psi0,
                                     const OperatorMatrix& op, std::span<const double> times,
                                     std::string label = "expectation") {
  return expectation_series(SpectralPropagator(spec), psi0, op, times, std::move(label));
}

}  // namespace tmd
