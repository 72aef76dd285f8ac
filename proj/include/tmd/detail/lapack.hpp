#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include <string>

#include "tmd/errors.hpp"

namespace tmd::detail {

/// Some OpenBLAS builds pick a real-arithmetic GEMM kernel that returns wrong
/// results on CPUs whose feature flags it misreads. Eigenvalues survive, but
/// eigenvectors do not. One dsyevd solve on a fixed matrix large enough to
/// reach the blocked code paths detects this once per process.
inline bool lapack_real_path_ok() {
  static const bool ok = [] {
    const lapack_int n = 256;
    Eigen::MatrixXd m(n, n);
    for (lapack_int i = 0; i < n; ++i)
      for (lapack_int j = 0; j < n; ++j) m(i, j) = std::cos(0.37 * (i + 1) * (j + 1)) + (i == j ? 0.01 * i : 0.0);
    Eigen::MatrixXd a = m;
    Eigen::VectorXd w(n);
    if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, w.data()) != 0) return false;
    double worst = 0.0;
    for (lapack_int k = 0; k < n; ++k) {
      double r = 0.0;
      for (lapack_int i = 0; i < n; ++i) {
        double acc = -w(k) * a(i, k);
        for (lapack_int j = 0; j < n; ++j) acc += m(i, j) * a(j, k);
        r += acc * acc;
      }
      worst = std::max(worst, std::sqrt(r));
    }
    return worst < 1e-8 * std::max(1.0, w.cwiseAbs().maxCoeff());
  }();
  return ok;
}

inline void require_lapack_real_path() {
  if (!lapack_real_path_ok())
    throw NumericalError(
        "the linked BLAS/LAPACK returns wrong eigenvectors on this CPU; with OpenBLAS, select a "
        "kernel explicitly, e.g. OPENBLAS_CORETYPE=SkylakeX or Haswell");
}

// Dense Hermitian eigensolvers (divide and conquer). The input matrix is
// overwritten by the orthonormal eigenvectors; eigenvalues come back ascending.

inline Eigen::VectorXd syevd_inplace(Eigen::MatrixXd& a) {
  require_lapack_real_path();
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::VectorXd w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, w.data());
  if (info != 0)
    throw NumericalError("dsyevd failed (info = " + std::to_string(info) + ")");
  return w;
}

inline Eigen::VectorXd heevd_inplace(Eigen::MatrixXcd& a) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::VectorXd w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', n,
                                         a.data(), n, w.data());
  if (info != 0)
    throw NumericalError("zheevd failed (info = " + std::to_string(info) + ")");
  return w;
}

}  // namespace tmd::detail
