#pragma once

// Process-level guard for executables: if the linked OpenBLAS picked a faulty
// real-arithmetic kernel, restart the process once with an explicit kernel
// matching the CPU's vector extensions.

#include <cstdlib>
#include <fstream>
#include <string>

#include "tmd/detail/lapack.hpp"

#ifdef __linux__
#include <unistd.h>
#endif

namespace tmd {

namespace detail {

inline std::string suggested_openblas_core() {
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  bool avx512 = false, avx2 = false;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("flags", 0) != 0) continue;
    avx512 = line.find(" avx512f") != std::string::npos;
    avx2 = line.find(" avx2") != std::string::npos;
    break;
  }
  if (avx512) return "SkylakeX";
  if (avx2) return "Haswell";
  return "Prescott";
}

}  // namespace detail

/// Call first thing in main(). Returns normally when the dense solver is sound
/// (possibly after one re-exec); otherwise leaves the decision to the solver,
/// which throws NumericalError on use.
inline void ensure_working_lapack(char** argv) {
  if (detail::lapack_real_path_ok()) return;
#ifdef __linux__
  if (std::getenv("OPENBLAS_CORETYPE") != nullptr) return;
  const std::string core = detail::suggested_openblas_core();
  ::setenv("OPENBLAS_CORETYPE", core.c_str(), 1);
  ::execv("/proc/self/exe", argv);
#else
  (void)argv;
#endif
}

}  // namespace tmd
