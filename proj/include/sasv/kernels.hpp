#pragma once

// Dense double-precision inner loops used by scoring and the MLP.
//
// Each kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The variant is selected once at runtime from CPUID;
// setting SASV_KERNELS=scalar in the environment forces the reference path.
// The two paths agree to rounding (summation order differs), not bitwise.

#include <cstddef>
#include <string_view>

namespace sasv::kernels {

struct KernelTable {
  std::string_view name;

  /// sum_i a[i] * b[i]
  double (*dot)(const double *a, const double *b, std::size_t n);

  /// y = W x + bias, W row-major (rows x cols).
  void (*gemv)(const double *w, const double *x, const double *bias, double *y,
               std::size_t rows, std::size_t cols);

  /// y = W^T x, W row-major (rows x cols); x has rows entries, y has cols.
  void (*gemv_t)(const double *w, const double *x, double *y, std::size_t rows,
                 std::size_t cols);

  /// W += x y^T, W row-major (rows x cols).
  void (*ger)(double *w, const double *x, const double *y, std::size_t rows,
              std::size_t cols);

  /// y += alpha * x
  void (*axpy)(double alpha, const double *x, double *y, std::size_t n);
};

const KernelTable &scalar_kernels() noexcept;

/// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable *avx2_kernels() noexcept;

/// The table every module calls through.
const KernelTable &active() noexcept;

/// Overrides the active table (tests, benchmarking). Not thread-safe against
/// concurrent kernel calls.
void set_active(const KernelTable &table) noexcept;

} // namespace sasv::kernels
