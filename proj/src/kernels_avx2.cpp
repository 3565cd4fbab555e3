// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma;
// nothing here may run before the dispatcher has checked CPUID.

#include "sasv/kernels.hpp"

#include <immintrin.h>

namespace sasv::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double *a, const double *b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i)
    s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double *x, double *y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i)
    y[i] += alpha * x[i];
}

void gemv_avx2(const double *w, const double *x, const double *bias, double *y,
               std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    y[r] = bias[r] + dot_avx2(w + r * cols, x, cols);
}

void gemv_t_avx2(const double *w, const double *x, double *y, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c)
    y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    axpy_avx2(x[r], w + r * cols, y, cols);
}

void ger_avx2(double *w, const double *x, const double *y, std::size_t rows,
              std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    axpy_avx2(x[r], y, w + r * cols, cols);
}

} // namespace

const KernelTable &avx2_table() noexcept {
  static const KernelTable table{"avx2", dot_avx2, gemv_avx2, gemv_t_avx2, ger_avx2,
                                 axpy_avx2};
  return table;
}

} // namespace sasv::kernels::detail
