#include "sasv/kernels.hpp"

namespace sasv::kernels {
namespace {

double dot_scalar(const double *a, const double *b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += a[i] * b[i];
  return s;
}

void gemv_scalar(const double *w, const double *x, const double *bias, double *y,
                 std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    y[r] = bias[r] + dot_scalar(w + r * cols, x, cols);
}

void axpy_scalar(double alpha, const double *x, double *y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    y[i] += alpha * x[i];
}

void gemv_t_scalar(const double *w, const double *x, double *y, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c)
    y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    axpy_scalar(x[r], w + r * cols, y, cols);
}

void ger_scalar(double *w, const double *x, const double *y, std::size_t rows,
                std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    axpy_scalar(x[r], y, w + r * cols, cols);
}

} // namespace

const KernelTable &scalar_kernels() noexcept {
  static const KernelTable table{"scalar", dot_scalar, gemv_scalar, gemv_t_scalar,
                                 ger_scalar, axpy_scalar};
  return table;
}

} // namespace sasv::kernels
