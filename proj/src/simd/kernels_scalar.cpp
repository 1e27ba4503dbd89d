#include "tplc/simd/kernels.hpp"

namespace tplc::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vec_mat_scalar(const double* x, const double* W, std::size_t rows, std::size_t cols,
                    std::size_t ld, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = x[r];
    const double* row = W + r * ld;
    for (std::size_t c = 0; c < cols; ++c) y[c] += xr * row[c];
  }
}

void mat_vec_scalar(const double* W, std::size_t rows, std::size_t cols, std::size_t ld,
                    const double* v, double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] += dot_scalar(W + r * ld, v, cols);
}

void add_outer_scalar(const double* x, std::size_t rows, const double* g, std::size_t cols,
                      double* W, std::size_t ld) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], g, W + r * ld, cols);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar",        dot_scalar,     axpy_scalar,
                                 vec_mat_scalar,  mat_vec_scalar, add_outer_scalar};
  return table;
}

}  // namespace tplc::simd
