// Built with -mavx2 -mfma on x86-64; only reached after a runtime CPU check.
#include "tplc/simd/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace tplc::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Column blocks of 16 stay in four registers while all rows stream past.
void vec_mat_avx2(const double* x, const double* W, std::size_t rows, std::size_t cols,
                  std::size_t ld, double* y) {
  std::size_t c = 0;
  for (; c + 16 <= cols; c += 16) {
    __m256d y0 = _mm256_loadu_pd(y + c);
    __m256d y1 = _mm256_loadu_pd(y + c + 4);
    __m256d y2 = _mm256_loadu_pd(y + c + 8);
    __m256d y3 = _mm256_loadu_pd(y + c + 12);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = W + r * ld + c;
      const __m256d xr = _mm256_set1_pd(x[r]);
      y0 = _mm256_fmadd_pd(xr, _mm256_loadu_pd(row), y0);
      y1 = _mm256_fmadd_pd(xr, _mm256_loadu_pd(row + 4), y1);
      y2 = _mm256_fmadd_pd(xr, _mm256_loadu_pd(row + 8), y2);
      y3 = _mm256_fmadd_pd(xr, _mm256_loadu_pd(row + 12), y3);
    }
    _mm256_storeu_pd(y + c, y0);
    _mm256_storeu_pd(y + c + 4, y1);
    _mm256_storeu_pd(y + c + 8, y2);
    _mm256_storeu_pd(y + c + 12, y3);
  }
  for (; c + 4 <= cols; c += 4) {
    __m256d y0 = _mm256_loadu_pd(y + c);
    for (std::size_t r = 0; r < rows; ++r)
      y0 = _mm256_fmadd_pd(_mm256_set1_pd(x[r]), _mm256_loadu_pd(W + r * ld + c), y0);
    _mm256_storeu_pd(y + c, y0);
  }
  for (; c < cols; ++c) {
    double s = y[c];
    for (std::size_t r = 0; r < rows; ++r) s += x[r] * W[r * ld + c];
    y[c] = s;
  }
}

void mat_vec_avx2(const double* W, std::size_t rows, std::size_t cols, std::size_t ld,
                  const double* v, double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] += dot_avx2(W + r * ld, v, cols);
}

void add_outer_avx2(const double* x, std::size_t rows, const double* g, std::size_t cols,
                    double* W, std::size_t ld) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(x[r], g, W + r * ld, cols);
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{"avx2",       dot_avx2,     axpy_avx2,
                                 vec_mat_avx2, mat_vec_avx2, add_outer_avx2};
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &table : nullptr;
}

}  // namespace tplc::simd

#else

namespace tplc::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace tplc::simd

#endif
