#pragma once

// Dense double-precision kernels behind every matrix product in the model,
// the STFT and their gradients. A scalar reference table is always present;
// an AVX2+FMA table is selected at runtime when the CPU supports it.
//
// Matrices are row-major with an explicit leading dimension `ld` so callers
// can address column blocks (e.g. one GRU gate) in place.

#include <cstddef>
#include <string_view>

namespace tplc::simd {

struct KernelTable {
  std::string_view name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // y[c] += sum_r x[r] * W[r*ld + c],  r < rows, c < cols
  void (*vec_mat)(const double* x, const double* W, std::size_t rows, std::size_t cols,
                  std::size_t ld, double* y);

  // out[r] += sum_c W[r*ld + c] * v[c]
  void (*mat_vec)(const double* W, std::size_t rows, std::size_t cols, std::size_t ld,
                  const double* v, double* out);

  // W[r*ld + c] += x[r] * g[c]
  void (*add_outer)(const double* x, std::size_t rows, const double* g, std::size_t cols,
                    double* W, std::size_t ld);
};

const KernelTable& scalar_kernels();

// nullptr when the build or the host lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// Table used by the library. Chosen once per process from CPU features;
// TPLC_SIMD=scalar in the environment forces the reference path. A
// ScopedKernels on the current thread takes precedence.
const KernelTable& kernels();

// Thread-local override, used by equivalence tests and benchmarks.
class ScopedKernels {
 public:
  explicit ScopedKernels(const KernelTable& table);
  ~ScopedKernels();
  ScopedKernels(const ScopedKernels&) = delete;
  ScopedKernels& operator=(const ScopedKernels&) = delete;

 private:
  const KernelTable* previous_;
};

}  // namespace tplc::simd
