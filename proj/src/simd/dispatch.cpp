#include <cstdlib>
#include <string_view>

#include "tplc/simd/kernels.hpp"

namespace tplc::simd {
namespace {

thread_local const KernelTable* t_override = nullptr;

const KernelTable& detect() {
  if (const char* env = std::getenv("TPLC_SIMD"); env && std::string_view(env) == "scalar")
    return scalar_kernels();
  if (const KernelTable* avx2 = avx2_kernels()) return *avx2;
  return scalar_kernels();
}

}  // namespace

const KernelTable& kernels() {
  if (t_override) return *t_override;
  static const KernelTable& chosen = detect();
  return chosen;
}

ScopedKernels::ScopedKernels(const KernelTable& table) : previous_(t_override) {
  t_override = &table;
}

ScopedKernels::~ScopedKernels() { t_override = previous_; }

}  // namespace tplc::simd
