#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"

namespace ghostlink::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(GHOSTLINK_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(GHOSTLINK_HAVE_NEON)
  return &detail::neon_table();
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& choose() {
  const char* env = std::getenv("GHOSTLINK_SIMD");
  std::string want = env ? env : "";
  if (want == "scalar") return scalar_kernels();
  if (want == "avx2") return avx2_kernels() ? *avx2_kernels() : scalar_kernels();
  if (want == "neon") return neon_kernels() ? *neon_kernels() : scalar_kernels();
  if (const auto* t = avx2_kernels()) return *t;
  if (const auto* t = neon_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = choose();
  return table;
}

}  // namespace ghostlink::kernels
