#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace ghostlink::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// Function table for the data-parallel inner loops. Every variant computes
/// the same quantities; elementwise outputs are bit-identical across variants
/// and reductions agree up to summation order.
struct KernelTable {
  Isa isa;

  /// out[k] = (pref[k] + alpha) * (word_topic[k] + gamma) * inv_denom[k].
  /// Returns the sum of out[0..n). This is the unnormalized facet posterior
  /// for one token (user or influencer-review preference times word factor).
  double (*facet_weights)(const std::int32_t* pref, double alpha, const std::int32_t* word_topic,
                          double gamma, const double* inv_denom, double* out, std::size_t n);

  /// Same sum as facet_weights without storing the terms.
  double (*facet_mass)(const std::int32_t* pref, double alpha, const std::int32_t* word_topic,
                       double gamma, const double* inv_denom, std::size_t n);

  double (*l1_distance)(const double* a, const double* b, std::size_t n);
  double (*sum_squares)(const double* a, std::size_t n);
  void (*scale)(double* a, double factor, std::size_t n);
};

const KernelTable& scalar_kernels();

/// Nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

/// Best supported table, chosen once. GHOSTLINK_SIMD=scalar|avx2|neon forces
/// a variant (falls back to scalar if unavailable).
const KernelTable& active();

}  // namespace ghostlink::kernels
