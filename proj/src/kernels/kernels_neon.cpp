#include <arm_neon.h>

#include "kernels_internal.hpp"

namespace ghostlink::kernels {

namespace {

inline float64x2_t load_counts(const std::int32_t* p) {
  return vcvtq_f64_s64(vmovl_s32(vld1_s32(p)));
}

double facet_weights(const std::int32_t* pref, double alpha, const std::int32_t* word_topic,
                     double gamma, const double* inv_denom, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const float64x2_t vg = vdupq_n_f64(gamma);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    float64x2_t p = vaddq_f64(load_counts(pref + k), va);
    float64x2_t w = vaddq_f64(load_counts(word_topic + k), vg);
    float64x2_t t = vmulq_f64(vmulq_f64(p, w), vld1q_f64(inv_denom + k));
    vst1q_f64(out + k, t);
    acc = vaddq_f64(acc, t);
  }
  double total = vaddvq_f64(acc);
  for (; k < n; ++k) {
    out[k] = (pref[k] + alpha) * (word_topic[k] + gamma) * inv_denom[k];
    total += out[k];
  }
  return total;
}

double facet_mass(const std::int32_t* pref, double alpha, const std::int32_t* word_topic,
                  double gamma, const double* inv_denom, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const float64x2_t vg = vdupq_n_f64(gamma);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    float64x2_t p = vaddq_f64(load_counts(pref + k), va);
    float64x2_t w = vaddq_f64(load_counts(word_topic + k), vg);
    acc = vaddq_f64(acc, vmulq_f64(vmulq_f64(p, w), vld1q_f64(inv_denom + k)));
  }
  double total = vaddvq_f64(acc);
  for (; k < n; ++k) total += (pref[k] + alpha) * (word_topic[k] + gamma) * inv_denom[k];
  return total;
}

double l1_distance(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vabdq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) total += a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
  return total;
}

double sum_squares(const double* a, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t x = vld1q_f64(a + i);
    acc = vaddq_f64(acc, vmulq_f64(x, x));
  }
  double total = vaddvq_f64(acc);
  for (; i < n; ++i) total += a[i] * a[i];
  return total;
}

void scale(double* a, double factor, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(a + i, vmulq_n_f64(vld1q_f64(a + i), factor));
  for (; i < n; ++i) a[i] *= factor;
}

}  // namespace

namespace detail {
const KernelTable& neon_table() {
  static const KernelTable table{Isa::neon, facet_weights, facet_mass, l1_distance, sum_squares,
                                 scale};
  return table;
}
}  // namespace detail

}  // namespace ghostlink::kernels
