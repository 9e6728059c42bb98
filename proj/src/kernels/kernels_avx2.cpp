// Compiled with -mavx2. Only reached after a runtime CPU check.
#include <immintrin.h>

#include "kernels_internal.hpp"

namespace ghostlink::kernels {

namespace {

inline __m256d load_counts(const std::int32_t* p) {
  return _mm256_cvtepi32_pd(_mm_loadu_si128(reinterpret_cast<const __m128i*>(p)));
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// No FMA: keeps each product rounded exactly like the scalar kernel.
double facet_weights(const std::int32_t* pref, double alpha, const std::int32_t* word_topic,
                     double gamma, const double* inv_denom, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vg = _mm256_set1_pd(gamma);
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d p = _mm256_add_pd(load_counts(pref + k), va);
    __m256d w = _mm256_add_pd(load_counts(word_topic + k), vg);
    __m256d t = _mm256_mul_pd(_mm256_mul_pd(p, w), _mm256_loadu_pd(inv_denom + k));
    _mm256_storeu_pd(out + k, t);
    acc = _mm256_add_pd(acc, t);
  }
  double total = hsum(acc);
  for (; k < n; ++k) {
    out[k] = (pref[k] + alpha) * (word_topic[k] + gamma) * inv_denom[k];
    total += out[k];
  }
  return total;
}

double facet_mass(const std::int32_t* pref, double alpha, const std::int32_t* word_topic,
                  double gamma, const double* inv_denom, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vg = _mm256_set1_pd(gamma);
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d p = _mm256_add_pd(load_counts(pref + k), va);
    __m256d w = _mm256_add_pd(load_counts(word_topic + k), vg);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(p, w), _mm256_loadu_pd(inv_denom + k)));
  }
  double total = hsum(acc);
  for (; k < n; ++k) total += (pref[k] + alpha) * (word_topic[k] + gamma) * inv_denom[k];
  return total;
}

double l1_distance(const double* a, const double* b, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign, d));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
  return total;
}

double sum_squares(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_loadu_pd(a + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(x, x));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += a[i] * a[i];
  return total;
}

void scale(double* a, double factor, std::size_t n) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(a + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), f));
  for (; i < n; ++i) a[i] *= factor;
}

}  // namespace

namespace detail {
const KernelTable& avx2_table() {
  static const KernelTable table{Isa::avx2, facet_weights, facet_mass, l1_distance, sum_squares,
                                 scale};
  return table;
}
}  // namespace detail

}  // namespace ghostlink::kernels
