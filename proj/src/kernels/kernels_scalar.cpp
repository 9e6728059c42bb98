#include "kernels_internal.hpp"

#include <cmath>

namespace ghostlink::kernels {

namespace {

double facet_weights(const std::int32_t* pref, double alpha, const std::int32_t* word_topic,
                     double gamma, const double* inv_denom, double* out, std::size_t n) {
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = (pref[k] + alpha) * (word_topic[k] + gamma) * inv_denom[k];
    total += out[k];
  }
  return total;
}

double facet_mass(const std::int32_t* pref, double alpha, const std::int32_t* word_topic,
                  double gamma, const double* inv_denom, std::size_t n) {
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += (pref[k] + alpha) * (word_topic[k] + gamma) * inv_denom[k];
  }
  return total;
}

double l1_distance(const double* a, const double* b, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::fabs(a[i] - b[i]);
  return total;
}

double sum_squares(const double* a, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += a[i] * a[i];
  return total;
}

void scale(double* a, double factor, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) a[i] *= factor;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar, facet_weights, facet_mass, l1_distance, sum_squares,
                                 scale};
  return table;
}

}  // namespace ghostlink::kernels
