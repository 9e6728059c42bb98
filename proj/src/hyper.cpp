#include "ghostlink/hyper.hpp"

#include <cmath>

#include "ghostlink/error.hpp"

namespace ghostlink {

HyperParams HyperParams::defaults(std::uint32_t K, std::size_t num_users) {
  HyperParams h;
  h.K = K;
  h.alpha = K > 0 ? 1.0 / K : 0.0;
  h.eta = 0.5;
  h.rho = num_users > 0 ? 1.0 / static_cast<double>(num_users) : 1.0;
  h.gamma = 0.01;
  return h;
}

void HyperParams::validate() const {
  if (K < 1) throw InvalidArgument("K must be at least 1");
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!positive(alpha)) throw InvalidArgument("alpha must be positive");
  if (!positive(eta)) throw InvalidArgument("eta must be positive");
  if (!positive(rho)) throw InvalidArgument("rho must be positive");
  if (!positive(gamma)) throw InvalidArgument("gamma must be positive");
}

}  // namespace ghostlink
