#pragma once

#include <cstddef>
#include <cstdint>

namespace ghostlink {

/// Symmetric Dirichlet/Beta concentrations and the facet count.
struct HyperParams {
  std::uint32_t K = 20;
  double alpha = 1.0 / 20;  // facet preference
  double eta = 0.5;         // influence vulnerability
  double rho = 0.01;        // influencer choice
  double gamma = 0.01;      // facet-word

  /// alpha = 1/K, eta = 1/2, rho = 1/U, gamma = 0.01.
  static HyperParams defaults(std::uint32_t K, std::size_t num_users);

  /// Throws InvalidArgument unless K >= 1 and every concentration is > 0.
  void validate() const;

  bool operator==(const HyperParams&) const = default;
};

}  // namespace ghostlink
