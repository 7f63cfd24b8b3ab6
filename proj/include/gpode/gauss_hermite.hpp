#pragma once

#include <vector>

namespace gpode {

/// Nodes and weights for expectations against the standard normal:
/// E[g(Z)] ~= sum_k weights[k] * g(nodes[k]). Weights sum to one.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss–Hermite rule of the given order (probabilists' weight), computed
/// with Golub–Welsch from the Hermite three-term recurrence.
[[nodiscard]] QuadratureRule gauss_hermite_normal(int order);

}  // namespace gpode
