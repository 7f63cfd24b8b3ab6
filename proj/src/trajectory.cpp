#include "gpode/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gpode {

void TrajectoryDistribution::reserve(std::size_t n) {
  times.reserve(n);
  means.reserve(n);
  vars.reserve(n);
}

void TrajectoryDistribution::push(double t, const GaussianState& s) {
  times.push_back(t);
  means.push_back(s.mean);
  vars.push_back(s.var);
}

double TrajectoryDistribution::std_dev(std::size_t i) const { return std::sqrt(std::max(vars[i], 0.0)); }

std::size_t step_count(double T, double h) {
  const double ratio = T / h;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(ratio));
}

void require_step_and_horizon(double h, double T) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument("step size h must be positive and finite");
  }
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw std::invalid_argument("horizon T must be positive and finite");
  }
}

}  // namespace gpode
