#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gpode {

/// Mean and variance of a scalar state random variable at one time.
struct GaussianState {
  double mean = 0.0;
  double var = 0.0;
};

struct TrajectoryMeta {
  std::string method;
  double step = 0.0;
  // Number of sampled trajectories behind the moments; 0 for analytic and
  // approximate propagators.
  std::size_t sample_count = 0;
  // Steps where a negative variance was clamped to zero.
  std::size_t clamp_events = 0;
};

/// Per-time mean/variance record shared by every propagator in the library.
struct TrajectoryDistribution {
  std::vector<double> times;
  std::vector<double> means;
  std::vector<double> vars;
  TrajectoryMeta meta;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] bool empty() const { return times.empty(); }

  void reserve(std::size_t n);
  void push(double t, const GaussianState& s);

  [[nodiscard]] GaussianState state(std::size_t i) const { return {means[i], vars[i]}; }
  [[nodiscard]] GaussianState terminal() const { return state(size() - 1); }
  [[nodiscard]] double std_dev(std::size_t i) const;
};

/// Number of fixed steps of size h needed to reach T. Ratios within 1e-9 of
/// an integer are rounded instead of ceiled, so T=8, h=0.05 gives 160.
[[nodiscard]] std::size_t step_count(double T, double h);

/// Throws std::invalid_argument unless h > 0 and T > 0 are finite.
void require_step_and_horizon(double h, double T);

}  // namespace gpode
