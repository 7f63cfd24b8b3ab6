#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "gpode/field_model.hpp"
#include "gpode/trajectory.hpp"

// Closed-form analysis of the stable linear ODE distribution
//   dx/dt = -a x + B,  a > 0,  B ~ N(0, beta),
// with the initial value independent of B. Every propagator here has an exact
// counterpart, which makes this module the reference for the general solvers.
namespace gpode::linear {

struct LinearModelDist {
  double a = 1.0;
  double beta = 1.0;

  void validate() const;
};

/// A state together with its covariance with the model intercept B.
struct CorrelatedState {
  GaussianState state;
  double cov_xb = 0.0;
};

class InvalidStep : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The model as a FieldModel (mean -a x, variance and cross-covariance beta).
[[nodiscard]] LinearField embed(const LinearModelDist& m);

/// Moments of the exact flow at time t from x0.
[[nodiscard]] GaussianState analytic_moments(const LinearModelDist& m, const GaussianState& x0, double t);

/// beta / a^2, the variance of the stationary distribution.
[[nodiscard]] double exact_fixed_point_var(const LinearModelDist& m);

/// Euler step under the independence assumption:
///   nu' = (1 - a h) nu,  Sigma' = Sigma + h^2 beta + h^2 a^2 Sigma - 2 h a Sigma.
[[nodiscard]] GaussianState naive_euler_step(const LinearModelDist& m, const GaussianState& s, double h);

/// (beta / a^2) * a h / (2 - a h). Throws InvalidStep for a h >= 2, the
/// explicit Euler stability limit.
[[nodiscard]] double naive_euler_fixed_point(const LinearModelDist& m, double h);

/// The exact flow over h applied to a state treated as independent of B.
[[nodiscard]] GaussianState naive_iter_flow_step(const LinearModelDist& m, const GaussianState& s, double h);

/// (beta / a^2) tanh(a h / 2).
[[nodiscard]] double iter_flow_fixed_point(const LinearModelDist& m, double h);

/// cov(X_n, B) after n exact flow steps of size h: (beta / a)(1 - exp(-a h n)).
[[nodiscard]] double cov_xb_flow(const LinearModelDist& m, double h, std::size_t n);

/// Exact flow step from step n to n + 1 including the 2 (1 - e^{-ah}) cov(X_n, B) / a term.
[[nodiscard]] GaussianState corrected_flow_step(const LinearModelDist& m, const GaussianState& s, double h,
                                                std::size_t n);

/// Euler step carrying cov(X_n, B):
///   Sigma' = (1 - a h)^2 Sigma + h^2 beta + 2 h (1 - a h) cov,   cov' = (1 - a h) cov + h beta.
[[nodiscard]] CorrelatedState corrected_euler_step(const LinearModelDist& m, const CorrelatedState& cs, double h);

enum class Propagator { analytic, naive_euler, naive_flow, corrected_euler, corrected_flow };

[[nodiscard]] const char* propagator_name(Propagator p);

/// Trajectory of step_count(T, h) + 1 states on the grid t_k = k h.
[[nodiscard]] TrajectoryDistribution propagate(const LinearModelDist& m, const GaussianState& x0, double h, double T,
                                               Propagator method);

/// Empirical moments of sampled trajectories: draws (x0, b) pairs and
/// evaluates the exact flow on the grid t_k = k h.
[[nodiscard]] TrajectoryDistribution sample_prototype(const LinearModelDist& m, const GaussianState& x0, double h,
                                                      double T, std::size_t n_samples, std::uint64_t seed);

/// Sampling with restarts: each segment of length segment_T starts from fresh
/// draws x ~ N(empirical mean, empirical var) and b ~ N(0, beta), discarding
/// the accumulated correlation between state and model. Output on the grid
/// t_k = k h covering n_segments * segment_T.
[[nodiscard]] TrajectoryDistribution restart_sampling_demo(const LinearModelDist& m, const GaussianState& x0,
                                                           double segment_T, std::size_t n_segments, double h,
                                                           std::size_t n_samples, std::uint64_t seed);

}  // namespace gpode::linear
