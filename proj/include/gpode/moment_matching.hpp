#pragma once

#include "gpode/field_model.hpp"
#include "gpode/gp_core.hpp"
#include "gpode/trajectory.hpp"

// Output-distribution approximation of one explicit Euler step under the
// assumption that the state is independent of the model. This is the
// multi-step-ahead moment matching baseline; it underestimates trajectory
// variance and is kept as-is for comparison.
namespace gpode::mm {

inline constexpr int kDefaultQuadratureOrder = 60;

/// Gauss–Hermite estimate of the four expectations using only the model's
/// pointwise mean and variance. Exact when s.var == 0.
[[nodiscard]] MomentTerms quadrature_moments(const FieldModel& model, const GaussianState& s,
                                             int order = kDefaultQuadratureOrder);

/// Closed-form expectations for the squared-exponential posterior. Every
/// term reduces to products of the kernel with a Gaussian density, which
/// integrate to rescaled Gaussians.
[[nodiscard]] MomentTerms closed_form_moments(const GpPosterior& gp, const GaussianState& s);

/// One moment-matched Euler step:
///   nu'    = nu + h E[mu]
///   Sigma' = Sigma + h^2 (E[sigma^2] + E[mu^2] - E[mu]^2) + 2h (E[X mu] - nu E[mu])
/// A negative Sigma' is clamped to zero; `clamped` reports it when non-null.
[[nodiscard]] GaussianState mm_euler_step(const FieldModel& model, const GaussianState& s, double h,
                                          bool* clamped = nullptr);

/// Iterates mm_euler_step for step_count(T, h) steps starting from x0.
[[nodiscard]] TrajectoryDistribution mm_trajectory(const FieldModel& model, const GaussianState& x0, double h,
                                                   double T);

}  // namespace gpode::mm
