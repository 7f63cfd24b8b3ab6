#pragma once

#include "gpode/gp_core.hpp"
#include "gpode/trajectory.hpp"

namespace gpode {

/// Gaussian expectations of the predictive moments under X ~ N(nu, Sigma):
/// E[mu(X)], E[sigma^2(X)], E[mu(X)^2] and E[X mu(X)].
struct MomentTerms {
  double e_mu = 0.0;
  double e_sigma2 = 0.0;
  double e_mu2 = 0.0;
  double e_xmu = 0.0;
};

/// A Gaussian distribution over scalar vector fields f. The propagators only
/// see this interface, so the linear prototype can be swapped in for a GP.
class FieldModel {
 public:
  virtual ~FieldModel() = default;

  [[nodiscard]] virtual double mean(double x) const = 0;
  [[nodiscard]] virtual double mean_deriv(double x) const = 0;
  [[nodiscard]] virtual double var(double x) const = 0;
  [[nodiscard]] virtual double cov(double x, double xp) const = 0;
  /// Exact expectations for this model family.
  [[nodiscard]] virtual MomentTerms expected_terms(const GaussianState& s) const = 0;
  /// Scale used to size the diagonal jitter when sampling the field on a grid.
  [[nodiscard]] virtual double jitter_scale() const = 0;
};

/// GP posterior with the squared-exponential kernel.
class GpField final : public FieldModel {
 public:
  explicit GpField(GpPosterior gp) : gp_(std::move(gp)) {}

  [[nodiscard]] const GpPosterior& posterior() const { return gp_; }

  [[nodiscard]] double mean(double x) const override { return gp_.mean(x); }
  [[nodiscard]] double mean_deriv(double x) const override { return gp_.mean_deriv(x); }
  [[nodiscard]] double var(double x) const override { return gp_.var(x); }
  [[nodiscard]] double cov(double x, double xp) const override { return gp_.cov(x, xp); }
  [[nodiscard]] MomentTerms expected_terms(const GaussianState& s) const override;
  [[nodiscard]] double jitter_scale() const override { return gp_.kernel().amplitude; }

 private:
  GpPosterior gp_;
};

/// f(x) = -decay * x + offset + B with B ~ N(0, beta): mean -decay x + offset,
/// constant variance and cross-covariance beta.
class LinearField final : public FieldModel {
 public:
  LinearField(double decay, double beta, double offset = 0.0);

  [[nodiscard]] double decay() const { return decay_; }
  [[nodiscard]] double beta() const { return beta_; }
  [[nodiscard]] double offset() const { return offset_; }

  [[nodiscard]] double mean(double x) const override { return -decay_ * x + offset_; }
  [[nodiscard]] double mean_deriv(double) const override { return -decay_; }
  [[nodiscard]] double var(double) const override { return beta_; }
  [[nodiscard]] double cov(double, double) const override { return beta_; }
  [[nodiscard]] MomentTerms expected_terms(const GaussianState& s) const override;
  [[nodiscard]] double jitter_scale() const override { return beta_ > 0.0 ? beta_ : 1.0; }

 private:
  double decay_;
  double beta_;
  double offset_;
};

}  // namespace gpode
