#include "gpode/moment_matching.hpp"

#include <cmath>
#include <stdexcept>

#include "gpode/gauss_hermite.hpp"
#include "gpode/log.hpp"

namespace gpode::mm {
namespace {

void require_state(const GaussianState& s) {
  if (!(s.var >= 0.0) || !std::isfinite(s.var) || !std::isfinite(s.mean)) {
    throw std::invalid_argument("state must have finite mean and nonnegative variance");
  }
}

// E[exp(-(X - c)^2 / (2 width))] for X ~ N(m, s).
double gaussian_overlap(double m, double s, double c, double width) {
  const double d = m - c;
  return std::sqrt(width / (width + s)) * std::exp(-(d * d) / (2.0 * (width + s)));
}

}  // namespace

MomentTerms quadrature_moments(const FieldModel& model, const GaussianState& s, int order) {
  require_state(s);
  if (order < 1) {
    throw std::invalid_argument("quadrature order must be >= 1");
  }
  MomentTerms t;
  if (s.var == 0.0) {
    const double mu = model.mean(s.mean);
    t.e_mu = mu;
    t.e_sigma2 = model.var(s.mean);
    t.e_mu2 = mu * mu;
    t.e_xmu = s.mean * mu;
    return t;
  }
  const auto rule = gauss_hermite_normal(order);
  const double sd = std::sqrt(s.var);
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double x = s.mean + sd * rule.nodes[k];
    const double w = rule.weights[k];
    const double mu = model.mean(x);
    t.e_mu += w * mu;
    t.e_sigma2 += w * model.var(x);
    t.e_mu2 += w * mu * mu;
    t.e_xmu += w * x * mu;
  }
  return t;
}

MomentTerms closed_form_moments(const GpPosterior& gp, const GaussianState& s) {
  require_state(s);
  const auto& kernel = gp.kernel();
  const auto& xs = gp.training().inputs;
  const double amp = kernel.amplitude;
  const double ell2 = kernel.lengthscale * kernel.lengthscale;
  const auto n = static_cast<Eigen::Index>(xs.size());

  MomentTerms t;
  t.e_sigma2 = amp;
  if (n == 0) {
    return t;
  }

  const Eigen::VectorXd& alpha = gp.weights();
  Eigen::VectorXd ek(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ek[i] = amp * gaussian_overlap(s.mean, s.var, xs[i], ell2);
  }

  // E[X k(X, x_i)] = E[k(X, x_i)] * (posterior mean of X under the product).
  double e_xmu = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double center = (s.var * xs[i] + ell2 * s.mean) / (ell2 + s.var);
    e_xmu += alpha[i] * ek[i] * center;
  }

  // Q_ij = E[k(X, x_i) k(X, x_j)].
  Eigen::MatrixXd q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = xs[i] - xs[j];
      const double v = amp * amp * std::exp(-(d * d) / (4.0 * ell2)) *
                       gaussian_overlap(s.mean, s.var, 0.5 * (xs[i] + xs[j]), 0.5 * ell2);
      q(i, j) = v;
      q(j, i) = v;
    }
  }

  const Eigen::MatrixXd kinv_q = gp.solve_columns(Eigen::MatrixXd::Identity(n, n)).cwiseProduct(q);
  t.e_mu = alpha.dot(ek);
  t.e_mu2 = alpha.dot(q * alpha);
  t.e_sigma2 = amp - kinv_q.sum();
  t.e_xmu = e_xmu;
  return t;
}

GaussianState mm_euler_step(const FieldModel& model, const GaussianState& s, double h, bool* clamped) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("mm_euler_step: h must be positive");
  }
  const MomentTerms t = model.expected_terms(s);
  GaussianState next;
  next.mean = s.mean + h * t.e_mu;
  next.var = s.var + h * h * (t.e_sigma2 + t.e_mu2 - t.e_mu * t.e_mu) + 2.0 * h * (t.e_xmu - s.mean * t.e_mu);
  const bool negative = next.var < 0.0;
  if (negative) {
    next.var = 0.0;
  }
  if (clamped != nullptr) {
    *clamped = negative;
  }
  return next;
}

TrajectoryDistribution mm_trajectory(const FieldModel& model, const GaussianState& x0, double h, double T) {
  require_step_and_horizon(h, T);
  require_state(x0);
  const std::size_t steps = step_count(T, h);
  TrajectoryDistribution out;
  out.meta.method = "mm";
  out.meta.step = h;
  out.reserve(steps + 1);
  out.push(0.0, x0);
  GaussianState s = x0;
  for (std::size_t n = 0; n < steps; ++n) {
    bool clamped = false;
    s = mm_euler_step(model, s, h, &clamped);
    out.meta.clamp_events += clamped ? 1 : 0;
    out.push(static_cast<double>(n + 1) * h, s);
  }
  if (out.meta.clamp_events > 0) {
    log::warn("mm_trajectory: clamped negative variance at ", out.meta.clamp_events, " steps (h=", h, ")");
  }
  return out;
}

}  // namespace gpode::mm
