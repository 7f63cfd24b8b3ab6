#include "gpode/pull_euler.hpp"

#include <cmath>
#include <stdexcept>

#include "gpode/log.hpp"

namespace gpode::pull {

Linearization linearize(const FieldModel& model, double nu) {
  Linearization lin;
  lin.slope = model.mean_deriv(nu);
  lin.intercept_mean = model.mean(nu) - lin.slope * nu;
  lin.intercept_var = model.var(nu);
  return lin;
}

TruncationPolicy TruncationPolicy::product_threshold(double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("product_threshold: epsilon must be positive");
  }
  return TruncationPolicy(Mode::product_threshold, 0, epsilon);
}

TruncationPolicy TruncationPolicy::for_run(double T, double h) {
  return step_count(T, h) <= 2000 ? full() : product_threshold(1e-10);
}

void PullHistory::append(double center, double slope, double h) {
  const double gain = 1.0 + slope * h;
  for (double& p : products_) {
    p *= gain;
  }
  centers_.push_back(center);
  slopes_.push_back(slope);
  products_.push_back(1.0);
}

std::vector<double> PullHistory::recompute_suffix_products(double h) const {
  const std::size_t n = slopes_.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double p = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      p *= 1.0 + slopes_[j] * h;
    }
    out[i] = p;
  }
  return out;
}

double state_model_cov(const FieldModel& model, const PullHistory& hist, double nu, double h,
                       const TruncationPolicy& policy, std::size_t* terms_used) {
  const auto centers = hist.centers();
  const auto products = hist.suffix_products();
  const std::size_t n = centers.size();

  std::size_t first = 0;
  switch (policy.mode()) {
    case TruncationPolicy::Mode::none_history:
      first = n;
      break;
    case TruncationPolicy::Mode::window:
      first = n > policy.window_size() ? n - policy.window_size() : 0;
      break;
    case TruncationPolicy::Mode::full:
    case TruncationPolicy::Mode::product_threshold:
      break;
  }
  const bool thresholded = policy.mode() == TruncationPolicy::Mode::product_threshold;

  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = first; i < n; ++i) {
    if (thresholded && std::abs(products[i]) < policy.epsilon()) {
      continue;
    }
    sum += products[i] * model.cov(centers[i], nu);
    ++used;
  }
  if (terms_used != nullptr) {
    *terms_used = used;
  }
  return h * sum;
}

StepResult pull_step(const FieldModel& model, const GaussianState& s, PullHistory& hist, double h,
                     const TruncationPolicy& policy) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("pull_step: h must be positive");
  }
  const double nu = s.mean;
  const double slope = model.mean_deriv(nu);
  const double gain = 1.0 + slope * h;

  StepResult r;
  r.cov_xb = state_model_cov(model, hist, nu, h, policy, &r.terms_used);
  r.state.mean = nu + h * model.mean(nu);
  r.state.var = gain * gain * s.var + h * h * model.var(nu) + 2.0 * h * gain * r.cov_xb;
  if (r.state.var < 0.0) {
    r.state.var = 0.0;
    r.clamped = true;
  }
  hist.append(nu, slope, h);
  return r;
}

TrajectoryDistribution pull_trajectory(const FieldModel& model, const GaussianState& x0, double h, double T,
                                       const TruncationPolicy& policy, RunStats* stats) {
  require_step_and_horizon(h, T);
  if (!(x0.var >= 0.0)) {
    throw std::invalid_argument("pull_trajectory: initial variance must be nonnegative");
  }
  const std::size_t steps = step_count(T, h);
  TrajectoryDistribution out;
  out.meta.step = h;
  switch (policy.mode()) {
    case TruncationPolicy::Mode::full:
      out.meta.method = "pull_full";
      break;
    case TruncationPolicy::Mode::none_history:
      out.meta.method = "pull_none";
      break;
    case TruncationPolicy::Mode::window:
      out.meta.method = "pull_window";
      break;
    case TruncationPolicy::Mode::product_threshold:
      out.meta.method = "pull_threshold";
      break;
  }
  out.reserve(steps + 1);
  out.push(0.0, x0);

  RunStats local;
  PullHistory hist;
  GaussianState s = x0;
  for (std::size_t n = 0; n < steps; ++n) {
    const StepResult r = pull_step(model, s, hist, h, policy);
    s = r.state;
    local.clamp_events += r.clamped ? 1 : 0;
    local.terms_used += r.terms_used;
    out.push(static_cast<double>(n + 1) * h, s);
  }
  out.meta.clamp_events = local.clamp_events;
  if (local.clamp_events > 0) {
    log::warn("pull_trajectory: clamped negative variance at ", local.clamp_events, " steps (h=", h, ")");
  }
  if (stats != nullptr) {
    *stats = local;
  }
  return out;
}

std::vector<double> euler_mean_path(const FieldModel& model, double x0, double h, std::size_t steps) {
  std::vector<double> path;
  path.reserve(steps + 1);
  path.push_back(x0);
  double x = x0;
  for (std::size_t n = 0; n < steps; ++n) {
    x = x + h * model.mean(x);
    path.push_back(x);
  }
  return path;
}

std::vector<TruncationRow> truncation_error_report(const FieldModel& model, const GaussianState& x0, double h,
                                                   double T, std::span<const double> epsilons) {
  const double reference = pull_trajectory(model, x0, h, T, TruncationPolicy::full()).terminal().var;
  std::vector<TruncationRow> rows;
  rows.reserve(epsilons.size());
  for (double eps : epsilons) {
    RunStats stats;
    const auto run = pull_trajectory(model, x0, h, T, TruncationPolicy::product_threshold(eps), &stats);
    TruncationRow row;
    row.epsilon = eps;
    row.terminal_var = run.terminal().var;
    row.deviation = reference != 0.0 ? std::abs(row.terminal_var - reference) / std::abs(reference)
                                     : std::abs(row.terminal_var - reference);
    row.terms_used = stats.terms_used;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gpode::pull
