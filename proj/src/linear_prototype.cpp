#include "gpode/linear_prototype.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "gpode/rng.hpp"
#include "gpode/running_moments.hpp"

namespace gpode::linear {
namespace {

void require_positive_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument("step size h must be positive and finite");
  }
}

// Exact flow of one sampled ODE: e^{-a t} x0 + (b / a)(1 - e^{-a t}).
double flow(double a, double decay, double x0, double b) { return decay * x0 + (b / a) * (1.0 - decay); }

TrajectoryDistribution from_moments(const std::vector<RunningMoments>& acc, double h, std::size_t n_samples,
                                    const char* method) {
  TrajectoryDistribution out;
  out.meta.method = method;
  out.meta.step = h;
  out.meta.sample_count = n_samples;
  out.reserve(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) {
    out.push(static_cast<double>(k) * h, {acc[k].mean, acc[k].variance()});
  }
  return out;
}

}  // namespace

void LinearModelDist::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("linear prototype requires a > 0 (stable dynamics)");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("linear prototype requires beta >= 0");
  }
}

LinearField embed(const LinearModelDist& m) {
  m.validate();
  return LinearField(m.a, m.beta, 0.0);
}

GaussianState analytic_moments(const LinearModelDist& m, const GaussianState& x0, double t) {
  m.validate();
  if (!(t >= 0.0)) {
    throw std::invalid_argument("analytic_moments: t must be nonnegative");
  }
  const double decay = std::exp(-m.a * t);
  const double rise = 1.0 - decay;
  return {decay * x0.mean, decay * decay * x0.var + (m.beta / (m.a * m.a)) * rise * rise};
}

double exact_fixed_point_var(const LinearModelDist& m) {
  m.validate();
  return m.beta / (m.a * m.a);
}

GaussianState naive_euler_step(const LinearModelDist& m, const GaussianState& s, double h) {
  m.validate();
  require_positive_step(h);
  const double ah = m.a * h;
  return {(1.0 - ah) * s.mean, s.var + h * h * m.beta + ah * ah * s.var - 2.0 * ah * s.var};
}

double naive_euler_fixed_point(const LinearModelDist& m, double h) {
  m.validate();
  require_positive_step(h);
  const double ah = m.a * h;
  if (ah >= 2.0) {
    std::ostringstream msg;
    msg << "a*h = " << ah << " is at or beyond the explicit Euler stability limit a*h < 2";
    throw InvalidStep(msg.str());
  }
  return exact_fixed_point_var(m) * (ah / (2.0 - ah));
}

GaussianState naive_iter_flow_step(const LinearModelDist& m, const GaussianState& s, double h) {
  m.validate();
  require_positive_step(h);
  const double decay = std::exp(-m.a * h);
  const double rise = 1.0 - decay;
  return {decay * s.mean, decay * decay * s.var + exact_fixed_point_var(m) * rise * rise};
}

double iter_flow_fixed_point(const LinearModelDist& m, double h) {
  m.validate();
  require_positive_step(h);
  return exact_fixed_point_var(m) * std::tanh(0.5 * m.a * h);
}

double cov_xb_flow(const LinearModelDist& m, double h, std::size_t n) {
  m.validate();
  require_positive_step(h);
  return (m.beta / m.a) * -std::expm1(-m.a * h * static_cast<double>(n));
}

GaussianState corrected_flow_step(const LinearModelDist& m, const GaussianState& s, double h, std::size_t n) {
  GaussianState next = naive_iter_flow_step(m, s, h);
  const double decay = std::exp(-m.a * h);
  // 2 e^{-ah} (1 - e^{-ah}) / a * cov(X_n, B)
  next.var += 2.0 * decay * (1.0 - decay) / m.a * cov_xb_flow(m, h, n);
  return next;
}

CorrelatedState corrected_euler_step(const LinearModelDist& m, const CorrelatedState& cs, double h) {
  m.validate();
  require_positive_step(h);
  const double gain = 1.0 - m.a * h;
  CorrelatedState next;
  next.state.mean = gain * cs.state.mean;
  next.state.var = gain * gain * cs.state.var + h * h * m.beta + 2.0 * h * gain * cs.cov_xb;
  next.cov_xb = gain * cs.cov_xb + h * m.beta;
  return next;
}

const char* propagator_name(Propagator p) {
  switch (p) {
    case Propagator::analytic:
      return "analytic";
    case Propagator::naive_euler:
      return "naive_euler";
    case Propagator::naive_flow:
      return "naive_flow";
    case Propagator::corrected_euler:
      return "corrected_euler";
    case Propagator::corrected_flow:
      return "corrected_flow";
  }
  return "unknown";
}

TrajectoryDistribution propagate(const LinearModelDist& m, const GaussianState& x0, double h, double T,
                                 Propagator method) {
  m.validate();
  require_step_and_horizon(h, T);
  const std::size_t steps = step_count(T, h);
  TrajectoryDistribution out;
  out.meta.method = propagator_name(method);
  out.meta.step = h;
  out.reserve(steps + 1);
  out.push(0.0, x0);

  GaussianState s = x0;
  CorrelatedState cs{x0, 0.0};
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n + 1) * h;
    switch (method) {
      case Propagator::analytic:
        s = analytic_moments(m, x0, t);
        break;
      case Propagator::naive_euler:
        s = naive_euler_step(m, s, h);
        break;
      case Propagator::naive_flow:
        s = naive_iter_flow_step(m, s, h);
        break;
      case Propagator::corrected_flow:
        s = corrected_flow_step(m, s, h, n);
        break;
      case Propagator::corrected_euler:
        cs = corrected_euler_step(m, cs, h);
        s = cs.state;
        break;
    }
    out.push(t, s);
  }
  return out;
}

TrajectoryDistribution sample_prototype(const LinearModelDist& m, const GaussianState& x0, double h, double T,
                                        std::size_t n_samples, std::uint64_t seed) {
  m.validate();
  require_step_and_horizon(h, T);
  if (n_samples < 2) {
    throw std::invalid_argument("sample_prototype: n_samples must be >= 2");
  }
  const std::size_t steps = step_count(T, h);
  std::vector<double> decay(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    decay[k] = std::exp(-m.a * static_cast<double>(k) * h);
  }
  const double sd0 = std::sqrt(x0.var);
  const double sd_b = std::sqrt(m.beta);
  std::vector<RunningMoments> acc(steps + 1);
  for (std::size_t i = 0; i < n_samples; ++i) {
    auto rng = make_rng(seed, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double x_start = x0.mean + sd0 * normal(rng);
    const double b = sd_b * normal(rng);
    for (std::size_t k = 0; k <= steps; ++k) {
      acc[k].add(flow(m.a, decay[k], x_start, b));
    }
  }
  return from_moments(acc, h, n_samples, "mc");
}

TrajectoryDistribution restart_sampling_demo(const LinearModelDist& m, const GaussianState& x0, double segment_T,
                                             std::size_t n_segments, double h, std::size_t n_samples,
                                             std::uint64_t seed) {
  m.validate();
  require_step_and_horizon(h, segment_T);
  if (n_segments < 1) {
    throw std::invalid_argument("restart_sampling_demo: n_segments must be >= 1");
  }
  if (n_samples < 2) {
    throw std::invalid_argument("restart_sampling_demo: n_samples must be >= 2");
  }
  const std::size_t seg_steps = step_count(segment_T, h);
  std::vector<double> decay(seg_steps + 1);
  for (std::size_t k = 0; k <= seg_steps; ++k) {
    decay[k] = std::exp(-m.a * static_cast<double>(k) * h);
  }
  const double sd_b = std::sqrt(m.beta);

  std::vector<RunningMoments> acc(n_segments * seg_steps + 1);
  std::vector<double> x_end(n_samples);
  GaussianState start = x0;
  for (std::size_t seg = 0; seg < n_segments; ++seg) {
    const double sd_start = std::sqrt(start.var);
    const std::size_t offset = seg * seg_steps;
    for (std::size_t i = 0; i < n_samples; ++i) {
      // Segment 0 uses the same streams as sample_prototype.
      auto rng = seg == 0 ? make_rng(seed, i) : make_rng(seed, i, seg);
      std::normal_distribution<double> normal(0.0, 1.0);
      const double x_start = start.mean + sd_start * normal(rng);
      const double b = sd_b * normal(rng);
      for (std::size_t k = (seg == 0 ? 0 : 1); k <= seg_steps; ++k) {
        acc[offset + k].add(flow(m.a, decay[k], x_start, b));
      }
      x_end[i] = flow(m.a, decay[seg_steps], x_start, b);
    }
    RunningMoments boundary;
    for (double x : x_end) {
      boundary.add(x);
    }
    start = {boundary.mean, boundary.variance()};
  }
  return from_moments(acc, h, n_samples, "mc_restart");
}

}  // namespace gpode::linear
