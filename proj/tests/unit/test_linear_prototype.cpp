#include <doctest.h>

#include <cmath>
#include <random>

#include "gpode/linear_prototype.hpp"
#include "helpers.hpp"

using namespace gpode;
using namespace gpode::linear;

namespace {

const LinearModelDist kUnit{1.0, 1.0};

// Exact flow of dx/dt = -a x + b from x0 over time t.
double flow(const LinearModelDist& m, double x0, double b, double t) {
  const double e = std::exp(-m.a * t);
  return e * x0 + (b / m.a) * (1.0 - e);
}

template <typename Step>
GaussianState iterate_to_convergence(Step step, GaussianState s) {
  for (int i = 0; i < 10'000'000; ++i) {
    const auto next = step(s);
    if (std::abs(next.var - s.var) < 1e-12) {
      return next;
    }
    s = next;
  }
  FAIL("no convergence");
  return s;
}

}  // namespace

TEST_CASE("model validation") {
  CHECK_THROWS((LinearModelDist{0.0, 1.0}).validate());
  CHECK_THROWS((LinearModelDist{-1.0, 1.0}).validate());
  CHECK_THROWS((LinearModelDist{1.0, -0.1}).validate());
  CHECK_NOTHROW((LinearModelDist{1.0, 0.0}).validate());
}

TEST_CASE("analytic moments") {
  const GaussianState x0{1.0, 0.25};
  const auto at0 = analytic_moments(kUnit, x0, 0.0);
  CHECK(at0.mean == x0.mean);
  CHECK(at0.var == x0.var);

  const auto late = analytic_moments(LinearModelDist{2.0, 3.0}, GaussianState{5.0, 4.0}, 60.0);
  CHECK(std::abs(late.mean) < 1e-40);
  CHECK(late.var == doctest::Approx(3.0 / 4.0).epsilon(1e-14));

  const auto t1 = analytic_moments(kUnit, x0, 1.0);
  CHECK(t1.mean == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(t1.var == doctest::Approx(std::exp(-2.0) * 0.25 + std::pow(1.0 - std::exp(-1.0), 2)).epsilon(1e-14));

  // Monte Carlo over (x0, b) pairs with the exact per-sample flow.
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  const int n = 100000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = flow(kUnit, x0.mean + 0.5 * z(rng), z(rng), 1.0);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(testing::rel_err(mean, t1.mean) < 0.01);
  CHECK(testing::rel_err(var, t1.var) < 0.01);
  CHECK_THROWS((void)analytic_moments(kUnit, x0, -1.0));
}

TEST_CASE("exact fixed point") {
  CHECK(exact_fixed_point_var(kUnit) == 1.0);
  CHECK(exact_fixed_point_var(LinearModelDist{3.0, 0.0}) == 0.0);
  CHECK(exact_fixed_point_var(LinearModelDist{2.0, 1.0}) == 0.25);
  // Oracle: corrected Euler iterated to convergence.
  const LinearModelDist m{2.0, 1.0};
  CorrelatedState cs{{0.0, 0.0}, 0.0};
  for (int i = 0; i < 200000; ++i) {
    cs = corrected_euler_step(m, cs, 1e-3);
  }
  CHECK(cs.state.var == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("naive Euler recursion and fixed point") {
  const double h = 0.5;
  const double fp = naive_euler_fixed_point(kUnit, h);
  CHECK(fp == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto same = naive_euler_step(kUnit, GaussianState{0.0, fp}, h);
  CHECK(same.var == doctest::Approx(fp).epsilon(1e-14));

  const auto converged = iterate_to_convergence([&](GaussianState s) { return naive_euler_step(kUnit, s, h); },
                                                GaussianState{0.0, 0.0});
  CHECK(std::abs(converged.var - 1.0 / 3.0) < 1e-10);

  const LinearModelDist noiseless{1.0, 0.0};
  GaussianState s{1.0, 0.0};
  for (int i = 0; i < 50; ++i) {
    s = naive_euler_step(noiseless, s, 0.1);
  }
  CHECK(s.var == 0.0);

  // Step formula written out.
  const LinearModelDist m{1.5, 0.7};
  const GaussianState s0{0.4, 0.3};
  const auto s1 = naive_euler_step(m, s0, 0.2);
  CHECK(s1.mean == doctest::Approx((1.0 - 0.3) * 0.4));
  CHECK(s1.var == doctest::Approx(0.3 + 0.04 * 0.7 + 0.04 * 2.25 * 0.3 - 2.0 * 0.2 * 1.5 * 0.3));
}

TEST_CASE("naive Euler fixed point limits") {
  CHECK_THROWS_AS((void)naive_euler_fixed_point(kUnit, 2.0), InvalidStep);
  CHECK_THROWS_AS((void)naive_euler_fixed_point(kUnit, 3.0), InvalidStep);
  CHECK(naive_euler_fixed_point(kUnit, 1.999) > 1000.0);
  CHECK(naive_euler_fixed_point(kUnit, 1.99999) > naive_euler_fixed_point(kUnit, 1.999));
  const double small = naive_euler_fixed_point(kUnit, 1e-6);
  CHECK(small == doctest::Approx(0.5e-6).epsilon(1e-5));
}

TEST_CASE("naive iterated flow") {
  const double h = 0.5;
  const double fp = iter_flow_fixed_point(kUnit, h);
  CHECK(fp == doctest::Approx(std::tanh(0.25)).epsilon(1e-15));
  CHECK(naive_iter_flow_step(kUnit, GaussianState{0.0, fp}, h).var == doctest::Approx(fp).epsilon(1e-14));
  const auto converged = iterate_to_convergence([&](GaussianState s) { return naive_iter_flow_step(kUnit, s, h); },
                                                GaussianState{0.0, 0.0});
  CHECK(std::abs(converged.var - std::tanh(0.25)) < 1e-10);

  const GaussianState x0{1.0, 0.25};
  const LinearModelDist m{0.8, 1.3};
  const auto one = naive_iter_flow_step(m, x0, 0.3);
  const auto exact = analytic_moments(m, x0, 0.3);
  CHECK(one.mean == doctest::Approx(exact.mean).epsilon(1e-14));
  CHECK(one.var == doctest::Approx(exact.var).epsilon(1e-14));

  // Two naive steps miss exactly the state/model covariance term.
  const auto two = naive_iter_flow_step(m, one, 0.3);
  const auto exact2 = analytic_moments(m, x0, 0.6);
  const double e = std::exp(-m.a * 0.3);
  const double gap = 2.0 * (m.beta / (m.a * m.a)) * (1.0 - e) * e * (1.0 - e);
  CHECK(exact2.var - two.var == doctest::Approx(gap).epsilon(1e-12));
  CHECK(two.mean == doctest::Approx(exact2.mean).epsilon(1e-14));
}

TEST_CASE("state/model covariance under the exact flow") {
  CHECK(cov_xb_flow(kUnit, 0.5, 0) == 0.0);
  CHECK(cov_xb_flow(LinearModelDist{2.0, 3.0}, 0.5, 200) == doctest::Approx(1.5).epsilon(1e-14));
  const double expected = 1.0 - std::exp(-1.0);
  CHECK(cov_xb_flow(kUnit, 0.5, 2) == doctest::Approx(expected).epsilon(1e-14));

  std::mt19937_64 rng(77);
  std::normal_distribution<double> z;
  const int n = 100000;
  double sx = 0.0, sb = 0.0, sxb = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x0 = 1.0 + 0.5 * z(rng);
    const double b = z(rng);
    const double x = flow(kUnit, flow(kUnit, x0, b, 0.5), b, 0.5);
    sx += x;
    sb += b;
    sxb += x * b;
  }
  const double cov = sxb / n - (sx / n) * (sb / n);
  CHECK(testing::rel_err(cov, expected) < 0.02);
}

TEST_CASE("corrected flow restores the semigroup") {
  const GaussianState x0{1.0, 0.25};
  GaussianState s = x0;
  for (std::size_t n = 0; n < 100; ++n) {
    s = corrected_flow_step(kUnit, s, 0.1, n);
  }
  const auto exact = analytic_moments(kUnit, x0, 10.0);
  CHECK(std::abs(s.var - exact.var) <= 1e-12);
  CHECK(std::abs(s.mean - exact.mean) <= 1e-12);

  const LinearModelDist m{0.7, 2.0};
  const auto naive = naive_iter_flow_step(m, x0, 0.4);
  const auto corrected = corrected_flow_step(m, x0, 0.4, 0);
  CHECK(naive.var == corrected.var);
  CHECK(naive.mean == corrected.mean);

  for (double h : {0.05, 0.5, 2.0, 7.0}) {
    const auto big = corrected_flow_step(m, x0, h, 0);
    const auto halves = corrected_flow_step(m, corrected_flow_step(m, x0, h / 2, 0), h / 2, 1);
    CHECK(big.var == doctest::Approx(halves.var).epsilon(1e-13));
    CHECK(big.mean == doctest::Approx(halves.mean).epsilon(1e-13));
  }
}

TEST_CASE("corrected Euler") {
  CorrelatedState cs{{0.0, 0.0}, 0.0};
  for (int i = 0; i < 20000; ++i) {
    cs = corrected_euler_step(kUnit, cs, 0.1);
  }
  CHECK(std::abs(cs.state.var - 1.0) <= 0.06);

  const LinearModelDist m{1.3, 0.8};
  const GaussianState x0{0.5, 0.2};
  const auto first = corrected_euler_step(m, CorrelatedState{x0, 0.0}, 0.1);
  const auto naive = naive_euler_step(m, x0, 0.1);
  CHECK(first.state.var == doctest::Approx(naive.var).epsilon(1e-14));
  CHECK(first.state.mean == doctest::Approx(naive.mean).epsilon(1e-14));

  // Recursion vs the closed telescope sum h sum (1 - a h)^{n-1-i} beta.
  const double h = 0.05;
  CorrelatedState r{x0, 0.0};
  for (std::size_t n = 1; n <= 1000; ++n) {
    r = corrected_euler_step(m, r, h);
    double closed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      closed += std::pow(1.0 - m.a * h, static_cast<double>(n - 1 - i)) * m.beta;
    }
    closed *= h;
    REQUIRE(std::abs(r.cov_xb - closed) <= 1e-12);
    REQUIRE(std::abs(r.cov_xb) <= std::sqrt(r.state.var * m.beta) + 1e-10);
  }
}

TEST_CASE("underestimation ordering and step-size dependence") {
  for (double u = 0.01; u < 1.0; u += 0.01) {
    const LinearModelDist m{1.0, 1.0};
    const double euler = naive_euler_fixed_point(m, u);
    const double iter = iter_flow_fixed_point(m, u);
    CHECK(iter < euler);
    CHECK(euler < exact_fixed_point_var(m));
  }
  const LinearModelDist m{1.7, 0.9};
  double prev_euler = 0.0;
  double prev_flow = 0.0;
  for (double h : {0.01, 0.05, 0.1, 0.3, 0.6, 1.0}) {
    CHECK(naive_euler_fixed_point(m, h) > prev_euler);
    CHECK(iter_flow_fixed_point(m, h) > prev_flow);
    prev_euler = naive_euler_fixed_point(m, h);
    prev_flow = iter_flow_fixed_point(m, h);
  }
}

TEST_CASE("propagate") {
  const GaussianState x0{1.0, 0.25};
  const auto exact = propagate(kUnit, x0, 0.1, 5.0, Propagator::analytic);
  CHECK(exact.size() == 51);
  CHECK(exact.meta.method == "analytic");
  CHECK(exact.times.back() == doctest::Approx(5.0));
  const auto flow_traj = propagate(kUnit, x0, 0.1, 5.0, Propagator::corrected_flow);
  for (std::size_t k = 0; k < exact.size(); ++k) {
    CHECK(std::abs(flow_traj.vars[k] - exact.vars[k]) <= 1e-12);
  }
  CHECK(propagate(kUnit, x0, 0.3, 1.0, Propagator::naive_euler).size() == 5);  // ceil(1/0.3) + 1
  CHECK_THROWS((void)propagate(kUnit, x0, 0.0, 1.0, Propagator::analytic));

  // Corrected Euler error at T=5 against the analytic variance is first order.
  auto err = [&](double h) {
    const auto t = propagate(kUnit, x0, h, 5.0, Propagator::corrected_euler);
    return std::abs(t.vars.back() - analytic_moments(kUnit, x0, 5.0).var);
  };
  const double ratio = err(0.1) / err(0.05);
  CHECK(ratio >= 1.7);
  CHECK(ratio <= 2.3);

  // beta = 0: deterministic propagation of the initial spread.
  const LinearModelDist noiseless{0.9, 0.0};
  const auto f = propagate(noiseless, x0, 0.1, 2.0, Propagator::corrected_flow);
  const auto e = propagate(noiseless, x0, 0.1, 2.0, Propagator::naive_euler);
  const auto c = propagate(noiseless, x0, 0.1, 2.0, Propagator::corrected_euler);
  for (std::size_t k = 0; k < f.size(); ++k) {
    CHECK(f.vars[k] == doctest::Approx(std::exp(-2.0 * 0.9 * f.times[k]) * 0.25).epsilon(1e-12));
    const double euler = std::pow(1.0 - 0.09, 2.0 * static_cast<double>(k)) * 0.25;
    CHECK(e.vars[k] == doctest::Approx(euler).epsilon(1e-12));
    CHECK(c.vars[k] == doctest::Approx(euler).epsilon(1e-12));
  }
}

TEST_CASE("sampling oracle") {
  const GaussianState x0{1.0, 0.25};
  const std::size_t n = 100000;
  const auto s = sample_prototype(kUnit, x0, 0.1, 10.0, n, 5);
  CHECK(s.meta.sample_count == n);
  const auto exact = propagate(kUnit, x0, 0.1, 10.0, Propagator::analytic);
  REQUIRE(s.size() == exact.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double se_mean = std::sqrt(exact.vars[k] / static_cast<double>(n));
    const double se_var = exact.vars[k] * std::sqrt(2.0 / static_cast<double>(n - 1));
    CHECK(std::abs(s.means[k] - exact.means[k]) <= 3.0 * se_mean);
    CHECK(std::abs(s.vars[k] - exact.vars[k]) <= 3.0 * se_var);
  }
  const double terminal_se = 1.0 * std::sqrt(2.0 / static_cast<double>(n - 1));
  CHECK(std::abs(s.vars.back() - 1.0) <= 3.0 * terminal_se + 1e-4);

  const auto again = sample_prototype(kUnit, x0, 0.1, 10.0, n, 5);
  CHECK(again.vars == s.vars);

  const LinearModelDist noiseless{1.0, 0.0};
  const auto d = sample_prototype(noiseless, x0, 0.5, 3.0, 20000, 1);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double want = std::exp(-2.0 * d.times[k]) * 0.25;
    CHECK(std::abs(d.vars[k] - want) <= 4.0 * want * std::sqrt(2.0 / 19999.0));
  }
  CHECK_THROWS((void)sample_prototype(kUnit, x0, 0.1, 1.0, 1, 0));
}

TEST_CASE("restart sampling") {
  const GaussianState x0{1.0, 0.25};
  const std::size_t n = 100000;
  const auto one = restart_sampling_demo(kUnit, x0, 4.0, 1, 0.1, n, 8);
  const auto plain = sample_prototype(kUnit, x0, 0.1, 4.0, n, 8);
  CHECK(one.vars == plain.vars);
  CHECK(one.means == plain.means);

  // Each segment follows the analytic transient from its restart variance,
  // i.e. the naive iterated flow with step segment_T.
  const double seg = 3.0;
  const auto r = restart_sampling_demo(kUnit, x0, seg, 3, 0.1, n, 9);
  CHECK(r.meta.method == "mc_restart");
  CHECK(r.times.back() == doctest::Approx(9.0));
  GaussianState oracle = x0;
  for (int i = 0; i < 3; ++i) {
    oracle = naive_iter_flow_step(kUnit, oracle, seg);
  }
  const double se = oracle.var * std::sqrt(2.0 / static_cast<double>(n - 1));
  CHECK(std::abs(r.vars.back() - oracle.var) <= 3.0 * se * std::sqrt(3.0));
  CHECK(r.vars.back() < 0.99 * analytic_moments(kUnit, x0, 9.0).var);

  const std::size_t boundary = 30;
  const double start_var = r.vars[boundary];
  for (std::size_t k = boundary; k <= 2 * boundary; k += 5) {
    const double tau = r.times[k] - r.times[boundary];
    const double want = std::exp(-2.0 * tau) * start_var + std::pow(1.0 - std::exp(-tau), 2);
    CHECK(std::abs(r.vars[k] - want) <= 3.0 * want * std::sqrt(2.0 / static_cast<double>(n - 1)) * std::sqrt(2.0));
  }
}
