#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "gpode/linear_prototype.hpp"
#include "gpode/mc_oracle.hpp"
#include "gpode/running_moments.hpp"
#include "helpers.hpp"

using namespace gpode;
using namespace gpode::mc;

namespace {

std::shared_ptr<const std::vector<double>> make_grid(double lo, double hi, std::size_t n) {
  auto g = std::make_shared<std::vector<double>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    (*g)[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

FieldRealization tabulate(const std::shared_ptr<const std::vector<double>>& grid, double (*f)(double),
                          Interpolation interp) {
  std::vector<double> v;
  for (double x : *grid) {
    v.push_back(f(x));
  }
  return FieldRealization(grid, v, interp);
}

EnsembleConfig small_config() {
  EnsembleConfig cfg;
  cfg.n_fields = 200;
  cfg.n_initial = 20;
  cfg.h = 0.1;
  cfg.T = 4.0;
  return cfg;
}

}  // namespace

TEST_CASE("enum parsing") {
  CHECK(parse_interpolation("linear") == Interpolation::linear);
  CHECK(parse_interpolation("cubic") == Interpolation::cubic);
  CHECK(parse_integrator("euler") == Integrator::euler);
  CHECK(parse_integrator("rk4") == Integrator::rk4);
  CHECK(parse_pairing("cross_product") == Pairing::cross_product);
  CHECK(parse_pairing("one_to_one") == Pairing::one_to_one);
  CHECK_THROWS_AS((void)parse_pairing("zip"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_integrator("rk45"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_interpolation("spline"), std::invalid_argument);
  CHECK(std::string(to_string(Pairing::one_to_one)) == "one_to_one");
}

TEST_CASE("interpolants are exact at the nodes") {
  const auto grid = make_grid(-2.0, 3.0, 37);
  for (auto interp : {Interpolation::linear, Interpolation::cubic}) {
    const auto f = tabulate(grid, [](double x) { return std::sin(3.0 * x) + 0.1 * x * x; }, interp);
    for (std::size_t i = 0; i < grid->size(); ++i) {
      CHECK(f((*grid)[i]) == f.values()[i]);
    }
    CHECK(f.contains(-2.0));
    CHECK(f.contains(3.0));
    CHECK_FALSE(f.contains(3.0000001));
  }
}

TEST_CASE("cubic interpolant is monotone and reproduces lines") {
  const auto grid = make_grid(0.0, 1.0, 11);
  std::vector<double> step{0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1};
  const FieldRealization s(grid, step, Interpolation::cubic);
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double v = s(i / 1000.0);
    CHECK(v >= prev - 1e-15);
    CHECK(v >= -1e-15);
    CHECK(v <= 1.0 + 1e-15);
    prev = v;
  }
  const auto line = tabulate(grid, [](double x) { return 2.0 * x - 0.5; }, Interpolation::cubic);
  for (double x : {0.03, 0.51, 0.97}) {
    CHECK(line(x) == doctest::Approx(2.0 * x - 0.5).epsilon(1e-14));
  }
}

TEST_CASE("integration of simple fields") {
  const auto grid = make_grid(-3.0, 3.0, 61);
  const auto zero = tabulate(grid, [](double) { return 0.0; }, Interpolation::cubic);
  for (double x : integrate_realization(zero, 0.7, Integrator::rk4, 0.1, 2.0)) {
    CHECK(x == 0.7);
  }
  const auto decay = tabulate(grid, [](double x) { return -x; }, Interpolation::linear);
  const double h = 0.1;
  const auto xs = integrate_realization(decay, 1.5, Integrator::euler, h, 3.0);
  REQUIRE(xs.size() == 31);
  for (std::size_t n = 0; n < xs.size(); ++n) {
    CHECK(xs[n] == doctest::Approx(1.5 * std::pow(1.0 - h, static_cast<double>(n))).epsilon(1e-12));
  }
  CHECK(integrate_realization(decay, 1.5, Integrator::euler, 0.3, 1.0).size() == 5);
}

TEST_CASE("Euler is first order on a smooth interpolated field") {
  const auto grid = make_grid(-4.0, 4.0, 400);
  const auto f = tabulate(grid, [](double x) { return x * std::cos(x); }, Interpolation::cubic);
  const double ref = integrate_realization(f, 0.6, Integrator::rk4, 0.005, 4.0).back();
  const double e1 = std::abs(integrate_realization(f, 0.6, Integrator::euler, 0.1, 4.0).back() - ref);
  const double e2 = std::abs(integrate_realization(f, 0.6, Integrator::euler, 0.05, 4.0).back() - ref);
  CHECK(e1 / e2 >= 1.7);
  CHECK(e1 / e2 <= 2.3);
}

TEST_CASE("leaving the grid is an error") {
  const auto grid = make_grid(-1.0, 1.0, 21);
  const auto push = tabulate(grid, [](double) { return 1.0; }, Interpolation::linear);
  try {
    (void)integrate_realization(push, 0.0, Integrator::euler, 0.25, 3.0);
    FAIL("expected GridEscape");
  } catch (const GridEscape& e) {
    CHECK(e.time() == doctest::Approx(1.25));
    CHECK(e.state() == doctest::Approx(1.25));
    CHECK(e.lo() == -1.0);
    CHECK(e.hi() == 1.0);
    CHECK(std::string(e.what()).find("grid") != std::string::npos);
  }
  CHECK_THROWS_AS((void)integrate_realization(push, 2.0, Integrator::rk4, 0.1, 1.0), GridEscape);

  EnsembleConfig cfg = small_config();
  cfg.grid_lo = -1.0;
  cfg.grid_hi = 1.0;
  cfg.grid_points = 50;
  const LinearField drift(0.0, 0.01, 2.0);
  CHECK_THROWS_AS((void)ensemble_stats(drift, GaussianState{0.0, 0.01}, cfg), GridEscape);
}

TEST_CASE("field draws follow the posterior") {
  const auto gp = testing::xcosx_gp();
  const GpField field(gp);
  EnsembleConfig cfg;
  cfg.n_fields = 4000;
  cfg.grid_points = 41;
  const auto fields = draw_fields(field, cfg);
  REQUIRE(fields.size() == 4000);
  const auto grid = cfg.grid();
  for (std::size_t g = 0; g < grid.size(); g += 4) {
    double sum = 0.0;
    double sum2 = 0.0;
    for (const auto& f : fields) {
      sum += f.values()[g];
      sum2 += f.values()[g] * f.values()[g];
    }
    const double n = static_cast<double>(fields.size());
    const double mean = sum / n;
    const double var = (sum2 - n * mean * mean) / (n - 1);
    const double sd = std::sqrt(gp.var(grid[g]));
    CHECK(std::abs(mean - gp.mean(grid[g])) <= 4.0 * sd / std::sqrt(n) + 1e-9);
    CHECK(std::abs(var - gp.var(grid[g])) <= 4.0 * gp.var(grid[g]) * std::sqrt(2.0 / (n - 1)) + 1e-9);
  }
  const auto again = draw_fields(field, cfg);
  CHECK(again[17].values() == fields[17].values());
}

TEST_CASE("initial value draws") {
  const auto a = draw_initial_values(GaussianState{0.6, 0.005}, 100, 3);
  const auto b = draw_initial_values(GaussianState{0.6, 0.005}, 100, 3);
  const auto c = draw_initial_values(GaussianState{0.6, 0.005}, 100, 3, 1);
  CHECK(a == b);
  CHECK(a != c);
  const auto sets = draw_initial_value_sets(GaussianState{0.6, 0.005}, 4, 100, 3);
  REQUIRE(sets.size() == 400);
  CHECK(std::equal(a.begin(), a.end(), sets.begin()));
  CHECK(std::equal(c.begin(), c.end(), sets.begin() + 100));
  const auto point = draw_initial_values(GaussianState{0.6, 0.0}, 5, 3);
  for (double x : point) {
    CHECK(x == 0.6);
  }
  CHECK_THROWS((void)draw_initial_values(GaussianState{0.6, -1.0}, 5, 3));
}

TEST_CASE("ensemble of the linear model matches the analytic moments") {
  const linear::LinearModelDist m{1.0, 1.0};
  const GaussianState x0{1.0, 0.25};
  EnsembleConfig cfg;
  cfg.n_fields = 20000;
  cfg.n_initial = 20000;
  cfg.pairing = Pairing::one_to_one;
  cfg.grid_lo = -8.0;
  cfg.grid_hi = 8.0;
  cfg.grid_points = 17;
  cfg.interpolation = Interpolation::linear;
  cfg.h = 0.1;
  cfg.T = 5.0;
  const auto result = ensemble_stats(linear::embed(m), x0, cfg);
  const auto& stats = result.stats;
  CHECK(stats.meta.sample_count == 20000);
  const double n = 20000.0;
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const auto exact = linear::analytic_moments(m, x0, stats.times[k]);
    CHECK(std::abs(stats.means[k] - exact.mean) <= 3.0 * std::sqrt(exact.var / n));
    CHECK(std::abs(stats.vars[k] - exact.var) <= 3.0 * exact.var * std::sqrt(2.0 / (n - 1)));
  }
}

TEST_CASE("single field and point initial value give zero variance") {
  EnsembleConfig cfg = small_config();
  cfg.n_fields = 1;
  cfg.n_initial = 5;
  const auto r = ensemble_stats(GpField(testing::xcosx_gp()), GaussianState{0.6, 0.0}, cfg);
  for (double v : r.stats.vars) {
    CHECK(v == doctest::Approx(0.0).epsilon(1e-20).scale(1e-20));
  }
}

TEST_CASE("cross product equals concatenated one-to-one runs") {
  const GpField field(testing::xcosx_gp());
  EnsembleConfig cfg = small_config();
  cfg.n_fields = 30;
  const auto fields = draw_fields(field, cfg);
  const auto x0s = draw_initial_values(GaussianState{0.6, 0.005}, 7, 1);
  const auto cross = integrate_ensemble(fields, x0s, cfg);
  REQUIRE(cross.terminal_states.size() == 30 * 7);

  EnsembleConfig one = cfg;
  one.pairing = Pairing::one_to_one;
  std::vector<RunningMoments> pooled(cross.stats.size());
  for (std::size_t j = 0; j < x0s.size(); ++j) {
    const std::vector<double> repeated(fields.size(), x0s[j]);
    const auto run = integrate_ensemble(fields, repeated, one);
    for (std::size_t f = 0; f < fields.size(); ++f) {
      REQUIRE(run.terminal_states[f] == cross.terminal_states[f * x0s.size() + j]);
      REQUIRE(cross.field_ids[f * x0s.size() + j] == f);
      REQUIRE(cross.x0_ids[f * x0s.size() + j] == j);
    }
    for (std::size_t k = 0; k < run.stats.size(); ++k) {
      RunningMoments part;
      part.count = fields.size();
      part.mean = run.stats.means[k];
      part.m2 = run.stats.vars[k] * static_cast<double>(fields.size() - 1);
      pooled[k].merge(part);
    }
  }
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    CHECK(pooled[k].mean == doctest::Approx(cross.stats.means[k]).epsilon(1e-12));
    CHECK(pooled[k].variance() == doctest::Approx(cross.stats.vars[k]).epsilon(1e-9));
  }

  // Per-field sets: field f uses its own block of initial values.
  const auto sets = draw_initial_value_sets(GaussianState{0.6, 0.005}, fields.size(), 3, 1);
  const auto per_field = integrate_ensemble(fields, sets, cfg, InitialLayout::per_field);
  REQUIRE(per_field.terminal_states.size() == fields.size() * 3);
  const auto direct = integrate_realization(fields[4], sets[4 * 3 + 2], cfg.integrator, cfg.h, cfg.T);
  CHECK(per_field.terminal_states[4 * 3 + 2] == direct.back());

  CHECK_THROWS((void)integrate_ensemble(fields, x0s, one));
}

TEST_CASE("ensembles are deterministic and independent of workers") {
  const GpField field(testing::xcosx_gp());
  EnsembleConfig cfg = small_config();
  const GaussianState x0{0.6, 0.005};
  const auto a = ensemble_stats(field, x0, cfg);
  cfg.workers = 3;
  const auto b = ensemble_stats(field, x0, cfg);
  cfg.workers = 8;
  const auto c = ensemble_stats(field, x0, cfg);
  CHECK(a.stats.means == b.stats.means);
  CHECK(a.stats.vars == b.stats.vars);
  CHECK(a.stats.vars == c.stats.vars);
  CHECK(a.terminal_states == c.terminal_states);
  cfg.seed = 1;
  CHECK(ensemble_stats(field, x0, cfg).stats.vars != a.stats.vars);
}

TEST_CASE("discretization error is below sampling error") {
  const GpField field(testing::xcosx_gp());
  const GaussianState x0{0.6, 0.005};
  EnsembleConfig cfg;  // desk scale
  const auto base = ensemble_stats(field, x0, cfg);
  const double base_sd = base.stats.std_dev(base.stats.size() - 1);

  EnsembleConfig euler = cfg;
  euler.integrator = Integrator::euler;
  euler.h = 0.005;
  const auto e = ensemble_stats(field, x0, euler);
  // Same fields and initial values; only the integrator differs.
  const double var_se = base.stats.vars.back() * std::sqrt(2.0 / static_cast<double>(cfg.n_fields - 1));
  CHECK(std::abs(e.stats.vars.back() - base.stats.vars.back()) <= 3.0 * var_se);

  EnsembleConfig fine = cfg;
  fine.grid_points = 800;
  const auto f = ensemble_stats(field, x0, fine);
  CHECK(std::abs(f.stats.vars.back() - base.stats.vars.back()) <= 3.0 * var_se * std::sqrt(2.0));
  MESSAGE("desk-scale terminal std 400 vs 800 grid points: ", base_sd, " vs ",
          f.stats.std_dev(f.stats.size() - 1));
}

TEST_CASE("grid refinement changes the terminal std by less than one percent") {
  // Independent desk-scale ensembles differ by ~3% from sampling alone, so
  // pool enough fields that the standard error of the ratio is ~0.2%.
  const GpField field(testing::xcosx_gp());
  const GaussianState x0{0.6, 0.005};
  auto terminal_sd = [&](std::size_t grid_points) {
    RunningMoments pooled;
    for (std::uint64_t batch = 0; batch < 10; ++batch) {
      EnsembleConfig cfg;
      cfg.grid_points = grid_points;
      cfg.n_fields = 20000;
      cfg.n_initial = 1;
      cfg.seed = 1000 + batch;
      for (double x : ensemble_stats(field, x0, cfg).terminal_states) {
        pooled.add(x);
      }
    }
    return std::sqrt(pooled.variance());
  };
  const double coarse = terminal_sd(400);
  const double fine = terminal_sd(800);
  MESSAGE("terminal std over 200000 fields, 400 vs 800 grid points: ", coarse, " vs ", fine);
  CHECK(std::abs(fine - coarse) / coarse < 0.01);
}

TEST_CASE("config validation") {
  EnsembleConfig cfg;
  cfg.n_fields = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EnsembleConfig{};
  cfg.grid_hi = cfg.grid_lo;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = EnsembleConfig{};
  cfg.pairing = Pairing::one_to_one;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // 500 fields vs 50 initial values
  cfg = EnsembleConfig{};
  cfg.h = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_NOTHROW(EnsembleConfig{}.validate());
}

TEST_CASE("raw trajectory dump") {
  const GpField field(testing::xcosx_gp());
  EnsembleConfig cfg = small_config();
  cfg.n_fields = 2;
  cfg.n_initial = 2;
  cfg.T = 0.2;
  const auto no_raw = ensemble_stats(field, GaussianState{0.6, 0.005}, cfg);
  const auto path = std::filesystem::temp_directory_path() / "gpode_raw_test.csv";
  CHECK_THROWS_AS(write_raw_csv(no_raw, path), std::logic_error);
  cfg.keep_raw = true;
  const auto raw = ensemble_stats(field, GaussianState{0.6, 0.005}, cfg);
  write_raw_csv(raw, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "field_id,x0_id,t,x");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) {
    ++lines;
  }
  CHECK(lines == 4 * 3);
  std::filesystem::remove(path);
}
