#include "gpode/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "gpode/gp_core.hpp"
#include "gpode/parallel.hpp"
#include "gpode/rng.hpp"
#include "gpode/running_moments.hpp"

namespace gpode::mc {
namespace {

constexpr std::uint64_t kFieldStream = 1;
constexpr std::uint64_t kInitialStream = 2;

std::string escape_message(double time, double state, double lo, double hi, const std::string& context) {
  std::ostringstream os;
  os.precision(17);
  os << "trajectory left the sampled grid [" << lo << ", " << hi << "] at t=" << time << " (x=" << state << ")";
  if (!context.empty()) {
    os << " [" << context << "]";
  }
  os << "; widen grid_lo/grid_hi";
  return os.str();
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// Node derivatives of the monotone cubic Hermite interpolant.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) {
    return d;
  }
  std::vector<double> hs(n - 1);
  std::vector<double> delta(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    hs[k] = x[k + 1] - x[k];
    delta[k] = (y[k + 1] - y[k]) / hs[k];
  }
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] * delta[k] <= 0.0) {
      d[k] = 0.0;
      continue;
    }
    const double w1 = 2.0 * hs[k] + hs[k - 1];
    const double w2 = hs[k] + 2.0 * hs[k - 1];
    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
  }
  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (sign(s) != sign(d0)) {
      s = 0.0;
    } else if (sign(d0) != sign(d1) && std::abs(s) > 3.0 * std::abs(d0)) {
      s = 3.0 * d0;
    }
    return s;
  };
  d[0] = endpoint(hs[0], hs[1], delta[0], delta[1]);
  d[n - 1] = endpoint(hs[n - 2], hs[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

}  // namespace

Interpolation parse_interpolation(const std::string& s) {
  if (s == "linear") return Interpolation::linear;
  if (s == "cubic") return Interpolation::cubic;
  throw std::invalid_argument("unknown interpolation '" + s + "' (expected linear|cubic)");
}

Integrator parse_integrator(const std::string& s) {
  if (s == "euler") return Integrator::euler;
  if (s == "rk4") return Integrator::rk4;
  throw std::invalid_argument("unknown integrator '" + s + "' (expected euler|rk4)");
}

Pairing parse_pairing(const std::string& s) {
  if (s == "cross_product") return Pairing::cross_product;
  if (s == "one_to_one") return Pairing::one_to_one;
  throw std::invalid_argument("unknown pairing '" + s + "' (expected cross_product|one_to_one)");
}

const char* to_string(Interpolation v) { return v == Interpolation::linear ? "linear" : "cubic"; }
const char* to_string(Integrator v) { return v == Integrator::euler ? "euler" : "rk4"; }
const char* to_string(Pairing v) { return v == Pairing::cross_product ? "cross_product" : "one_to_one"; }

GridEscape::GridEscape(double time, double state, double lo, double hi, const std::string& context)
    : std::runtime_error(escape_message(time, state, lo, hi, context)),
      time_(time),
      state_(state),
      lo_(lo),
      hi_(hi) {}

FieldRealization::FieldRealization(std::shared_ptr<const std::vector<double>> grid, std::vector<double> values,
                                   Interpolation interpolation)
    : grid_(std::move(grid)), values_(std::move(values)), interpolation_(interpolation) {
  if (!grid_ || grid_->size() < 2) {
    throw std::invalid_argument("FieldRealization: grid needs at least two nodes");
  }
  if (grid_->size() != values_.size()) {
    throw std::invalid_argument("FieldRealization: grid and values differ in length");
  }
  if (interpolation_ == Interpolation::cubic) {
    slopes_ = pchip_slopes(*grid_, values_);
  }
}

double FieldRealization::operator()(double x) const {
  const auto& g = *grid_;
  if (!contains(x)) {
    throw std::out_of_range("FieldRealization evaluated outside its grid");
  }
  auto it = std::upper_bound(g.begin(), g.end(), x);
  std::size_t k = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
  if (g[k] == x) {
    return values_[k];
  }
  k = std::min(k, g.size() - 2);
  const double width = g[k + 1] - g[k];
  const double t = (x - g[k]) / width;
  if (interpolation_ == Interpolation::linear) {
    return values_[k] + (values_[k + 1] - values_[k]) * t;
  }
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * values_[k] + h10 * width * slopes_[k] + h01 * values_[k + 1] + h11 * width * slopes_[k + 1];
}

void EnsembleConfig::validate() const {
  if (n_fields == 0 || n_initial == 0) {
    throw std::invalid_argument("ensemble: n_fields and n_initial must be positive");
  }
  if (pairing == Pairing::one_to_one && n_fields != n_initial) {
    throw std::invalid_argument("ensemble: one_to_one pairing needs n_fields == n_initial");
  }
  if (!(grid_hi > grid_lo) || grid_points < 2) {
    throw std::invalid_argument("ensemble: grid needs grid_hi > grid_lo and at least two points");
  }
  require_step_and_horizon(h, T);
}

std::vector<double> EnsembleConfig::grid() const {
  std::vector<double> g(grid_points);
  const double step = (grid_hi - grid_lo) / static_cast<double>(grid_points - 1);
  for (std::size_t i = 0; i < grid_points; ++i) {
    g[i] = grid_lo + step * static_cast<double>(i);
  }
  g.back() = grid_hi;
  return g;
}

std::vector<FieldRealization> draw_fields(const FieldModel& model, const EnsembleConfig& cfg) {
  cfg.validate();
  auto grid = std::make_shared<const std::vector<double>>(cfg.grid());
  const auto m = static_cast<Eigen::Index>(grid->size());
  Eigen::VectorXd mean(m);
  Eigen::MatrixXd cov(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    mean[i] = model.mean((*grid)[i]);
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double c = model.cov((*grid)[i], (*grid)[j]);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  const Eigen::MatrixXd values = sample_joint_gaussian(mean, cov, cfg.n_fields, derive_seed(cfg.seed, kFieldStream),
                                                       model.jitter_scale(), {}, cfg.workers);
  std::vector<FieldRealization> fields;
  fields.reserve(cfg.n_fields);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m));
    for (Eigen::Index c = 0; c < m; ++c) {
      row[static_cast<std::size_t>(c)] = values(r, c);
    }
    fields.emplace_back(grid, std::move(row), cfg.interpolation);
  }
  return fields;
}

std::vector<double> draw_initial_values(const GaussianState& x0_dist, std::size_t n, std::uint64_t seed,
                                        std::size_t set) {
  if (!(x0_dist.var >= 0.0)) {
    throw std::invalid_argument("initial distribution variance must be nonnegative");
  }
  const double sd = std::sqrt(x0_dist.var);
  const std::uint64_t base = derive_seed(seed, kInitialStream);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto rng = make_rng(base, j, set);
    std::normal_distribution<double> normal(0.0, 1.0);
    out[j] = x0_dist.mean + sd * normal(rng);
  }
  return out;
}

std::vector<double> draw_initial_value_sets(const GaussianState& x0_dist, std::size_t n_fields, std::size_t n_initial,
                                            std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(n_fields * n_initial);
  for (std::size_t f = 0; f < n_fields; ++f) {
    const auto set = draw_initial_values(x0_dist, n_initial, seed, f);
    out.insert(out.end(), set.begin(), set.end());
  }
  return out;
}

std::vector<double> integrate_realization(const FieldRealization& field, double x0, Integrator integrator, double h,
                                          double T) {
  require_step_and_horizon(h, T);
  const std::size_t steps = step_count(T, h);
  std::vector<double> xs;
  xs.reserve(steps + 1);
  auto eval = [&](double x, double t) {
    if (!field.contains(x)) {
      throw GridEscape(t, x, field.lo(), field.hi());
    }
    return field(x);
  };
  if (!field.contains(x0)) {
    throw GridEscape(0.0, x0, field.lo(), field.hi());
  }
  double x = x0;
  xs.push_back(x);
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * h;
    if (integrator == Integrator::euler) {
      x = x + h * eval(x, t);
    } else {
      const double k1 = eval(x, t);
      const double k2 = eval(x + 0.5 * h * k1, t + 0.5 * h);
      const double k3 = eval(x + 0.5 * h * k2, t + 0.5 * h);
      const double k4 = eval(x + h * k3, t + h);
      x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!field.contains(x)) {
      throw GridEscape(static_cast<double>(n + 1) * h, x, field.lo(), field.hi());
    }
    xs.push_back(x);
  }
  return xs;
}

EnsembleResult integrate_ensemble(std::span<const FieldRealization> fields, std::span<const double> x0s,
                                  const EnsembleConfig& cfg, InitialLayout layout) {
  require_step_and_horizon(cfg.h, cfg.T);
  if (fields.empty() || x0s.empty()) {
    throw std::invalid_argument("integrate_ensemble: need at least one field and one initial value");
  }
  const bool cross = cfg.pairing == Pairing::cross_product;
  if (!cross && fields.size() != x0s.size()) {
    throw std::invalid_argument("integrate_ensemble: one_to_one pairing needs as many initial values as fields");
  }
  const bool per_field_sets = cross && layout == InitialLayout::per_field;
  if (per_field_sets && x0s.size() % fields.size() != 0) {
    throw std::invalid_argument("integrate_ensemble: per_field layout needs the same number of values per field");
  }
  const std::size_t per_field = !cross ? 1 : per_field_sets ? x0s.size() / fields.size() : x0s.size();
  const std::size_t n_traj = fields.size() * per_field;
  const std::size_t n_times = step_count(cfg.T, cfg.h) + 1;

  EnsembleResult result;
  result.field_ids.resize(n_traj);
  result.x0_ids.resize(n_traj);
  result.terminal_states.resize(n_traj);
  if (cfg.keep_raw) {
    result.raw.resize(n_traj);
  }
  std::vector<std::vector<RunningMoments>> partial(fields.size(), std::vector<RunningMoments>(n_times));

  parallel_chunks(fields.size(), cfg.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      for (std::size_t j = 0; j < per_field; ++j) {
        const std::size_t x0_id = cross ? j : f;
        const std::size_t traj = f * per_field + j;
        std::vector<double> xs;
        try {
          xs = integrate_realization(fields[f], x0s[per_field_sets ? traj : x0_id], cfg.integrator, cfg.h, cfg.T);
        } catch (const GridEscape& e) {
          throw GridEscape(e.time(), e.state(), e.lo(), e.hi(),
                           "field " + std::to_string(f) + ", initial value " + std::to_string(x0_id));
        }
        for (std::size_t k = 0; k < n_times; ++k) {
          partial[f][k].add(xs[k]);
        }
        result.field_ids[traj] = f;
        result.x0_ids[traj] = x0_id;
        result.terminal_states[traj] = xs.back();
        if (cfg.keep_raw) {
          result.raw[traj] = std::move(xs);
        }
      }
    }
  });

  std::vector<RunningMoments> total(n_times);
  for (const auto& p : partial) {
    for (std::size_t k = 0; k < n_times; ++k) {
      total[k].merge(p[k]);
    }
  }
  auto& stats = result.stats;
  stats.meta.method = "mc";
  stats.meta.step = cfg.h;
  stats.meta.sample_count = n_traj;
  stats.reserve(n_times);
  for (std::size_t k = 0; k < n_times; ++k) {
    stats.push(static_cast<double>(k) * cfg.h, {total[k].mean, total[k].variance()});
  }
  return result;
}

EnsembleResult ensemble_stats(const FieldModel& model, const GaussianState& x0_dist, const EnsembleConfig& cfg) {
  cfg.validate();
  const auto fields = draw_fields(model, cfg);
  const auto x0s = cfg.pairing == Pairing::cross_product
                       ? draw_initial_value_sets(x0_dist, cfg.n_fields, cfg.n_initial, cfg.seed)
                       : draw_initial_values(x0_dist, cfg.n_initial, cfg.seed);
  return integrate_ensemble(fields, x0s, cfg,
                            cfg.pairing == Pairing::cross_product ? InitialLayout::per_field : InitialLayout::shared);
}

void write_raw_csv(const EnsembleResult& result, const std::filesystem::path& path) {
  if (result.raw.size() != result.terminal_states.size()) {
    throw std::logic_error("write_raw_csv: ensemble was run without keep_raw");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "field_id,x0_id,t,x\n";
  const double h = result.stats.meta.step;
  char buf[96];
  for (std::size_t i = 0; i < result.raw.size(); ++i) {
    for (std::size_t k = 0; k < result.raw[i].size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g\n", result.field_ids[i], result.x0_ids[i],
                    static_cast<double>(k) * h, result.raw[i][k]);
      out << buf;
    }
  }
}

}  // namespace gpode::mc
