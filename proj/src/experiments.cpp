#include "gpode/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "gpode/config_io.hpp"
#include "gpode/field_model.hpp"
#include "gpode/linear_prototype.hpp"
#include "gpode/log.hpp"
#include "gpode/moment_matching.hpp"
#include "gpode/pull_euler.hpp"
#include "gpode/rng.hpp"

#ifndef GPODE_VERSION
#define GPODE_VERSION "unknown"
#endif

namespace gpode::experiments {

using nlohmann::json;

namespace {

const std::set<std::string> kAllMethods{"analytic",        "naive_euler",    "naive_flow", "corrected_euler",
                                        "corrected_flow",  "mm",             "pull_full",  "pull_none",
                                        "mc"};
const std::set<std::string> kGpMethods{"mm", "pull_full", "pull_none", "mc"};

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string step_tag(double h) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", h);
  return buf;
}

std::string method_file(const std::string& method, double h) { return method + "_h" + step_tag(h) + ".csv"; }

// --- config parsing -------------------------------------------------------

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where + key + ": unknown key");
    }
  }
}

template <typename T>
T read(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) {
    return fallback;
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + key + ": wrong type");
  }
}

double read_positive(const json& obj, const char* key, const std::string& where, double fallback) {
  const double v = read<double>(obj, key, where, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(where + key + ": must be positive and finite (got " + format_number(v) + ")");
  }
  return v;
}

std::size_t read_count(const json& obj, const char* key, const std::string& where, std::size_t fallback) {
  if (!obj.contains(key)) {
    return fallback;
  }
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + key + ": must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

const json& object_at(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_object()) {
    throw ConfigError(where + key + ": expected a table/object");
  }
  return v;
}

// --- small numeric helpers -------------------------------------------------

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::size_t index_for_time(const TrajectoryDistribution& traj, double t) {
  const double h = traj.meta.step;
  const auto k = static_cast<std::size_t>(std::llround(t / h));
  if (k >= traj.size() || std::abs(traj.times[k] - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    return traj.size();
  }
  return k;
}

template <typename Fn>
double max_relative_error(const TrajectoryDistribution& approx, const TrajectoryDistribution& ref, double t_lo,
                          double t_hi, Fn quantity) {
  double worst = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < approx.size(); ++k) {
    const double t = approx.times[k];
    if (t < t_lo - 1e-12 || t > t_hi + 1e-12) {
      continue;
    }
    const std::size_t r = index_for_time(ref, t);
    if (r == ref.size()) {
      continue;
    }
    const double want = quantity(ref, r);
    const double got = quantity(approx, k);
    worst = std::max(worst, std::abs(got - want) / std::abs(want));
    any = true;
  }
  return any ? worst : std::nan("");
}

// Explicit 4th-order Runge–Kutta on the mean field.
std::vector<double> rk4_mean_path(const FieldModel& model, double x0, double h, std::size_t steps) {
  std::vector<double> xs;
  xs.reserve(steps + 1);
  double x = x0;
  xs.push_back(x);
  for (std::size_t n = 0; n < steps; ++n) {
    const double k1 = model.mean(x);
    const double k2 = model.mean(x + 0.5 * h * k1);
    const double k3 = model.mean(x + 0.5 * h * k2);
    const double k4 = model.mean(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    xs.push_back(x);
  }
  return xs;
}

double smallest_step(const ExperimentConfig& cfg) {
  return *std::min_element(cfg.step_sizes.begin(), cfg.step_sizes.end());
}

mc::EnsembleConfig ensemble_config(const ExperimentConfig& cfg, double h) {
  mc::EnsembleConfig e;
  e.n_fields = cfg.mc.n_fields;
  e.n_initial = cfg.mc.n_initial;
  e.pairing = cfg.mc.pairing;
  e.grid_lo = cfg.mc.grid_lo;
  e.grid_hi = cfg.mc.grid_hi;
  e.grid_points = cfg.mc.grid_points;
  e.integrator = cfg.mc.integrator;
  e.interpolation = cfg.mc.interpolation;
  e.h = h;
  e.T = cfg.T;
  e.seed = cfg.seed;
  e.workers = cfg.workers;
  e.keep_raw = cfg.dump_raw;
  return e;
}

// Collects outputs and writes them under the output directory on demand.
class OutputSink {
 public:
  OutputSink(const ExperimentConfig& cfg, bool enabled, ExperimentResult& result)
      : dir_(cfg.output), enabled_(enabled), result_(result) {
    if (enabled_) {
      std::filesystem::create_directories(dir_);
    }
  }

  void trajectory(const TrajectoryDistribution& traj) {
    if (enabled_) {
      const auto name = method_file(traj.meta.method, traj.meta.step);
      write_trajectory_csv(traj, dir_ / name);
      result_.files.push_back(name);
    }
  }

  void text(const std::string& name, const std::string& body) {
    if (!enabled_) {
      return;
    }
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot write " + (dir_ / name).string());
    }
    out << body;
    result_.files.push_back(name);
  }

  void raw(const mc::EnsembleResult& ens, const std::string& name) {
    if (enabled_) {
      mc::write_raw_csv(ens, dir_ / name);
      result_.files.push_back(name);
    }
  }

 private:
  std::filesystem::path dir_;
  bool enabled_;
  ExperimentResult& result_;
};

std::string comparison_csv(const std::vector<const TrajectoryDistribution*>& columns,
                           const TrajectoryDistribution* reference) {
  std::ostringstream os;
  os << "t";
  for (const auto* c : columns) {
    os << ",std_" << c->meta.method;
  }
  if (reference != nullptr) {
    os << ",std_" << reference->meta.method;
  }
  os << '\n';
  const auto& base = *columns.front();
  for (std::size_t k = 0; k < base.size(); ++k) {
    os << format_number(base.times[k]);
    for (const auto* c : columns) {
      os << ',' << format_number(c->std_dev(k));
    }
    if (reference != nullptr) {
      const std::size_t r = index_for_time(*reference, base.times[k]);
      os << ',' << (r < reference->size() ? format_number(reference->std_dev(r)) : std::string("nan"));
    }
    os << '\n';
  }
  return os.str();
}

std::string dataset_csv(const TrainingSet& data) {
  std::ostringstream os;
  os << "x,y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << format_number(data.inputs[i]) << ',' << format_number(data.outputs[i]) << '\n';
  }
  return os.str();
}

std::string posterior_csv(const GpPosterior& gp, const std::vector<double>& grid) {
  std::ostringstream os;
  os << "x,mean,var\n";
  for (double x : grid) {
    os << format_number(x) << ',' << format_number(gp.mean(x)) << ',' << format_number(gp.var(x)) << '\n';
  }
  return os.str();
}

double peak_std(const TrajectoryDistribution& traj) {
  double peak = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    peak = std::max(peak, traj.std_dev(k));
  }
  return peak;
}

// Runs the GP propagators requested by the config at step h.
std::vector<TrajectoryDistribution> run_gp_methods(const ExperimentConfig& cfg, const GpField& field, double h,
                                                   ExperimentResult& result) {
  std::vector<TrajectoryDistribution> out;
  for (const std::string method : {"pull_full", "pull_none", "mm"}) {
    if (!cfg.wants(method)) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    TrajectoryDistribution traj;
    if (method == "mm") {
      traj = mm::mm_trajectory(field, cfg.initial, h, cfg.T);
    } else if (method == "pull_full") {
      traj = pull::pull_trajectory(field, cfg.initial, h, cfg.T, pull::TruncationPolicy::for_run(cfg.T, h));
      traj.meta.method = "pull_full";
    } else {
      traj = pull::pull_trajectory(field, cfg.initial, h, cfg.T, pull::TruncationPolicy::none_history());
    }
    result.timings_ms[method + "_h" + step_tag(h)] = elapsed_ms(start);
    out.push_back(std::move(traj));
  }
  return out;
}

std::optional<mc::EnsembleResult> run_mc(const ExperimentConfig& cfg, const GpField& field, ExperimentResult& result) {
  if (!cfg.wants("mc")) {
    return std::nullopt;
  }
  const double h = smallest_step(cfg);
  const auto start = std::chrono::steady_clock::now();
  try {
    auto ens = mc::ensemble_stats(field, cfg.initial, ensemble_config(cfg, h));
    result.timings_ms["mc_h" + step_tag(h)] = elapsed_ms(start);
    return ens;
  } catch (const mc::GridEscape& e) {
    throw mc::GridEscape(e.time(), e.state(), e.lo(), e.hi(),
                         std::string("mc ensemble; increase mc.grid_lo/mc.grid_hi in the config"));
  }
}

json state_json(const GaussianState& s) { return json{{"mean", s.mean}, {"var", s.var}}; }

}  // namespace

// --- public API --------------------------------------------------------------

Kind parse_kind(const std::string& s) {
  if (s == "prototype") return Kind::prototype;
  if (s == "nonlinear") return Kind::nonlinear;
  if (s == "bifurcation") return Kind::bifurcation;
  if (s == "convergence") return Kind::convergence;
  throw ConfigError("experiment: unknown experiment '" + s + "' (expected prototype|nonlinear|bifurcation|convergence)");
}

const char* to_string(Kind k) {
  switch (k) {
    case Kind::prototype:
      return "prototype";
    case Kind::nonlinear:
      return "nonlinear";
    case Kind::bifurcation:
      return "bifurcation";
    case Kind::convergence:
      return "convergence";
  }
  return "unknown";
}

bool ExperimentConfig::wants(const std::string& method) const {
  return std::find(methods.begin(), methods.end(), method) != methods.end();
}

ExperimentConfig default_config(Kind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  switch (kind) {
    case Kind::prototype:
      cfg.initial = {1.0, 0.25};
      cfg.step_sizes = {0.5, 0.1, 0.05};
      cfg.T = 10.0;
      cfg.methods = {"analytic", "naive_euler", "naive_flow", "corrected_euler", "corrected_flow", "mc"};
      break;
    case Kind::nonlinear:
      cfg.initial = {0.6, 0.005};
      cfg.step_sizes = {0.05, 0.1};
      cfg.T = 8.0;
      cfg.methods = {"pull_full", "pull_none", "mm", "mc"};
      break;
    case Kind::bifurcation:
      cfg.initial = {0.05, 0.01};
      cfg.step_sizes = {0.05};
      cfg.T = 8.0;
      cfg.methods = {"pull_full", "mc"};
      cfg.dump_raw = true;
      break;
    case Kind::convergence:
      cfg.initial = {0.6, 0.005};
      cfg.step_sizes = {0.2, 0.1, 0.05, 0.025};
      cfg.T = 8.0;
      cfg.methods = {"pull_full", "mc"};
      break;
  }
  return cfg;
}

ExperimentConfig parse_config(const json& input) {
  if (!input.is_object()) {
    throw ConfigError("config: expected an object");
  }
  const json& j = input.contains("config") && input.at("config").is_object() ? input.at("config") : input;
  reject_unknown(j,
                 {"experiment", "a", "beta", "dataset", "kernel", "initial", "step_sizes", "T", "methods", "mc",
                  "truncation_epsilons", "histogram_bins", "seed", "output", "workers", "dump_raw"},
                 "");
  if (!j.contains("experiment")) {
    throw ConfigError("experiment: required (prototype|nonlinear|bifurcation|convergence)");
  }
  ExperimentConfig cfg = default_config(parse_kind(read<std::string>(j, "experiment", "", "")));

  cfg.a = read_positive(j, "a", "", cfg.a);
  cfg.beta = read<double>(j, "beta", "", cfg.beta);
  if (!(cfg.beta >= 0.0)) {
    throw ConfigError("beta: must be nonnegative");
  }

  if (j.contains("dataset")) {
    const auto& d = object_at(j, "dataset", "");
    const std::string w = "dataset.";
    reject_unknown(d, {"function", "n_points", "lo", "hi", "noise_var", "add_noise", "noise_seed", "csv"}, w);
    cfg.dataset.function = read<std::string>(d, "function", w, cfg.dataset.function);
    cfg.dataset.n_points = read_count(d, "n_points", w, cfg.dataset.n_points);
    cfg.dataset.lo = read<double>(d, "lo", w, cfg.dataset.lo);
    cfg.dataset.hi = read<double>(d, "hi", w, cfg.dataset.hi);
    cfg.dataset.noise_var = read<double>(d, "noise_var", w, cfg.dataset.noise_var);
    cfg.dataset.add_noise = read<bool>(d, "add_noise", w, cfg.dataset.add_noise);
    cfg.dataset.noise_seed = read<std::uint64_t>(d, "noise_seed", w, cfg.dataset.noise_seed);
    cfg.dataset.csv = read<std::string>(d, "csv", w, cfg.dataset.csv);
  }
  if (j.contains("kernel")) {
    const auto& k = object_at(j, "kernel", "");
    reject_unknown(k, {"lengthscale", "amplitude"}, "kernel.");
    cfg.kernel.lengthscale = read_positive(k, "lengthscale", "kernel.", cfg.kernel.lengthscale);
    cfg.kernel.amplitude = read_positive(k, "amplitude", "kernel.", cfg.kernel.amplitude);
  }
  if (j.contains("initial")) {
    const auto& s = object_at(j, "initial", "");
    reject_unknown(s, {"mean", "var"}, "initial.");
    cfg.initial.mean = read<double>(s, "mean", "initial.", cfg.initial.mean);
    cfg.initial.var = read<double>(s, "var", "initial.", cfg.initial.var);
  }
  cfg.step_sizes = read<std::vector<double>>(j, "step_sizes", "", cfg.step_sizes);
  cfg.T = read_positive(j, "T", "", cfg.T);
  cfg.methods = read<std::vector<std::string>>(j, "methods", "", cfg.methods);
  if (j.contains("mc")) {
    const auto& m = object_at(j, "mc", "");
    const std::string w = "mc.";
    reject_unknown(m,
                   {"n_fields", "n_initial", "pairing", "grid_lo", "grid_hi", "grid_points", "integrator",
                    "interpolation", "n_samples", "restart_segments"},
                   w);
    cfg.mc.n_fields = read_count(m, "n_fields", w, cfg.mc.n_fields);
    cfg.mc.n_initial = read_count(m, "n_initial", w, cfg.mc.n_initial);
    cfg.mc.grid_lo = read<double>(m, "grid_lo", w, cfg.mc.grid_lo);
    cfg.mc.grid_hi = read<double>(m, "grid_hi", w, cfg.mc.grid_hi);
    cfg.mc.grid_points = read_count(m, "grid_points", w, cfg.mc.grid_points);
    cfg.mc.n_samples = read_count(m, "n_samples", w, cfg.mc.n_samples);
    cfg.mc.restart_segments = read_count(m, "restart_segments", w, cfg.mc.restart_segments);
    try {
      if (m.contains("pairing")) cfg.mc.pairing = mc::parse_pairing(read<std::string>(m, "pairing", w, ""));
      if (m.contains("integrator")) cfg.mc.integrator = mc::parse_integrator(read<std::string>(m, "integrator", w, ""));
      if (m.contains("interpolation")) {
        cfg.mc.interpolation = mc::parse_interpolation(read<std::string>(m, "interpolation", w, ""));
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(w + e.what());
    }
  }
  cfg.truncation_epsilons = read<std::vector<double>>(j, "truncation_epsilons", "", cfg.truncation_epsilons);
  cfg.histogram_bins = read_count(j, "histogram_bins", "", cfg.histogram_bins);
  cfg.seed = read<std::uint64_t>(j, "seed", "", cfg.seed);
  cfg.output = read<std::string>(j, "output", "", cfg.output);
  cfg.workers = read_count(j, "workers", "", cfg.workers);
  cfg.dump_raw = read<bool>(j, "dump_raw", "", cfg.dump_raw);
  validate(cfg);
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = to_string(cfg.experiment);
  j["a"] = cfg.a;
  j["beta"] = cfg.beta;
  j["dataset"] = {{"function", cfg.dataset.function},   {"n_points", cfg.dataset.n_points},
                  {"lo", cfg.dataset.lo},               {"hi", cfg.dataset.hi},
                  {"noise_var", cfg.dataset.noise_var}, {"add_noise", cfg.dataset.add_noise},
                  {"noise_seed", cfg.dataset.noise_seed}, {"csv", cfg.dataset.csv}};
  j["kernel"] = {{"lengthscale", cfg.kernel.lengthscale}, {"amplitude", cfg.kernel.amplitude}};
  j["initial"] = state_json(cfg.initial);
  j["step_sizes"] = cfg.step_sizes;
  j["T"] = cfg.T;
  j["methods"] = cfg.methods;
  j["mc"] = {{"n_fields", cfg.mc.n_fields},
             {"n_initial", cfg.mc.n_initial},
             {"pairing", mc::to_string(cfg.mc.pairing)},
             {"grid_lo", cfg.mc.grid_lo},
             {"grid_hi", cfg.mc.grid_hi},
             {"grid_points", cfg.mc.grid_points},
             {"integrator", mc::to_string(cfg.mc.integrator)},
             {"interpolation", mc::to_string(cfg.mc.interpolation)},
             {"n_samples", cfg.mc.n_samples},
             {"restart_segments", cfg.mc.restart_segments}};
  j["truncation_epsilons"] = cfg.truncation_epsilons;
  j["histogram_bins"] = cfg.histogram_bins;
  j["seed"] = cfg.seed;
  j["output"] = cfg.output;
  j["workers"] = cfg.workers;
  j["dump_raw"] = cfg.dump_raw;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = load_structured_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j);
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.methods.empty()) {
    throw ConfigError("methods: at least one method is required");
  }
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const auto& m = cfg.methods[i];
    const std::string where = "methods[" + std::to_string(i) + "]: ";
    if (!kAllMethods.count(m)) {
      throw ConfigError(where + "unknown method '" + m + "'");
    }
    if (cfg.experiment != Kind::prototype && !kGpMethods.count(m)) {
      throw ConfigError(where + "'" + m + "' is only available for the prototype experiment");
    }
  }
  if (cfg.step_sizes.empty()) {
    throw ConfigError("step_sizes: at least one step size is required");
  }
  for (std::size_t i = 0; i < cfg.step_sizes.size(); ++i) {
    const double h = cfg.step_sizes[i];
    const std::string where = "step_sizes[" + std::to_string(i) + "]: ";
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw ConfigError(where + "must be positive and finite");
    }
    if (h > cfg.T) {
      throw ConfigError(where + "larger than the horizon T");
    }
    if (cfg.experiment == Kind::prototype && cfg.a * h >= 2.0) {
      throw ConfigError(where + "a*h = " + format_number(cfg.a * h) +
                        " violates the explicit Euler stability limit a*h < 2 (naive Euler fixed point undefined)");
    }
  }
  if (!(cfg.initial.var >= 0.0) || !std::isfinite(cfg.initial.var) || !std::isfinite(cfg.initial.mean)) {
    throw ConfigError("initial.var: must be nonnegative and finite");
  }
  if (cfg.experiment == Kind::convergence && cfg.step_sizes.size() < 3) {
    throw ConfigError("step_sizes: the convergence experiment needs at least 3 step sizes");
  }
  if (cfg.experiment != Kind::prototype) {
    const double hmin = *std::min_element(cfg.step_sizes.begin(), cfg.step_sizes.end());
    for (std::size_t i = 0; i < cfg.step_sizes.size(); ++i) {
      const double ratio = cfg.step_sizes[i] / hmin;
      if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
        throw ConfigError("step_sizes[" + std::to_string(i) +
                          "]: must be an integer multiple of the smallest step (the MC reference is shared)");
      }
    }
    if (cfg.dataset.csv.empty()) {
      if (cfg.dataset.function != "x_cos_x") {
        throw ConfigError("dataset.function: unknown function '" + cfg.dataset.function + "' (expected x_cos_x)");
      }
      if (cfg.dataset.n_points < 1) {
        throw ConfigError("dataset.n_points: must be >= 1");
      }
      if (cfg.dataset.n_points > 1 && !(cfg.dataset.hi > cfg.dataset.lo)) {
        throw ConfigError("dataset.hi: must exceed dataset.lo");
      }
    }
    if (!(cfg.dataset.noise_var >= 0.0)) {
      throw ConfigError("dataset.noise_var: must be nonnegative");
    }
    if (cfg.wants("mc")) {
      if (cfg.mc.n_fields == 0 || cfg.mc.n_initial == 0) {
        throw ConfigError("mc.n_fields: n_fields and n_initial must be positive");
      }
      if (cfg.mc.pairing == mc::Pairing::one_to_one && cfg.mc.n_fields != cfg.mc.n_initial) {
        throw ConfigError("mc.pairing: one_to_one needs n_fields == n_initial");
      }
      if (!(cfg.mc.grid_hi > cfg.mc.grid_lo) || cfg.mc.grid_points < 2) {
        throw ConfigError("mc.grid_points: need grid_hi > grid_lo and at least 2 points");
      }
    }
  } else if (cfg.wants("mc") && cfg.mc.n_samples < 2) {
    throw ConfigError("mc.n_samples: must be >= 2");
  }
  if (cfg.experiment == Kind::convergence && !cfg.wants("mc")) {
    throw ConfigError("methods: the convergence experiment needs 'mc' for the variance error");
  }
  if (cfg.experiment == Kind::convergence && !cfg.wants("pull_full")) {
    throw ConfigError("methods: the convergence experiment needs 'pull_full'");
  }
  for (double eps : cfg.truncation_epsilons) {
    if (!(eps > 0.0)) {
      throw ConfigError("truncation_epsilons: values must be positive");
    }
  }
  if (cfg.histogram_bins < 1) {
    throw ConfigError("histogram_bins: must be >= 1");
  }
  if (cfg.workers < 1) {
    throw ConfigError("workers: must be >= 1");
  }
}

void apply_paper_scale(ExperimentConfig& cfg) {
  cfg.mc.n_fields = 5000;
  cfg.mc.n_initial = 150;
  cfg.mc.pairing = mc::Pairing::cross_product;
}

TrainingSet make_dataset(const DatasetSpec& spec) {
  if (!spec.csv.empty()) {
    return load_training_csv(spec.csv, spec.noise_var);
  }
  if (spec.function != "x_cos_x") {
    throw ConfigError("dataset.function: unknown function '" + spec.function + "'");
  }
  TrainingSet data;
  data.noise_var = spec.noise_var;
  const double sd = std::sqrt(spec.noise_var);
  for (std::size_t i = 0; i < spec.n_points; ++i) {
    const double x = spec.n_points == 1
                         ? spec.lo
                         : spec.lo + (spec.hi - spec.lo) * static_cast<double>(i) / static_cast<double>(spec.n_points - 1);
    double y = x * std::cos(x);
    if (spec.add_noise && sd > 0.0) {
      auto rng = make_rng(spec.noise_seed, i);
      std::normal_distribution<double> normal(0.0, sd);
      y += normal(rng);
    }
    data.inputs.push_back(x);
    data.outputs.push_back(y);
  }
  return data;
}

GpPosterior build_gp(const ExperimentConfig& cfg) { return condition(make_dataset(cfg.dataset), cfg.kernel); }

const TrajectoryDistribution* ExperimentResult::find(const std::string& method, double h) const {
  for (const auto& t : trajectories) {
    if (t.meta.method == method && std::abs(t.meta.step - h) <= 1e-12 * std::max(1.0, h)) {
      return &t;
    }
  }
  return nullptr;
}

void write_trajectory_csv(const TrajectoryDistribution& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << "t,mean,var\n";
  char buf[128];
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", traj.times[k], traj.means[k], traj.vars[k]);
    out << buf;
  }
}

double max_relative_std_error(const TrajectoryDistribution& approx, const TrajectoryDistribution& ref, double t_lo,
                              double t_hi) {
  return max_relative_error(approx, ref, t_lo, t_hi,
                            [](const TrajectoryDistribution& tr, std::size_t k) { return tr.std_dev(k); });
}

const char* version() { return GPODE_VERSION; }

// --- experiments -----------------------------------------------------------------

ExperimentResult run_prototype(const ExperimentConfig& cfg, bool write_files) {
  validate(cfg);
  const linear::LinearModelDist model{cfg.a, cfg.beta};
  model.validate();
  const LinearField field = linear::embed(model);

  ExperimentResult result;
  OutputSink sink(cfg, write_files, result);
  json per_step = json::array();

  for (double h : cfg.step_sizes) {
    json terminal;
    for (const auto& method : cfg.methods) {
      const auto start = std::chrono::steady_clock::now();
      TrajectoryDistribution traj;
      if (method == "analytic") {
        traj = linear::propagate(model, cfg.initial, h, cfg.T, linear::Propagator::analytic);
      } else if (method == "naive_euler") {
        traj = linear::propagate(model, cfg.initial, h, cfg.T, linear::Propagator::naive_euler);
      } else if (method == "naive_flow") {
        traj = linear::propagate(model, cfg.initial, h, cfg.T, linear::Propagator::naive_flow);
      } else if (method == "corrected_euler") {
        traj = linear::propagate(model, cfg.initial, h, cfg.T, linear::Propagator::corrected_euler);
      } else if (method == "corrected_flow") {
        traj = linear::propagate(model, cfg.initial, h, cfg.T, linear::Propagator::corrected_flow);
      } else if (method == "mm") {
        traj = mm::mm_trajectory(field, cfg.initial, h, cfg.T);
      } else if (method == "pull_full") {
        traj = pull::pull_trajectory(field, cfg.initial, h, cfg.T, pull::TruncationPolicy::full());
      } else if (method == "pull_none") {
        traj = pull::pull_trajectory(field, cfg.initial, h, cfg.T, pull::TruncationPolicy::none_history());
      } else if (method == "mc") {
        traj = linear::sample_prototype(model, cfg.initial, h, cfg.T, cfg.mc.n_samples, cfg.seed);
      }
      result.timings_ms[method + "_h" + step_tag(h)] = elapsed_ms(start);
      terminal[method] = traj.terminal().var;
      sink.trajectory(traj);
      result.trajectories.push_back(std::move(traj));
    }

    // Fixed points by formula and by iterating the naive recursions.
    GaussianState euler{0.0, 0.0};
    GaussianState flow{0.0, 0.0};
    for (int it = 0; it < 10'000'000; ++it) {
      const auto next = linear::naive_euler_step(model, euler, h);
      const bool done = std::abs(next.var - euler.var) < 1e-15;
      euler = next;
      if (done) break;
    }
    for (int it = 0; it < 10'000'000; ++it) {
      const auto next = linear::naive_iter_flow_step(model, flow, h);
      const bool done = std::abs(next.var - flow.var) < 1e-15;
      flow = next;
      if (done) break;
    }
    per_step.push_back({{"h", h},
                        {"euler_fixed_point", linear::naive_euler_fixed_point(model, h)},
                        {"euler_fixed_point_iterated", euler.var},
                        {"iter_flow_fixed_point", linear::iter_flow_fixed_point(model, h)},
                        {"iter_flow_fixed_point_iterated", flow.var},
                        {"terminal_var", terminal}});
  }

  if (cfg.wants("mc") && cfg.mc.restart_segments >= 1) {
    const double h = smallest_step(cfg);
    const auto start = std::chrono::steady_clock::now();
    auto restart = linear::restart_sampling_demo(model, cfg.initial, cfg.T / static_cast<double>(cfg.mc.restart_segments),
                                                 cfg.mc.restart_segments, h, cfg.mc.n_samples, cfg.seed);
    result.timings_ms["mc_restart_h" + step_tag(h)] = elapsed_ms(start);
    sink.trajectory(restart);
    result.trajectories.push_back(std::move(restart));
  }

  result.summary = {{"experiment", "prototype"},
                    {"a", cfg.a},
                    {"beta", cfg.beta},
                    {"exact_fixed_point", linear::exact_fixed_point_var(model)},
                    {"per_step", per_step}};
  sink.text("summary.json", result.summary.dump(2) + "\n");
  return result;
}

ExperimentResult run_nonlinear(const ExperimentConfig& cfg, bool write_files) {
  validate(cfg);
  const GpField field(build_gp(cfg));
  ExperimentResult result;
  OutputSink sink(cfg, write_files, result);
  sink.text("dataset.csv", dataset_csv(field.posterior().training()));
  sink.text("gp_posterior.csv", posterior_csv(field.posterior(), ensemble_config(cfg, smallest_step(cfg)).grid()));

  const auto ens = run_mc(cfg, field, result);
  const TrajectoryDistribution* mc_traj = nullptr;
  if (ens) {
    result.trajectories.push_back(ens->stats);
    result.mc_terminal_states = ens->terminal_states;
    sink.trajectory(ens->stats);
    if (cfg.dump_raw) {
      sink.raw(*ens, "mc_raw.csv");
    }
  }

  json per_step = json::array();
  for (double h : cfg.step_sizes) {
    auto runs = run_gp_methods(cfg, field, h, result);
    for (const auto& r : runs) {
      sink.trajectory(r);
      result.trajectories.push_back(r);
    }
  }
  if (ens) {
    mc_traj = &result.trajectories.front();
  }

  for (double h : cfg.step_sizes) {
    std::vector<const TrajectoryDistribution*> cols;
    json entry{{"h", h}};
    json terminal_std;
    for (const std::string method : {"pull_full", "pull_none", "mm"}) {
      if (const auto* t = result.find(method, h)) {
        cols.push_back(t);
        terminal_std[method] = t->std_dev(t->size() - 1);
      }
    }
    if (mc_traj != nullptr) {
      const std::size_t r = index_for_time(*mc_traj, cfg.T);
      if (r < mc_traj->size()) {
        terminal_std["mc"] = mc_traj->std_dev(r);
      }
      if (const auto* p = result.find("pull_full", h)) {
        entry["pull_full_vs_mc_max_rel_std_error"] = max_relative_std_error(*p, *mc_traj, 0.5, cfg.T);
      }
    }
    const auto* mm_traj = result.find("mm", h);
    const auto* none_traj = result.find("pull_none", h);
    if (mm_traj != nullptr && none_traj != nullptr) {
      entry["mm_vs_pull_none_max_rel_std_error"] = max_relative_std_error(*mm_traj, *none_traj, 0.0, cfg.T);
    }
    entry["terminal_std"] = terminal_std;
    per_step.push_back(entry);
    if (!cols.empty()) {
      sink.text("std_comparison_h" + step_tag(h) + ".csv", comparison_csv(cols, mc_traj));
    }
  }

  result.summary = {{"experiment", to_string(cfg.experiment)}, {"per_step", per_step}};
  if (!cfg.truncation_epsilons.empty()) {
    const double h = smallest_step(cfg);
    const auto rows = pull::truncation_error_report(field, cfg.initial, h, cfg.T, cfg.truncation_epsilons);
    std::ostringstream os;
    os << "epsilon,terminal_var,deviation,terms_used\n";
    json jrows = json::array();
    for (const auto& row : rows) {
      os << format_number(row.epsilon) << ',' << format_number(row.terminal_var) << ',' << format_number(row.deviation)
         << ',' << row.terms_used << '\n';
      jrows.push_back({{"epsilon", row.epsilon}, {"deviation", row.deviation}, {"terms_used", row.terms_used}});
    }
    sink.text("truncation_h" + step_tag(h) + ".csv", os.str());
    result.summary["truncation"] = jrows;
  }
  sink.text("summary.json", result.summary.dump(2) + "\n");
  return result;
}

ExperimentResult run_bifurcation(const ExperimentConfig& cfg, bool write_files) {
  validate(cfg);
  const GpField field(build_gp(cfg));
  ExperimentResult result;
  OutputSink sink(cfg, write_files, result);
  sink.text("dataset.csv", dataset_csv(field.posterior().training()));

  const auto ens = run_mc(cfg, field, result);
  json summary{{"experiment", "bifurcation"}};
  if (ens) {
    result.trajectories.push_back(ens->stats);
    result.mc_terminal_states = ens->terminal_states;
    sink.trajectory(ens->stats);
    if (cfg.dump_raw) {
      sink.raw(*ens, "mc_raw.csv");
    }

    const auto& xs = ens->terminal_states;
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi <= lo) {
      hi = lo + 1.0;
    }
    const std::size_t bins = cfg.histogram_bins;
    std::vector<std::size_t> counts(bins, 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    std::size_t negative = 0;
    std::size_t positive = 0;
    for (double x : xs) {
      auto b = static_cast<std::size_t>((x - lo) / width);
      counts[std::min(b, bins - 1)]++;
      negative += x < -0.5 ? 1 : 0;
      positive += x > 0.5 ? 1 : 0;
    }
    std::ostringstream os;
    os << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < bins; ++b) {
      const double bl = lo + width * static_cast<double>(b);
      const double bh = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
      os << format_number(bl) << ',' << format_number(bh) << ',' << counts[b] << '\n';
    }
    sink.text("terminal_histogram.csv", os.str());
    const double n = static_cast<double>(xs.size());
    summary["negative_cluster_mass"] = static_cast<double>(negative) / n;
    summary["positive_cluster_mass"] = static_cast<double>(positive) / n;
    summary["cluster_threshold"] = 0.5;
  }

  json per_step = json::array();
  for (double h : cfg.step_sizes) {
    for (auto& r : run_gp_methods(cfg, field, h, result)) {
      per_step.push_back({{"h", h},
                          {"method", r.meta.method},
                          {"peak_std", peak_std(r)},
                          {"terminal", state_json(r.terminal())}});
      sink.trajectory(r);
      result.trajectories.push_back(std::move(r));
    }
  }
  summary["per_step"] = per_step;
  result.summary = summary;
  sink.text("summary.json", result.summary.dump(2) + "\n");
  return result;
}

ExperimentResult run_convergence(const ExperimentConfig& cfg, bool write_files) {
  validate(cfg);
  const GpField field(build_gp(cfg));
  ExperimentResult result;
  OutputSink sink(cfg, write_files, result);

  std::vector<double> steps = cfg.step_sizes;
  std::sort(steps.begin(), steps.end(), std::greater<>());
  const double h_ref = steps.back() / 10.0;
  const auto start = std::chrono::steady_clock::now();
  const auto reference = rk4_mean_path(field, cfg.initial.mean, h_ref, step_count(cfg.T, h_ref));
  result.timings_ms["reference_rk4"] = elapsed_ms(start);
  {
    TrajectoryDistribution ref_traj;
    ref_traj.meta.method = "reference_mean_rk4";
    ref_traj.meta.step = h_ref;
    for (std::size_t k = 0; k < reference.size(); ++k) {
      ref_traj.push(static_cast<double>(k) * h_ref, {reference[k], 0.0});
    }
    sink.trajectory(ref_traj);
  }

  const auto ens = run_mc(cfg, field, result);
  result.trajectories.push_back(ens->stats);
  sink.trajectory(ens->stats);
  const TrajectoryDistribution mc_traj = ens->stats;

  std::ostringstream csv;
  csv << "h,mean_error_vs_reference,var_error_vs_mc\n";
  json rows = json::array();
  std::vector<double> mean_errors;
  for (double h : steps) {
    const auto t0 = std::chrono::steady_clock::now();
    auto traj = pull::pull_trajectory(field, cfg.initial, h, cfg.T, pull::TruncationPolicy::for_run(cfg.T, h));
    traj.meta.method = "pull_full";
    result.timings_ms["pull_full_h" + step_tag(h)] = elapsed_ms(t0);

    const auto stride = static_cast<std::size_t>(std::llround(h / h_ref));
    double mean_error = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      mean_error = std::max(mean_error, std::abs(traj.means[k] - reference[k * stride]));
    }
    const double var_error = max_relative_error(traj, mc_traj, 0.5, cfg.T, [](const TrajectoryDistribution& tr,
                                                                               std::size_t k) { return tr.vars[k]; });
    csv << format_number(h) << ',' << format_number(mean_error) << ',' << format_number(var_error) << '\n';
    rows.push_back({{"h", h}, {"mean_error_vs_reference", mean_error}, {"var_error_vs_mc", var_error}});
    mean_errors.push_back(mean_error);
    sink.trajectory(traj);
    result.trajectories.push_back(std::move(traj));
  }
  json orders = json::array();
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    orders.push_back(std::log(mean_errors[i] / mean_errors[i + 1]) / std::log(steps[i] / steps[i + 1]));
  }
  sink.text("convergence.csv", csv.str());
  result.summary = {{"experiment", "convergence"}, {"reference_step", h_ref}, {"rows", rows}, {"mean_orders", orders}};
  sink.text("summary.json", result.summary.dump(2) + "\n");
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_files) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  switch (cfg.experiment) {
    case Kind::prototype:
      result = run_prototype(cfg, write_files);
      break;
    case Kind::nonlinear:
      result = run_nonlinear(cfg, write_files);
      break;
    case Kind::bifurcation:
      result = run_bifurcation(cfg, write_files);
      break;
    case Kind::convergence:
      result = run_convergence(cfg, write_files);
      break;
  }
  result.timings_ms["total"] = elapsed_ms(start);
  if (write_files) {
    json manifest{{"tool", "gpode"},
                  {"version", version()},
                  {"seed", cfg.seed},
                  {"config", to_json(cfg)},
                  {"chosen_defaults",
                   {{"dataset.noise_var", "observation noise variance; default 1e-4"},
                    {"dataset.placement", "inputs evenly spaced on [lo, hi] inclusive"},
                    {"kernel", "lengthscale 1, amplitude 1, no hyperparameter training"},
                    {"T", "horizon 8 (GP experiments) and 10 (prototype)"},
                    {"bifurcation.initial", "N(0.05, 0.01)"},
                    {"mc.scale", "500 fields x 50 initial values unless --paper-scale"}}},
                  {"timings_ms", result.timings_ms},
                  {"outputs", result.files}};
    const auto path = std::filesystem::path(cfg.output) / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot write " + path.string());
    }
    out << manifest.dump(2) << '\n';
    log::info("wrote ", result.files.size() + 1, " files to ", cfg.output);
  }
  return result;
}

}  // namespace gpode::experiments
