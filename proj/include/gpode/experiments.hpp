#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpode/gp_core.hpp"
#include "gpode/mc_oracle.hpp"
#include "gpode/trajectory.hpp"

// Experiment runner: builds the model described by a config, runs the
// requested propagators and writes CSV/JSON for plotting.
namespace gpode::experiments {

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Kind { prototype, nonlinear, bifurcation, convergence };

[[nodiscard]] Kind parse_kind(const std::string& s);
[[nodiscard]] const char* to_string(Kind k);

/// Training data for the GP experiments: either generated from a known
/// function on an evenly spaced grid, or read from a CSV file.
struct DatasetSpec {
  std::string function = "x_cos_x";
  std::size_t n_points = 9;
  double lo = -4.0;
  double hi = 4.0;
  double noise_var = 1e-4;
  bool add_noise = true;
  std::uint64_t noise_seed = 7;
  std::string csv;  // when set, overrides the generated data
};

struct McScale {
  std::size_t n_fields = 500;
  std::size_t n_initial = 50;
  mc::Pairing pairing = mc::Pairing::cross_product;
  double grid_lo = -4.0;
  double grid_hi = 4.0;
  std::size_t grid_points = 400;
  mc::Integrator integrator = mc::Integrator::rk4;
  mc::Interpolation interpolation = mc::Interpolation::cubic;
  std::size_t n_samples = 20000;      // prototype sampler
  std::size_t restart_segments = 3;   // prototype restart demo
};

struct ExperimentConfig {
  Kind experiment = Kind::nonlinear;
  double a = 1.0;
  double beta = 1.0;
  DatasetSpec dataset;
  KernelConfig kernel;
  GaussianState initial{0.6, 0.005};
  std::vector<double> step_sizes{0.05, 0.1};
  double T = 8.0;
  std::vector<std::string> methods{"pull_full", "pull_none", "mm", "mc"};
  McScale mc;
  std::vector<double> truncation_epsilons;
  std::size_t histogram_bins = 40;
  std::uint64_t seed = 0;
  std::string output = "out";
  std::size_t workers = 1;
  bool dump_raw = false;

  [[nodiscard]] bool wants(const std::string& method) const;
};

/// Defaults for an experiment kind; every field can be overridden by config.
[[nodiscard]] ExperimentConfig default_config(Kind kind);

/// Reads a config object (or a run manifest containing one under "config").
/// Unknown keys and invalid values raise ConfigError.
[[nodiscard]] ExperimentConfig parse_config(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& cfg);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

/// Cross-field checks (step-size limits, method sets, grid multiples).
void validate(const ExperimentConfig& cfg);

/// Switches the ensemble to 5000 fields x 150 initial values.
void apply_paper_scale(ExperimentConfig& cfg);

[[nodiscard]] TrainingSet make_dataset(const DatasetSpec& spec);
[[nodiscard]] GpPosterior build_gp(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<TrajectoryDistribution> trajectories;
  nlohmann::json summary;
  std::map<std::string, double> timings_ms;
  std::vector<std::string> files;  // relative to the output directory
  std::vector<double> mc_terminal_states;

  /// Trajectory with the given method tag and step, or nullptr.
  [[nodiscard]] const TrajectoryDistribution* find(const std::string& method, double h) const;
};

/// Runs the experiment. With write_files the outputs plus manifest.json are
/// written to cfg.output.
[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_files = true);

[[nodiscard]] ExperimentResult run_prototype(const ExperimentConfig& cfg, bool write_files = true);
[[nodiscard]] ExperimentResult run_nonlinear(const ExperimentConfig& cfg, bool write_files = true);
[[nodiscard]] ExperimentResult run_bifurcation(const ExperimentConfig& cfg, bool write_files = true);
[[nodiscard]] ExperimentResult run_convergence(const ExperimentConfig& cfg, bool write_files = true);

/// "t,mean,var" with 17 significant digits.
void write_trajectory_csv(const TrajectoryDistribution& traj, const std::filesystem::path& path);

/// Largest |std_a - std_b| / std_b over times in [t_lo, t_hi] present in
/// both trajectories (matched by time to 1e-9).
[[nodiscard]] double max_relative_std_error(const TrajectoryDistribution& approx, const TrajectoryDistribution& ref,
                                            double t_lo, double t_hi);

/// Library version string (project version plus git describe when available).
[[nodiscard]] const char* version();

}  // namespace gpode::experiments
