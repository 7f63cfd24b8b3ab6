#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gpode/experiments.hpp"
#include "gpode/linear_prototype.hpp"
#include "gpode/log.hpp"
#include "gpode/mc_oracle.hpp"

namespace ex = gpode::experiments;

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-distribution propagation for GP vector fields"};
  app.set_version_flag("--version", std::string(ex::version()));
  app.require_subcommand(1);

  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  auto* run = app.add_subcommand("run", "Run an experiment from a config (.json, .toml or a manifest.json)");
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t workers = 0;
  bool paper_scale = false;
  bool dump_raw = false;
  run->add_option("config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Override the RNG seed");
  run->add_option("--out-dir", out_dir, "Override the output directory");
  run->add_option("--workers", workers, "Worker threads for sampling (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  run->add_flag("--paper-scale", paper_scale, "Use 5000 fields x 150 initial values for Monte Carlo");
  run->add_flag("--dump-raw", dump_raw, "Write every Monte Carlo trajectory to mc_raw.csv");

  auto* defaults = app.add_subcommand("defaults", "Print the default config of an experiment as JSON");
  std::string kind;
  defaults->add_option("experiment", kind, "prototype | nonlinear | bifurcation | convergence")->required();

  CLI11_PARSE(app, argc, argv);
  gpode::log::set_level(verbose ? gpode::log::Level::info : gpode::log::Level::warn);

  try {
    if (*defaults) {
      std::cout << ex::to_json(ex::default_config(ex::parse_kind(kind))).dump(2) << '\n';
      return 0;
    }
    auto cfg = ex::load_config(config_path);
    if (*seed_opt) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output = out_dir;
    if (workers > 0) cfg.workers = workers;
    if (paper_scale) ex::apply_paper_scale(cfg);
    if (dump_raw) cfg.dump_raw = true;
    ex::validate(cfg);

    const auto result = ex::run_experiment(cfg);
    std::cout << "wrote " << result.files.size() + 1 << " files to " << cfg.output << '\n';
    return 0;
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const gpode::mc::GridEscape& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
