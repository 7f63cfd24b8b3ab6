#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "gpode/experiments.hpp"
#include "gpode/gp_core.hpp"

namespace testing {

// The x cos(x) posterior used by the nonlinear experiment.
inline gpode::GpPosterior xcosx_gp() {
  return gpode::experiments::build_gp(gpode::experiments::default_config(gpode::experiments::Kind::nonlinear));
}

inline gpode::TrainingSet random_training(std::mt19937_64& rng, std::size_t n, double noise_var) {
  std::uniform_real_distribution<double> x(-3.0, 3.0);
  std::normal_distribution<double> y(0.0, 1.0);
  gpode::TrainingSet t;
  t.noise_var = noise_var;
  for (std::size_t i = 0; i < n; ++i) {
    t.inputs.push_back(x(rng));
    t.outputs.push_back(y(rng));
  }
  return t;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

}  // namespace testing
