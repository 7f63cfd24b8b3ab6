#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpode/field_model.hpp"
#include "gpode/trajectory.hpp"

// Sampling ground truth: joint draws of the field on a grid, interpolated,
// integrated from sampled initial values, reduced to per-time moments.
namespace gpode::mc {

enum class Interpolation { linear, cubic };
enum class Integrator { euler, rk4 };
enum class Pairing { cross_product, one_to_one };

[[nodiscard]] Interpolation parse_interpolation(const std::string& s);
[[nodiscard]] Integrator parse_integrator(const std::string& s);
[[nodiscard]] Pairing parse_pairing(const std::string& s);
[[nodiscard]] const char* to_string(Interpolation v);
[[nodiscard]] const char* to_string(Integrator v);
[[nodiscard]] const char* to_string(Pairing v);

/// Trajectory left the sampled grid; the grid span must be widened.
class GridEscape : public std::runtime_error {
 public:
  GridEscape(double time, double state, double lo, double hi, const std::string& context = {});
  [[nodiscard]] double time() const { return time_; }
  [[nodiscard]] double state() const { return state_; }
  [[nodiscard]] double lo() const { return lo_; }
  [[nodiscard]] double hi() const { return hi_; }

 private:
  double time_;
  double state_;
  double lo_;
  double hi_;
};

/// One sampled field, evaluable on [grid.front(), grid.back()]. Cubic mode
/// is the monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson).
class FieldRealization {
 public:
  FieldRealization(std::shared_ptr<const std::vector<double>> grid, std::vector<double> values,
                   Interpolation interpolation);

  [[nodiscard]] double operator()(double x) const;
  [[nodiscard]] bool contains(double x) const { return x >= lo() && x <= hi(); }
  [[nodiscard]] double lo() const { return grid_->front(); }
  [[nodiscard]] double hi() const { return grid_->back(); }
  [[nodiscard]] const std::vector<double>& grid() const { return *grid_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] Interpolation interpolation() const { return interpolation_; }

 private:
  std::shared_ptr<const std::vector<double>> grid_;
  std::vector<double> values_;
  std::vector<double> slopes_;  // node derivatives, cubic only
  Interpolation interpolation_;
};

struct EnsembleConfig {
  std::size_t n_fields = 500;
  std::size_t n_initial = 50;
  Pairing pairing = Pairing::cross_product;
  double grid_lo = -4.0;
  double grid_hi = 4.0;
  std::size_t grid_points = 400;
  Integrator integrator = Integrator::rk4;
  Interpolation interpolation = Interpolation::cubic;
  double h = 0.05;
  double T = 8.0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool keep_raw = false;

  void validate() const;
  [[nodiscard]] std::vector<double> grid() const;
};

/// n_fields joint draws of the model on the configured grid.
[[nodiscard]] std::vector<FieldRealization> draw_fields(const FieldModel& model, const EnsembleConfig& cfg);

/// n draws from x0_dist; value j of set `set` uses stream (seed, j, set) of a
/// dedicated tag.
[[nodiscard]] std::vector<double> draw_initial_values(const GaussianState& x0_dist, std::size_t n,
                                                      std::uint64_t seed, std::size_t set = 0);

/// n_fields consecutive sets of n_initial draws; set f is
/// draw_initial_values(x0_dist, n_initial, seed, f).
[[nodiscard]] std::vector<double> draw_initial_value_sets(const GaussianState& x0_dist, std::size_t n_fields,
                                                          std::size_t n_initial, std::uint64_t seed);

/// step_count(T, h) + 1 states. Throws GridEscape if any state or rk4 stage
/// leaves the grid.
[[nodiscard]] std::vector<double> integrate_realization(const FieldRealization& field, double x0,
                                                        Integrator integrator, double h, double T);

struct EnsembleResult {
  TrajectoryDistribution stats;
  std::vector<std::size_t> field_ids;  // per trajectory
  std::vector<std::size_t> x0_ids;     // per trajectory
  std::vector<double> terminal_states; // per trajectory
  std::vector<std::vector<double>> raw; // per trajectory, only with keep_raw
};

/// How cross_product reads x0s: one set used with every field, or
/// fields.size() consecutive sets with set f used for field f.
enum class InitialLayout { shared, per_field };

/// Integrates explicit (field, x0) pairs. cross_product runs every field with
/// every initial value of its set; one_to_one pairs field i with x0s[i].
[[nodiscard]] EnsembleResult integrate_ensemble(std::span<const FieldRealization> fields, std::span<const double> x0s,
                                                const EnsembleConfig& cfg,
                                                InitialLayout layout = InitialLayout::shared);

/// draw_fields + initial draws + integrate_ensemble. cross_product draws a
/// fresh set of n_initial values per field, so every trajectory has its own
/// (seed, field, initial) stream.
[[nodiscard]] EnsembleResult ensemble_stats(const FieldModel& model, const GaussianState& x0_dist,
                                            const EnsembleConfig& cfg);

/// CSV with columns field_id,x0_id,t,x. Requires keep_raw.
void write_raw_csv(const EnsembleResult& result, const std::filesystem::path& path);

}  // namespace gpode::mc
