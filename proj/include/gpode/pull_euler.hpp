#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gpode/field_model.hpp"
#include "gpode/trajectory.hpp"

// PULL explicit Euler: propagate uncertainty through local linearization.
//
// At step n the field is replaced by f_n(x) = a_n x + B_n with
//   a_n = mu'(nu_n),   B_n ~ N(mu(nu_n) - a_n nu_n, sigma^2(nu_n)),
// and one Euler step is taken on that linear ODE. The state/model covariance
// is carried through the telescope sum
//   cov(X_n, B_n) = h sum_{i<n} prod_{j=i+1}^{n-1} (1 + a_j h) cov_f(nu_i, nu_n),
// where cov_f is the field's posterior cross-covariance at the mean states.
namespace gpode::pull {

struct Linearization {
  double slope = 0.0;           // a
  double intercept_mean = 0.0;  // E[B]
  double intercept_var = 0.0;   // var(B)
};

[[nodiscard]] Linearization linearize(const FieldModel& model, double nu);

/// Which telescope-sum terms are kept.
class TruncationPolicy {
 public:
  enum class Mode { full, window, product_threshold, none_history };

  [[nodiscard]] static TruncationPolicy full() { return TruncationPolicy(Mode::full, 0, 0.0); }
  /// Keep only the most recent `terms` history entries. window(0) keeps none.
  [[nodiscard]] static TruncationPolicy window(std::size_t terms) { return TruncationPolicy(Mode::window, terms, 0.0); }
  /// Drop terms whose suffix product has magnitude below epsilon (> 0).
  [[nodiscard]] static TruncationPolicy product_threshold(double epsilon);
  [[nodiscard]] static TruncationPolicy none_history() { return TruncationPolicy(Mode::none_history, 0, 0.0); }
  /// Full history up to 2000 steps, product_threshold(1e-10) beyond.
  [[nodiscard]] static TruncationPolicy for_run(double T, double h);

  [[nodiscard]] Mode mode() const { return mode_; }
  [[nodiscard]] std::size_t window_size() const { return window_; }
  [[nodiscard]] double epsilon() const { return epsilon_; }

 private:
  TruncationPolicy(Mode mode, std::size_t window, double epsilon) : mode_(mode), window_(window), epsilon_(epsilon) {}

  Mode mode_;
  std::size_t window_;
  double epsilon_;
};

/// Linearization centers and slopes of all past steps plus the cached suffix
/// products prod_{j=i+1}^{n-1} (1 + a_j h) for the next step n.
class PullHistory {
 public:
  [[nodiscard]] std::size_t size() const { return centers_.size(); }
  [[nodiscard]] bool empty() const { return centers_.empty(); }
  [[nodiscard]] std::span<const double> centers() const { return centers_; }
  [[nodiscard]] std::span<const double> slopes() const { return slopes_; }
  [[nodiscard]] std::span<const double> suffix_products() const { return products_; }

  /// Records step n (center nu_n, slope a_n) taken with step h.
  void append(double center, double slope, double h);

  /// Suffix products recomputed from the stored slopes, for cache checks.
  [[nodiscard]] std::vector<double> recompute_suffix_products(double h) const;

 private:
  std::vector<double> centers_;
  std::vector<double> slopes_;
  std::vector<double> products_;
};

struct StepResult {
  GaussianState state;
  double cov_xb = 0.0;          // cov(X_n, B_n) used in the step
  std::size_t terms_used = 0;   // telescope terms that survived truncation
  bool clamped = false;
};

/// cov(X_n, B_n) for the current center nu_n given the history of steps 0..n-1.
[[nodiscard]] double state_model_cov(const FieldModel& model, const PullHistory& hist, double nu, double h,
                                     const TruncationPolicy& policy, std::size_t* terms_used = nullptr);

/// One PULL Euler step from state s. Appends (nu_n, a_n) to `hist`.
///   nu'    = nu + h mu(nu)
///   Sigma' = (1 + a h)^2 Sigma + h^2 sigma^2(nu) + 2 h (1 + a h) cov(X_n, B_n)
StepResult pull_step(const FieldModel& model, const GaussianState& s, PullHistory& hist, double h,
                     const TruncationPolicy& policy);

struct RunStats {
  std::size_t clamp_events = 0;
  std::size_t terms_used = 0;  // summed over all steps
};

[[nodiscard]] TrajectoryDistribution pull_trajectory(const FieldModel& model, const GaussianState& x0, double h,
                                                     double T, const TruncationPolicy& policy,
                                                     RunStats* stats = nullptr);

/// Deterministic explicit Euler on the mean field, n steps from x0.
[[nodiscard]] std::vector<double> euler_mean_path(const FieldModel& model, double x0, double h, std::size_t steps);

struct TruncationRow {
  double epsilon = 0.0;
  double terminal_var = 0.0;
  double deviation = 0.0;  // |terminal_var - full| / full
  std::size_t terms_used = 0;
};

/// Terminal-variance deviation of product_threshold(eps) runs from the
/// full-history run, one row per epsilon.
[[nodiscard]] std::vector<TruncationRow> truncation_error_report(const FieldModel& model, const GaussianState& x0,
                                                                 double h, double T,
                                                                 std::span<const double> epsilons);

}  // namespace gpode::pull
