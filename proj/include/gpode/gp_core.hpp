#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace gpode {

/// Squared-exponential kernel k(x, x') = amplitude * exp(-(x - x')^2 / (2 lengthscale^2)).
/// The lengthscale is the square root of the 1D entry of W.
struct KernelConfig {
  double lengthscale = 1.0;
  double amplitude = 1.0;

  void validate() const;
};

[[nodiscard]] double kernel_eval(const KernelConfig& cfg, double x, double xp);

/// Partial derivative of the kernel in its first argument.
[[nodiscard]] double kernel_deriv_x(const KernelConfig& cfg, double x, double xp);

struct TrainingSet {
  std::vector<double> inputs;
  std::vector<double> outputs;
  double noise_var = 0.0;

  [[nodiscard]] std::size_t size() const { return inputs.size(); }
  void validate() const;
};

/// Reads a CSV with header `x,y`.
[[nodiscard]] TrainingSet load_training_csv(const std::filesystem::path& path, double noise_var);

/// Diagonal jitter, relative to a scale (the kernel amplitude for Gram
/// matrices). `retry` is tried once if factorization with `initial` fails.
struct JitterPolicy {
  double initial = 1e-9;
  double retry = 1e-6;
};

class FactorizationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factor of `matrix + jitter * scale * I`. A pivot below
/// eps * max(diag) counts as failure so exactly singular inputs are reported
/// instead of producing inf/nan downstream.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // absolute value added to the diagonal
};

[[nodiscard]] JitteredCholesky factorize_jittered(const Eigen::MatrixXd& matrix, double scale,
                                                  const JitterPolicy& jitter);

/// A 1D zero-mean GP conditioned on noisy observations. Immutable after
/// construction; all queries are const and thread-safe.
class GpPosterior {
 public:
  [[nodiscard]] const TrainingSet& training() const { return training_; }
  [[nodiscard]] const KernelConfig& kernel() const { return kernel_; }
  [[nodiscard]] double applied_jitter() const { return jitter_; }
  [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }

  [[nodiscard]] double mean(double x) const;
  [[nodiscard]] double mean_deriv(double x) const;
  /// Posterior cross-covariance of f(x) and f(xp). Not clamped.
  [[nodiscard]] double cov(double x, double xp) const;
  /// max(cov(x, x), 0).
  [[nodiscard]] double var(double x) const;

  /// k(x, inputs) as a column vector.
  [[nodiscard]] Eigen::VectorXd cross_kernel(double x) const;
  /// (K + noise I)^{-1} rhs using the cached factorization.
  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  [[nodiscard]] Eigen::MatrixXd solve_columns(const Eigen::MatrixXd& rhs) const;
  /// L^{-1} k(x, inputs); cov(x, xp) = k(x, xp) - whiten(x) . whiten(xp).
  [[nodiscard]] Eigen::VectorXd whiten(double x) const;

  /// Posterior mean vector and covariance matrix on a set of points.
  [[nodiscard]] Eigen::VectorXd mean_on(std::span<const double> xs) const;
  [[nodiscard]] Eigen::MatrixXd cov_on(std::span<const double> xs) const;

 private:
  friend GpPosterior condition(TrainingSet training, KernelConfig kernel, const JitterPolicy& jitter);

  TrainingSet training_;
  KernelConfig kernel_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd weights_;
  double jitter_ = 0.0;
};

/// Factorizes K + noise_var I (+ jitter) and caches the weights. Throws
/// FactorizationFailure when the matrix is not positive definite.
[[nodiscard]] GpPosterior condition(TrainingSet training, KernelConfig kernel, const JitterPolicy& jitter = {});

[[nodiscard]] inline double posterior_mean(const GpPosterior& gp, double x) { return gp.mean(x); }
[[nodiscard]] inline double posterior_cov(const GpPosterior& gp, double x, double xp) { return gp.cov(x, xp); }
[[nodiscard]] inline double posterior_var(const GpPosterior& gp, double x) { return gp.var(x); }
[[nodiscard]] inline double posterior_mean_deriv(const GpPosterior& gp, double x) { return gp.mean_deriv(x); }

struct GridSample {
  std::vector<double> grid;
  Eigen::MatrixXd values;  // n_samples x grid.size()
  std::uint64_t seed = 0;
};

/// Draws `n_samples` rows of mean + L z with L the jittered Cholesky factor
/// of `cov` and z ~ N(0, I). Row i uses its own RNG stream derived from
/// (seed, i), so output is independent of `workers`.
[[nodiscard]] Eigen::MatrixXd sample_joint_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                                    std::size_t n_samples, std::uint64_t seed, double jitter_scale,
                                                    const JitterPolicy& jitter = {}, std::size_t workers = 1);

/// Exact joint draws of the posterior restricted to a strictly increasing grid.
[[nodiscard]] GridSample sample_on_grid(const GpPosterior& gp, std::span<const double> grid, std::size_t n_samples,
                                        std::uint64_t seed, std::size_t workers = 1);

}  // namespace gpode
