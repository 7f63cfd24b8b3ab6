#include "gpode/gp_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "gpode/parallel.hpp"
#include "gpode/rng.hpp"

namespace gpode {

void KernelConfig::validate() const {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw std::invalid_argument("kernel lengthscale must be positive and finite");
  }
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw std::invalid_argument("kernel amplitude must be positive and finite");
  }
}

double kernel_eval(const KernelConfig& cfg, double x, double xp) {
  const double d = x - xp;
  return cfg.amplitude * std::exp(-(d * d) / (2.0 * cfg.lengthscale * cfg.lengthscale));
}

double kernel_deriv_x(const KernelConfig& cfg, double x, double xp) {
  return -((x - xp) / (cfg.lengthscale * cfg.lengthscale)) * kernel_eval(cfg, x, xp);
}

void TrainingSet::validate() const {
  if (inputs.size() != outputs.size()) {
    throw std::invalid_argument("training inputs and outputs differ in length");
  }
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(inputs.begin(), inputs.end(), finite) || !std::all_of(outputs.begin(), outputs.end(), finite)) {
    throw std::invalid_argument("training data must be finite");
  }
  if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
    throw std::invalid_argument("noise variance must be nonnegative and finite");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainingSet load_training_csv(const std::filesystem::path& path, double noise_var) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open training CSV: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || trim(line) != "x,y") {
    throw std::runtime_error(path.string() + ": expected header 'x,y'");
  }
  TrainingSet out;
  out.noise_var = noise_var;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    }
    try {
      std::size_t used = 0;
      const std::string xs = trim(line.substr(0, comma));
      const std::string ys = trim(line.substr(comma + 1));
      const double x = std::stod(xs, &used);
      if (used != xs.size()) throw std::invalid_argument(xs);
      const double y = std::stod(ys, &used);
      if (used != ys.size()) throw std::invalid_argument(ys);
      out.inputs.push_back(x);
      out.outputs.push_back(y);
    } catch (const std::logic_error&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  out.validate();
  return out;
}

JitteredCholesky factorize_jittered(const Eigen::MatrixXd& matrix, double scale, const JitterPolicy& jitter) {
  const double max_diag = matrix.rows() > 0 ? matrix.diagonal().maxCoeff() : 0.0;
  const double floor = std::numeric_limits<double>::epsilon() * std::max(max_diag, 0.0);

  auto attempt = [&](double rel) -> std::optional<JitteredCholesky> {
    JitteredCholesky out;
    out.jitter = rel * scale;
    Eigen::MatrixXd a = matrix;
    a.diagonal().array() += out.jitter;
    out.llt.compute(a);
    if (out.llt.info() != Eigen::Success) {
      return std::nullopt;
    }
    const Eigen::VectorXd pivots = out.llt.matrixLLT().diagonal();
    for (Eigen::Index i = 0; i < pivots.size(); ++i) {
      if (!std::isfinite(pivots[i]) || pivots[i] * pivots[i] <= floor) {
        return std::nullopt;
      }
    }
    return out;
  };

  if (auto first = attempt(jitter.initial)) {
    return std::move(*first);
  }
  if (jitter.retry != jitter.initial) {
    if (auto second = attempt(jitter.retry)) {
      return std::move(*second);
    }
  }
  std::ostringstream msg;
  msg << "matrix of size " << matrix.rows() << " is not positive definite after jitter " << jitter.retry * scale;
  throw FactorizationFailure(msg.str());
}

GpPosterior condition(TrainingSet training, KernelConfig kernel, const JitterPolicy& jitter) {
  training.validate();
  kernel.validate();

  GpPosterior gp;
  gp.training_ = std::move(training);
  gp.kernel_ = kernel;

  const auto n = static_cast<Eigen::Index>(gp.training_.size());
  if (n == 0) {
    gp.weights_.resize(0);
    return gp;
  }

  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double k = kernel_eval(gp.kernel_, gp.training_.inputs[i], gp.training_.inputs[j]);
      gram(i, j) = k;
      gram(j, i) = k;
    }
  }
  gram.diagonal().array() += gp.training_.noise_var;

  auto chol = factorize_jittered(gram, gp.kernel_.amplitude, jitter);
  gp.llt_ = std::move(chol.llt);
  gp.jitter_ = chol.jitter;
  gp.weights_ = gp.llt_.solve(Eigen::Map<const Eigen::VectorXd>(gp.training_.outputs.data(), n));
  return gp;
}

Eigen::VectorXd GpPosterior::cross_kernel(double x) const {
  const auto n = static_cast<Eigen::Index>(training_.size());
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k[i] = kernel_eval(kernel_, x, training_.inputs[i]);
  }
  return k;
}

Eigen::MatrixXd GpPosterior::solve_columns(const Eigen::MatrixXd& rhs) const {
  if (training_.size() == 0) {
    return Eigen::MatrixXd(0, rhs.cols());
  }
  return llt_.solve(rhs);
}

Eigen::VectorXd GpPosterior::solve(const Eigen::VectorXd& rhs) const {
  if (training_.size() == 0) {
    return Eigen::VectorXd(0);
  }
  return llt_.solve(rhs);
}

Eigen::VectorXd GpPosterior::whiten(double x) const {
  if (training_.size() == 0) {
    return Eigen::VectorXd(0);
  }
  return llt_.matrixL().solve(cross_kernel(x));
}

double GpPosterior::mean(double x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < training_.size(); ++i) {
    acc += weights_[static_cast<Eigen::Index>(i)] * kernel_eval(kernel_, x, training_.inputs[i]);
  }
  return acc;
}

double GpPosterior::mean_deriv(double x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < training_.size(); ++i) {
    acc += weights_[static_cast<Eigen::Index>(i)] * kernel_deriv_x(kernel_, x, training_.inputs[i]);
  }
  return acc;
}

double GpPosterior::cov(double x, double xp) const {
  const double prior = kernel_eval(kernel_, x, xp);
  if (training_.size() == 0) {
    return prior;
  }
  return prior - whiten(x).dot(whiten(xp));
}

double GpPosterior::var(double x) const { return std::max(cov(x, x), 0.0); }

Eigen::VectorXd GpPosterior::mean_on(std::span<const double> xs) const {
  Eigen::VectorXd m(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    m[static_cast<Eigen::Index>(i)] = mean(xs[i]);
  }
  return m;
}

Eigen::MatrixXd GpPosterior::cov_on(std::span<const double> xs) const {
  const auto m = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      c(i, j) = kernel_eval(kernel_, xs[i], xs[j]);
    }
  }
  const auto n = static_cast<Eigen::Index>(training_.size());
  if (n > 0) {
    Eigen::MatrixXd kxs(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      kxs.col(j) = cross_kernel(xs[j]);
    }
    const Eigen::MatrixXd v = llt_.matrixL().solve(kxs);
    c.triangularView<Eigen::Lower>() -= (v.transpose() * v);
  }
  c.triangularView<Eigen::StrictlyUpper>() = c.transpose();
  return c;
}

Eigen::MatrixXd sample_joint_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t n_samples,
                                      std::uint64_t seed, double jitter_scale, const JitterPolicy& jitter,
                                      std::size_t workers) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
    throw std::invalid_argument("sample_joint_gaussian: mean/covariance size mismatch");
  }
  const auto chol = factorize_jittered(cov, jitter_scale, jitter);
  const Eigen::MatrixXd lower = chol.llt.matrixL();
  const Eigen::Index dim = mean.size();

  Eigen::MatrixXd out(static_cast<Eigen::Index>(n_samples), dim);
  parallel_chunks(n_samples, workers, [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd z(dim);
    for (std::size_t s = begin; s < end; ++s) {
      auto rng = make_rng(seed, s);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index k = 0; k < dim; ++k) {
        z[k] = normal(rng);
      }
      out.row(static_cast<Eigen::Index>(s)) = (mean + lower.triangularView<Eigen::Lower>() * z).transpose();
    }
  });
  return out;
}

GridSample sample_on_grid(const GpPosterior& gp, std::span<const double> grid, std::size_t n_samples,
                          std::uint64_t seed, std::size_t workers) {
  if (n_samples == 0) {
    throw std::invalid_argument("sample_on_grid: n_samples must be >= 1");
  }
  if (grid.empty()) {
    throw std::invalid_argument("sample_on_grid: empty grid");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw std::invalid_argument("sample_on_grid: grid must be strictly increasing");
    }
  }
  GridSample out;
  out.grid.assign(grid.begin(), grid.end());
  out.seed = seed;
  out.values =
      sample_joint_gaussian(gp.mean_on(grid), gp.cov_on(grid), n_samples, seed, gp.kernel().amplitude, {}, workers);
  return out;
}

}  // namespace gpode
