#include "gpode/gauss_hermite.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace gpode {

QuadratureRule gauss_hermite_normal(int order) {
  if (order < 1) {
    throw std::invalid_argument("Gauss-Hermite order must be >= 1");
  }
  // Jacobi matrix of He_n: zero diagonal, off-diagonal sqrt(k).
  const Eigen::Index n = order;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    sub[k] = std::sqrt(static_cast<double>(k + 1));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("Gauss-Hermite: eigen-solve did not converge");
  }

  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double v0 = solver.eigenvectors()(0, k);
    rule.nodes[static_cast<std::size_t>(k)] = solver.eigenvalues()[k];
    rule.weights[static_cast<std::size_t>(k)] = v0 * v0;
  }
  // The rule is symmetric; enforce it exactly so odd moments vanish.
  for (std::size_t k = 0; k < rule.nodes.size() / 2; ++k) {
    const std::size_t m = rule.nodes.size() - 1 - k;
    const double x = 0.5 * (rule.nodes[m] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[m] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[m] = x;
    rule.weights[k] = w;
    rule.weights[m] = w;
  }
  if (rule.nodes.size() % 2 == 1) {
    rule.nodes[rule.nodes.size() / 2] = 0.0;
  }
  return rule;
}

}  // namespace gpode
