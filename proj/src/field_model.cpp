#include "gpode/field_model.hpp"

#include <cmath>
#include <stdexcept>

#include "gpode/moment_matching.hpp"

namespace gpode {

MomentTerms GpField::expected_terms(const GaussianState& s) const { return mm::closed_form_moments(gp_, s); }

LinearField::LinearField(double decay, double beta, double offset) : decay_(decay), beta_(beta), offset_(offset) {
  if (!std::isfinite(decay) || !std::isfinite(offset)) {
    throw std::invalid_argument("LinearField: decay and offset must be finite");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("LinearField: beta must be nonnegative");
  }
}

MomentTerms LinearField::expected_terms(const GaussianState& s) const {
  const double second = s.var + s.mean * s.mean;  // E[X^2]
  MomentTerms t;
  t.e_mu = -decay_ * s.mean + offset_;
  t.e_sigma2 = beta_;
  t.e_mu2 = decay_ * decay_ * second - 2.0 * decay_ * offset_ * s.mean + offset_ * offset_;
  t.e_xmu = -decay_ * second + offset_ * s.mean;
  return t;
}

}  // namespace gpode
