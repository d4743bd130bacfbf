#include "moma/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "moma/common.hpp"

namespace moma::nn {

double clip_grad_norm(ParameterSet& ps, double max_norm) {
  auto g = ps.grads();
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double s = max_norm / norm;
  for (double& v : g) v *= s;
  return s;
}

Adam::Adam(ParameterSet& ps, double lr, double beta1, double beta2, double eps)
    : ps_(ps), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.assign(ps.size(), 0.0);
  v_.assign(ps.size(), 0.0);
}

void Adam::step() {
  if (!ps_.grads_finite()) throw NumericError("Adam::step: non-finite gradient");
  ++t_;
  auto vals = ps_.values();
  auto g = ps_.grads();
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < vals.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g[i] * g[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    vals[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
  if (!ps_.values_finite()) throw NumericError("Adam::step: non-finite parameter after update");
}

void Adam::restore(std::span<const double> m, std::span<const double> v, long long t) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw std::invalid_argument("Adam::restore: moment size mismatch");
  }
  std::copy(m.begin(), m.end(), m_.begin());
  std::copy(v.begin(), v.end(), v_.begin());
  t_ = t;
}

}  // namespace moma::nn
