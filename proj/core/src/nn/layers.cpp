#include "moma/nn/layers.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace moma::nn {

Mlp::Mlp(ParameterSet& ps, const std::string& prefix, const MlpSpec& spec)
    : ps_(&ps), spec_(spec) {
  if (spec.input_dim < 1 || spec.output_dim < 1) {
    throw std::invalid_argument("Mlp: input/output dims must be >= 1 (" + prefix + ")");
  }
  for (int h : spec.hidden) {
    if (h < 1) throw std::invalid_argument("Mlp: hidden dims must be >= 1 (" + prefix + ")");
  }
  int in = spec.input_dim;
  for (std::size_t k = 0; k <= spec.hidden.size(); ++k) {
    const int out = k < spec.hidden.size() ? spec.hidden[k] : spec.output_dim;
    const std::string layer = prefix + ".l" + std::to_string(k);
    w_ids_.push_back(ps.add_matrix(layer + ".w", static_cast<std::size_t>(out), static_cast<std::size_t>(in)));
    b_ids_.push_back(ps.add_vector(layer + ".b", static_cast<std::size_t>(out)));
    in = out;
  }
}

void Mlp::init(Rng& rng) {
  for (std::size_t k = 0; k < w_ids_.size(); ++k) ps_->init_linear(w_ids_[k], b_ids_[k], rng);
}

NodeId Mlp::forward(Tape& t, NodeId x) const {
  NodeId h = x;
  for (std::size_t k = 0; k < w_ids_.size(); ++k) {
    h = t.affine(*ps_, w_ids_[k], b_ids_[k], h);
    if (k + 1 < w_ids_.size()) h = t.relu(h);
  }
  return h;
}

GaussianHead::GaussianHead(ParameterSet& ps, const std::string& prefix, int in_dim, int out_dim)
    : ps_(&ps), out_dim_(out_dim) {
  if (in_dim < 1 || out_dim < 1) {
    throw std::invalid_argument("GaussianHead: dims must be >= 1 (" + prefix + ")");
  }
  w_mu_ = ps.add_matrix(prefix + ".mu.w", static_cast<std::size_t>(out_dim), static_cast<std::size_t>(in_dim));
  b_mu_ = ps.add_vector(prefix + ".mu.b", static_cast<std::size_t>(out_dim));
  w_ls_ = ps.add_matrix(prefix + ".ls.w", static_cast<std::size_t>(out_dim), static_cast<std::size_t>(in_dim));
  b_ls_ = ps.add_vector(prefix + ".ls.b", static_cast<std::size_t>(out_dim));
}

void GaussianHead::init(Rng& rng) {
  ps_->init_linear(w_mu_, b_mu_, rng);
  ps_->init_linear(w_ls_, b_ls_, rng);
}

GaussianHead::Out GaussianHead::forward(Tape& t, NodeId features) const {
  Out o;
  o.mu = t.affine(*ps_, w_mu_, b_mu_, features);
  o.log_sigma = t.clamp(t.affine(*ps_, w_ls_, b_ls_, features), kLogStdMin, kLogStdMax);
  return o;
}

CategoricalHead::CategoricalHead(ParameterSet& ps, const std::string& prefix, int in_dim, int n_actions)
    : ps_(&ps), n_actions_(n_actions) {
  if (in_dim < 1 || n_actions < 2) {
    throw std::invalid_argument("CategoricalHead: need in_dim >= 1 and >= 2 actions (" + prefix + ")");
  }
  w_ = ps.add_matrix(prefix + ".logits.w", static_cast<std::size_t>(n_actions), static_cast<std::size_t>(in_dim));
  b_ = ps.add_vector(prefix + ".logits.b", static_cast<std::size_t>(n_actions));
}

void CategoricalHead::init(Rng& rng) { ps_->init_linear(w_, b_, rng); }

NodeId CategoricalHead::forward(Tape& t, NodeId features) const {
  return t.affine(*ps_, w_, b_, features);
}

NodeId gaussian_nll(Tape& t, NodeId mu, NodeId log_sigma, NodeId target) {
  const int n = t.size(mu);
  if (t.size(log_sigma) != n || t.size(target) != n) {
    throw std::invalid_argument("gaussian_nll: dimension mismatch");
  }
  const NodeId diff = t.sub(target, mu);
  const NodeId inv_var = t.exp(t.scale(log_sigma, -2.0));  // 1 / sigma^2
  const NodeId quad = t.scale(t.sum(t.mul(t.mul(diff, diff), inv_var)), 0.5);
  const double const_term = 0.5 * n * std::log(2.0 * std::numbers::pi);
  return t.add_scalar(t.add(t.sum(log_sigma), quad), const_term);
}

NodeId gaussian_log_prob(Tape& t, NodeId mu, NodeId log_sigma, NodeId action) {
  return t.neg(gaussian_nll(t, mu, log_sigma, action));
}

NodeId bernoulli_bce(Tape& t, NodeId p, double target) {
  if (t.size(p) != 1) throw std::invalid_argument("bernoulli_bce: p must be scalar");
  if (target != 0.0 && target != 1.0) throw std::invalid_argument("bernoulli_bce: target must be 0 or 1");
  const NodeId pc = t.clamp(p, 1e-7, 1.0 - 1e-7);
  if (target == 1.0) return t.neg(t.log(pc));
  return t.neg(t.log(t.add_scalar(t.neg(pc), 1.0)));
}

Vec sample_diag_gaussian(std::span<const double> mu, std::span<const double> log_sigma, Rng& rng) {
  if (mu.size() != log_sigma.size()) {
    throw std::invalid_argument("sample_diag_gaussian: dimension mismatch");
  }
  Vec out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    out[i] = mu[i] + std::exp(log_sigma[i]) * rng.normal();
  }
  return out;
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
  if (probs.empty()) throw std::invalid_argument("sample_categorical: empty distribution");
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;  // guard against rounding shortfall
}

int argmax_index(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax_index: empty vector");
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace moma::nn
