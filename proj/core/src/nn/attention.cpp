#include "moma/nn/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace moma::nn {

Vec positional_encoding(int age, int dim) {
  Vec pe(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
    pe[static_cast<std::size_t>(i)] = std::sin(age * freq);
    if (i + 1 < dim) pe[static_cast<std::size_t>(i) + 1] = std::cos(age * freq);
  }
  return pe;
}

AttentionMemory::AttentionMemory(ParameterSet& ps, const std::string& prefix,
                                 const AttentionMemorySpec& spec)
    : ps_(&ps), spec_(spec) {
  if (spec.obs_dim < 1 || spec.action_dim < 1 || spec.window < 1 || spec.embed_dim < 1) {
    throw std::invalid_argument("AttentionMemory: all dims must be >= 1 (" + prefix + ")");
  }
  const auto e = static_cast<std::size_t>(spec.embed_dim);
  const auto p = static_cast<std::size_t>(pair_dim());
  enc_w_ = ps.add_matrix(prefix + ".enc.w", e, p);
  enc_b_ = ps.add_vector(prefix + ".enc.b", e);
  q_w_ = ps.add_matrix(prefix + ".q.w", e, e);
  q_b_ = ps.add_vector(prefix + ".q.b", e);
  k_w_ = ps.add_matrix(prefix + ".k.w", e, e);
  k_b_ = ps.add_vector(prefix + ".k.b", e);
  v_w_ = ps.add_matrix(prefix + ".v.w", e, e);
  v_b_ = ps.add_vector(prefix + ".v.b", e);
  ln_gain_ = ps.add_vector(prefix + ".ln.gain", e);
  ln_bias_ = ps.add_vector(prefix + ".ln.bias", e);
  soft_k_ = ps.add_matrix(prefix + ".soft.k.w", e, e);
  soft_q_ = ps.add_vector(prefix + ".soft.q", e);
  start_ = ps.add_vector(prefix + ".start", e);
}

void AttentionMemory::init(Rng& rng) {
  ps_->init_linear(enc_w_, enc_b_, rng);
  ps_->init_linear(q_w_, q_b_, rng);
  ps_->init_linear(k_w_, k_b_, rng);
  ps_->init_linear(v_w_, v_b_, rng);
  ps_->fill(ln_gain_, 1.0);
  ps_->fill(ln_bias_, 0.0);
  ps_->init_linear(soft_k_, -1, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.embed_dim));
  for (double& v : ps_->values(soft_q_)) v = rng.uniform(-bound, bound);
  for (double& v : ps_->values(start_)) v = rng.uniform(-bound, bound);
}

NodeId AttentionMemory::encode(Tape& t, std::span<const NodeId> pairs) const {
  const int L = static_cast<int>(pairs.size());
  if (L == 0) return t.param(*ps_, start_);
  if (L > spec_.window) throw std::invalid_argument("AttentionMemory::encode: history longer than window");
  for (NodeId p : pairs) {
    if (t.size(p) != pair_dim()) {
      throw std::invalid_argument("AttentionMemory::encode: pair dimension mismatch");
    }
  }

  // Entry embeddings with age-keyed positional encodings (newest age = 0).
  std::vector<NodeId> z(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const Vec pe = positional_encoding(L - 1 - l, spec_.embed_dim);
    z[static_cast<std::size_t>(l)] =
        t.add(t.affine(*ps_, enc_w_, enc_b_, pairs[static_cast<std::size_t>(l)]),
              t.constant(std::span<const double>(pe.data(), pe.size())));
  }

  // Single-head scaled dot-product self-attention.
  std::vector<NodeId> q(z.size()), k(z.size()), v(z.size());
  for (int l = 0; l < L; ++l) {
    q[static_cast<std::size_t>(l)] = t.affine(*ps_, q_w_, q_b_, z[static_cast<std::size_t>(l)]);
    k[static_cast<std::size_t>(l)] = t.affine(*ps_, k_w_, k_b_, z[static_cast<std::size_t>(l)]);
    v[static_cast<std::size_t>(l)] = t.affine(*ps_, v_w_, v_b_, z[static_cast<std::size_t>(l)]);
  }
  const double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(spec_.embed_dim));
  std::vector<NodeId> h(z.size());
  for (int l = 0; l < L; ++l) {
    std::vector<NodeId> scores(z.size());
    for (int m = 0; m < L; ++m) {
      scores[static_cast<std::size_t>(m)] =
          t.scale(t.dot(q[static_cast<std::size_t>(l)], k[static_cast<std::size_t>(m)]), inv_sqrt_e);
    }
    const NodeId attn = t.softmax(t.concat(std::span<const NodeId>(scores.data(), scores.size())));
    const NodeId pooled = t.axpy_combine(attn, std::span<const NodeId>(v.data(), v.size()));
    h[static_cast<std::size_t>(l)] =
        t.layer_norm(*ps_, ln_gain_, ln_bias_, t.add(z[static_cast<std::size_t>(l)], pooled));
  }

  // Soft attention pools the sequence: score_l = u . tanh(K_s h_l).
  const NodeId u = t.param(*ps_, soft_q_);
  std::vector<NodeId> soft_scores(h.size());
  for (int l = 0; l < L; ++l) {
    soft_scores[static_cast<std::size_t>(l)] =
        t.dot(u, t.tanh(t.affine(*ps_, soft_k_, -1, h[static_cast<std::size_t>(l)])));
  }
  const NodeId alpha = t.softmax(t.concat(std::span<const NodeId>(soft_scores.data(), soft_scores.size())));
  return t.axpy_combine(alpha, std::span<const NodeId>(h.data(), h.size()));
}

NodeId AttentionMemory::encode(Tape& t, const std::vector<Vec>& pairs) const {
  std::vector<NodeId> nodes;
  nodes.reserve(pairs.size());
  for (const Vec& p : pairs) nodes.push_back(t.constant(std::span<const double>(p.data(), p.size())));
  return encode(t, std::span<const NodeId>(nodes.data(), nodes.size()));
}

}  // namespace moma::nn
