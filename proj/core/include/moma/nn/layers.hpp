#pragma once

#include <string>
#include <vector>

#include "moma/common.hpp"
#include "moma/nn/tape.hpp"

namespace moma::nn {

struct MlpSpec {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden = {256, 256};  // ReLU between layers, linear output
};

/// Fully connected network registered inside an externally owned
/// ParameterSet under `<prefix>.l<k>.{w,b}`.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterSet& ps, const std::string& prefix, const MlpSpec& spec);

  void init(Rng& rng);
  NodeId forward(Tape& t, NodeId x) const;

  int input_dim() const { return spec_.input_dim; }
  int output_dim() const { return spec_.output_dim; }

 private:
  ParameterSet* ps_ = nullptr;
  MlpSpec spec_;
  std::vector<int> w_ids_, b_ids_;
};

/// Linear mean + linear log-std heads over a shared feature vector. The
/// log-std output is state dependent and clamped to [-10, 2] so the Gaussian
/// likelihood stays bounded on near-deterministic data.
class GaussianHead {
 public:
  static constexpr double kLogStdMin = -10.0;
  static constexpr double kLogStdMax = 2.0;

  GaussianHead() = default;
  GaussianHead(ParameterSet& ps, const std::string& prefix, int in_dim, int out_dim);

  void init(Rng& rng);

  struct Out {
    NodeId mu = -1;
    NodeId log_sigma = -1;  // already clamped
  };
  Out forward(Tape& t, NodeId features) const;

  int dim() const { return out_dim_; }

 private:
  ParameterSet* ps_ = nullptr;
  int w_mu_ = -1, b_mu_ = -1, w_ls_ = -1, b_ls_ = -1;
  int out_dim_ = 0;
};

/// Linear logits head for discrete action spaces.
class CategoricalHead {
 public:
  CategoricalHead() = default;
  CategoricalHead(ParameterSet& ps, const std::string& prefix, int in_dim, int n_actions);

  void init(Rng& rng);
  NodeId forward(Tape& t, NodeId features) const;  // raw logits
  int n_actions() const { return n_actions_; }

 private:
  ParameterSet* ps_ = nullptr;
  int w_ = -1, b_ = -1;
  int n_actions_ = 0;
};

// ---- losses / log-probs built on a tape ----

/// Sum over dimensions of 0.5*ln(2*pi) + log_sigma + (target - mu)^2 / (2*sigma^2).
NodeId gaussian_nll(Tape& t, NodeId mu, NodeId log_sigma, NodeId target);

/// log N(action | mu, diag(sigma^2)) = -gaussian_nll.
NodeId gaussian_log_prob(Tape& t, NodeId mu, NodeId log_sigma, NodeId action);

/// -[target*ln(p) + (1-target)*ln(1-p)] with p clamped to [1e-7, 1-1e-7].
/// `p` must be a scalar node; target must be 0 or 1.
NodeId bernoulli_bce(Tape& t, NodeId p, double target);

// ---- plain (non-differentiable) sampling helpers ----

Vec sample_diag_gaussian(std::span<const double> mu, std::span<const double> log_sigma, Rng& rng);
int sample_categorical(std::span<const double> probs, Rng& rng);
/// Ties resolve to the lowest index.
int argmax_index(std::span<const double> v);

}  // namespace moma::nn
