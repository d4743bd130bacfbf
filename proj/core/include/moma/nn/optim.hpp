#pragma once

#include "moma/nn/parameters.hpp"

namespace moma::nn {

/// Rescales gradients in place so their global L2 norm is at most max_norm.
/// Returns the scaling factor applied (1 when the norm was already within
/// bounds); direction is always preserved.
double clip_grad_norm(ParameterSet& ps, double max_norm = 1.0);

/// Adam over a single ParameterSet. step() applies the current gradients and
/// throws NumericError if they (or the resulting values) are non-finite.
class Adam {
 public:
  Adam(ParameterSet& ps, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long long step_count() const { return t_; }

  // Moment buffers, exposed for checkpointing.
  std::span<const double> m() const { return {m_.data(), m_.size()}; }
  std::span<const double> v() const { return {v_.data(), v_.size()}; }
  void restore(std::span<const double> m, std::span<const double> v, long long t);

 private:
  ParameterSet& ps_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace moma::nn
