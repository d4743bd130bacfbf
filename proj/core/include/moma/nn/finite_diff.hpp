#pragma once

#include <functional>

#include "moma/nn/parameters.hpp"

namespace moma::nn {

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int checked = 0;  // number of parameter coordinates compared
};

/// Compares analytic gradients with central finite differences.
///
/// `loss` must rebuild the loss from scratch each call. With with_grad=true
/// it must also run backward so gradients land in `ps` (zero_grad is done
/// here); with with_grad=false it must leave gradients untouched.
/// Checks every coordinate when ps.size() <= sample, otherwise a random
/// subsample of `sample` distinct coordinates. The relative error uses
/// max(|analytic|, |numeric|, 1e-6) as denominator.
FiniteDiffReport finite_diff_check(ParameterSet& ps,
                                   const std::function<double(bool with_grad)>& loss,
                                   Rng& rng, int sample = 100, double eps = 1e-5);

}  // namespace moma::nn
