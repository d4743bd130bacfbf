#pragma once

#include <span>
#include <vector>

#include "moma/common.hpp"

namespace moma::wm {

/// Unbiased sample variance (divides by n-1).
double sample_variance(std::span<const double> values);

/// Epistemic reward uncertainty across ensemble members: the variance of the
/// predicted rewards.
double epistemic_reward_uncertainty(std::span<const double> rewards);

/// Epistemic general uncertainty: Frobenius norm of the sample covariance of
/// the member prediction vectors (each member contributes one concat vector
/// of next-state means and reward mean). The 1x1 case reduces to |variance|,
/// computed so it matches epistemic_reward_uncertainty bit for bit.
double epistemic_general_uncertainty(const std::vector<Vec>& member_predictions);

/// Order statistic with linear interpolation between closest ranks;
/// p in [0, 1]. The input is copied and sorted.
double percentile_interpolated(Vec values, double p);

}  // namespace moma::wm
