#pragma once

#include <span>

#include "moma/common.hpp"

namespace moma::mappo {

struct GaeResult {
  Vec returns;
  Vec advantages;
};

/// Timeout-aware generalized advantage estimation over one rollout
/// (step order oldest -> newest):
///
///   R_T    = V'_{T-1} * m_{T-1},  A_T = 0
///   R_t    = r_t + gamma * m_t * (R_{t+1} * zeta_t + (1 - zeta_t) * V'_t * m_t)
///   delta_t = r_t + gamma * V'_t * m_t - V_t
///   A_t    = delta_t + gamma * lambda * m_t * zeta_t * A_{t+1}
///
/// `masks` m_t are 0 at absorbing states (no value beyond them);
/// `timeout_masks` zeta_t are 0 where the trajectory was cut (horizon or
/// uncertainty), which swaps the bootstrap target to V'_t instead of
/// accumulating across the cut. Throws std::invalid_argument on empty or
/// mismatched inputs.
GaeResult gae_with_timeouts(std::span<const double> rewards, std::span<const double> values,
                            std::span<const double> next_values, std::span<const double> masks,
                            std::span<const double> timeout_masks, double gamma, double lambda);

}  // namespace moma::mappo
