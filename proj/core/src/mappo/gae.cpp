#include "moma/mappo/gae.hpp"

#include <stdexcept>

namespace moma::mappo {

GaeResult gae_with_timeouts(std::span<const double> rewards, std::span<const double> values,
                            std::span<const double> next_values, std::span<const double> masks,
                            std::span<const double> timeout_masks, double gamma, double lambda) {
  const std::size_t T = rewards.size();
  if (T == 0) throw std::invalid_argument("gae_with_timeouts: empty sequence");
  if (values.size() != T || next_values.size() != T || masks.size() != T ||
      timeout_masks.size() != T)
    throw std::invalid_argument("gae_with_timeouts: mismatched sequence lengths");

  GaeResult out;
  out.returns.resize(T);
  out.advantages.resize(T);

  double running_return = next_values[T - 1] * masks[T - 1];
  double running_advant = 0.0;
  for (std::size_t i = T; i-- > 0;) {
    const double m = masks[i];
    const double zeta = timeout_masks[i];
    running_return =
        rewards[i] + gamma * m * (running_return * zeta + (1.0 - zeta) * next_values[i] * m);
    out.returns[i] = running_return;
    const double delta = rewards[i] + gamma * next_values[i] * m - values[i];
    running_advant = delta + gamma * lambda * m * zeta * running_advant;
    out.advantages[i] = running_advant;
  }
  return out;
}

}  // namespace moma::mappo
