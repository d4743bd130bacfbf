#pragma once

#include <vector>

#include "moma/mappo/actor_critic.hpp"
#include "moma/nn/optim.hpp"
#include "moma/rollout/rollout.hpp"

namespace moma::mappo {

struct PpoConfig {
  double clip = 0.2;
  double gae_lambda = 0.98;
  double gamma = 0.99;
  int epochs = 5;
  int transitions_per_update = 2000;  // buffer size the caller aims for
  int minibatch = 256;
  double lr = 5e-5;         // policy trunks/heads, value heads, mixer
  double memory_lr = 1e-4;  // attention memories
  double critic_coef = 0.5;
  double entropy_coef = 0.001;
  double entropy_target = -4.0;  // nats; continuous-control scale by default
  double action_penalty_coef = 1.0;
  double grad_clip = 1.0;
};

/// Adaptive entropy multiplier; clamped at >= 0 after every adjustment.
struct EntropyAlpha {
  double value = 0.0;
};

struct PpoReport {
  double actor_loss = 0.0;      // means over processed minibatches
  double critic_loss = 0.0;
  double entropy = 0.0;         // pessimistic (min) entropy estimate
  double action_penalty = 0.0;
  double total_loss = 0.0;
  double alpha = 0.0;           // multiplier after the update
  long long transitions = 0;
  int minibatches = 0;
  bool aborted = false;  // non-finite loss encountered; no step was taken for it
};

/// Clipped-surrogate PPO over synthetic rollouts: per-agent ratios against a
/// shared, batch-normalized team advantage; QMIX-mixed value regression on
/// timeout-aware GAE returns; pessimistic adaptive entropy bonus; and an
/// out-of-range action penalty for continuous teams. Optimizer state persists
/// across updates.
class PpoTrainer {
 public:
  PpoTrainer(ActorCritic& ac, PpoConfig cfg);

  /// One full update (epochs x shuffled minibatches) on the buffer, which
  /// must have been generated by the current policies.
  PpoReport update(const rollout::RolloutBuffer& buffer, Rng& rng);

  EntropyAlpha& alpha() { return alpha_; }
  const PpoConfig& config() const { return cfg_; }
  ActorCritic& actor_critic() { return *ac_; }

 private:
  struct Item {
    const rollout::SyntheticTransition* tr = nullptr;
    double ret = 0.0;
    double adv = 0.0;
  };
  bool step_minibatch(std::span<const std::size_t> batch, const std::vector<Item>& items,
                      PpoReport& report);

  ActorCritic* ac_;
  PpoConfig cfg_;
  EntropyAlpha alpha_;
  std::vector<ActorCritic::NamedSet> sets_;
  std::vector<nn::Adam> opts_;
  nn::Tape tape_;
};

}  // namespace moma::mappo
