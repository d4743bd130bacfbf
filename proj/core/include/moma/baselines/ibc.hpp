#pragma once

#include <functional>

#include "moma/data/dataset.hpp"
#include "moma/mappo/actor_critic.hpp"

namespace moma::baselines {

struct IbcConfig {
  double lr = 3e-4;
  int batch_size = 256;
  long long train_steps = 10000;
  double grad_clip = 1.0;
  long long log_every = 100;
};

struct IbcReport {
  double final_loss = 0.0;  // mean negative log-likelihood of the last batch
  long long steps = 0;
};

/// Independent behavioral cloning: each agent's history-conditioned policy
/// maximizes the log-likelihood of its own dataset actions. Only the memory
/// and policy parameter sets of `policies` are trained; its critic parts are
/// untouched. `on_log(step, loss)` fires every `log_every` steps.
IbcReport ibc_train(const data::OfflineDataset& dataset, mappo::ActorCritic& policies,
                    const IbcConfig& cfg, Rng& rng,
                    const std::function<void(long long, double)>& on_log = {});

}  // namespace moma::baselines
