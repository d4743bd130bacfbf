#include "moma/baselines/ibc.hpp"

#include <stdexcept>
#include <vector>

#include "moma/nn/optim.hpp"

namespace moma::baselines {

IbcReport ibc_train(const data::OfflineDataset& dataset, mappo::ActorCritic& policies,
                    const IbcConfig& cfg, Rng& rng,
                    const std::function<void(long long, double)>& on_log) {
  if (cfg.lr <= 0.0) throw std::invalid_argument("ibc_train: lr must be > 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("ibc_train: batch_size must be >= 1");
  if (cfg.train_steps < 1) throw std::invalid_argument("ibc_train: train_steps must be >= 1");
  if (cfg.grad_clip <= 0.0) throw std::invalid_argument("ibc_train: grad_clip must be > 0");

  const envs::EnvSpec& spec = policies.spec();
  const int window = policies.config().window;
  const int n_agents = spec.n_agents;

  // Likelihood training touches only the actors: per-agent memory + policy.
  std::vector<mappo::ActorCritic::NamedSet> sets;
  for (auto& named : policies.named_sets()) {
    if (named.name.ends_with(".memory") || named.name.ends_with(".policy"))
      sets.push_back(named);
  }
  std::vector<nn::Adam> opts;
  opts.reserve(sets.size());
  for (auto& named : sets) opts.emplace_back(*named.set, cfg.lr);

  nn::Tape tape;
  std::vector<nn::NodeId> nll_parts;
  nll_parts.reserve(static_cast<std::size_t>(cfg.batch_size) * static_cast<std::size_t>(n_agents));

  IbcReport report;
  for (long long step = 0; step < cfg.train_steps; ++step) {
    tape.reset();
    nll_parts.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      const data::HistorySample sample = data::sample_history(dataset, spec, window, rng);
      const auto& actions =
          dataset.trajectories[static_cast<std::size_t>(sample.traj)]
              .actions[static_cast<std::size_t>(sample.t)];
      for (int i = 0; i < n_agents; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const nn::NodeId embed = policies.encode(tape, i, sample.windows[ui]);
        const mappo::ActorCritic::PolicyNodes pol = policies.policy_nodes(tape, i, embed);
        nll_parts.push_back(tape.neg(policies.log_prob(tape, i, pol, actions[ui])));
      }
    }
    const nn::NodeId loss = tape.mean(tape.concat(nll_parts));
    for (auto& named : sets) named.set->zero_grad();
    tape.backward(loss);
    for (auto& named : sets) nn::clip_grad_norm(*named.set, cfg.grad_clip);
    for (auto& opt : opts) opt.step();

    report.final_loss = tape.value(loss);
    report.steps = step + 1;
    if (on_log && cfg.log_every > 0 &&
        ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.train_steps))
      on_log(step + 1, report.final_loss);
  }
  return report;
}

}  // namespace moma::baselines
