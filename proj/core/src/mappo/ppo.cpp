#include "moma/mappo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "moma/mappo/gae.hpp"

namespace moma::mappo {

namespace {

void validate_config(const PpoConfig& cfg) {
  if (cfg.clip <= 0.0) throw std::invalid_argument("PpoConfig: clip must be > 0");
  if (cfg.gamma <= 0.0 || cfg.gamma > 1.0)
    throw std::invalid_argument("PpoConfig: gamma must be in (0, 1]");
  if (cfg.gae_lambda < 0.0 || cfg.gae_lambda > 1.0)
    throw std::invalid_argument("PpoConfig: gae_lambda must be in [0, 1]");
  if (cfg.epochs < 1) throw std::invalid_argument("PpoConfig: epochs must be >= 1");
  if (cfg.minibatch < 1) throw std::invalid_argument("PpoConfig: minibatch must be >= 1");
  if (cfg.lr <= 0.0 || cfg.memory_lr <= 0.0)
    throw std::invalid_argument("PpoConfig: learning rates must be > 0");
  if (cfg.critic_coef < 0.0 || cfg.entropy_coef < 0.0 || cfg.action_penalty_coef < 0.0)
    throw std::invalid_argument("PpoConfig: loss coefficients must be >= 0");
  if (cfg.grad_clip <= 0.0) throw std::invalid_argument("PpoConfig: grad_clip must be > 0");
}

}  // namespace

PpoTrainer::PpoTrainer(ActorCritic& ac, PpoConfig cfg) : ac_(&ac), cfg_(cfg) {
  validate_config(cfg_);
  sets_ = ac_->named_sets();
  opts_.reserve(sets_.size());
  for (const auto& named : sets_)
    opts_.emplace_back(*named.set, named.is_memory ? cfg_.memory_lr : cfg_.lr);
}

PpoReport PpoTrainer::update(const rollout::RolloutBuffer& buffer, Rng& rng) {
  std::vector<Item> items;
  Vec rewards, values, next_values, masks, zetas;
  for (const auto& rollout : buffer.rollouts) {
    const std::size_t T = rollout.size();
    if (T == 0) continue;
    rewards.resize(T);
    values.resize(T);
    next_values.resize(T);
    masks.resize(T);
    zetas.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& tr = rollout[t];
      rewards[t] = tr.reward;
      values[t] = tr.value;
      next_values[t] = tr.next_value;
      masks[t] = tr.model_mask;
      zetas[t] = tr.timeout_mask;
    }
    const GaeResult g =
        gae_with_timeouts(rewards, values, next_values, masks, zetas, cfg_.gamma, cfg_.gae_lambda);
    for (std::size_t t = 0; t < T; ++t)
      items.push_back({&rollout[t], g.returns[t], g.advantages[t]});
  }
  if (items.empty()) throw std::invalid_argument("PpoTrainer::update: empty rollout buffer");

  // Normalize the shared team advantage over the whole update batch.
  const auto n = static_cast<double>(items.size());
  double mean = 0.0;
  for (const auto& it : items) mean += it.adv;
  mean /= n;
  double var = 0.0;
  for (const auto& it : items) var += (it.adv - mean) * (it.adv - mean);
  const double stddev = items.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  for (auto& it : items) it.adv = (it.adv - mean) / (stddev + 1e-8);

  PpoReport report;
  report.transitions = static_cast<long long>(items.size());

  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg_.epochs && !report.aborted; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int64(static_cast<long long>(i)));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size() && !report.aborted;
         start += static_cast<std::size_t>(cfg_.minibatch)) {
      const std::size_t len =
          std::min(static_cast<std::size_t>(cfg_.minibatch), order.size() - start);
      if (!step_minibatch(std::span<const std::size_t>(order.data() + start, len), items, report))
        report.aborted = true;
    }
  }

  if (report.minibatches > 0) {
    const auto m = static_cast<double>(report.minibatches);
    report.actor_loss /= m;
    report.critic_loss /= m;
    report.entropy /= m;
    report.action_penalty /= m;
    report.total_loss /= m;
  }
  report.alpha = alpha_.value;
  return report;
}

bool PpoTrainer::step_minibatch(std::span<const std::size_t> batch,
                                const std::vector<Item>& items, PpoReport& report) {
  const int n_agents = ac_->n_agents();
  tape_.reset();

  std::vector<nn::NodeId> surr_parts, ent1_parts, ent2_parts, critic_parts;
  std::vector<nn::NodeId> pen1_parts, pen2_parts;
  surr_parts.reserve(batch.size() * static_cast<std::size_t>(n_agents));
  ent1_parts.reserve(surr_parts.capacity());
  ent2_parts.reserve(surr_parts.capacity());
  critic_parts.reserve(batch.size());
  std::vector<nn::NodeId> utilities(static_cast<std::size_t>(n_agents));

  for (const std::size_t idx : batch) {
    const Item& it = items[idx];
    const rollout::SyntheticTransition& tr = *it.tr;
    for (int i = 0; i < n_agents; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const nn::NodeId embed = ac_->encode(tape_, i, tr.histories[ui]);
      const ActorCritic::PolicyNodes pol = ac_->policy_nodes(tape_, i, embed);
      const nn::NodeId logp_new = ac_->log_prob(tape_, i, pol, tr.actions[ui]);
      const nn::NodeId ratio = tape_.exp(tape_.add_scalar(logp_new, -tr.logp_old[ui]));
      const nn::NodeId ratio_clip = tape_.clamp(ratio, 1.0 - cfg_.clip, 1.0 + cfg_.clip);
      surr_parts.push_back(
          tape_.min2(tape_.scale(ratio, it.adv), tape_.scale(ratio_clip, it.adv)));
      ent1_parts.push_back(tape_.mul(ratio, logp_new));
      ent2_parts.push_back(tape_.mul(ratio_clip, logp_new));
      if (!pol.discrete && cfg_.action_penalty_coef > 0.0) {
        double err = 0.0;
        for (const double a : tr.actions[ui])
          if (std::abs(a) > 1.0) err += (1.0 - std::abs(a)) * (1.0 - std::abs(a));
        if (err > 0.0) {
          pen1_parts.push_back(tape_.scale(ratio, err));
          pen2_parts.push_back(tape_.scale(ratio_clip, err));
        }
      }
      utilities[ui] = ac_->agent_value(tape_, i, embed);
    }
    const nn::NodeId v = ac_->mixed_value(tape_, tr.state, utilities);
    const nn::NodeId d = tape_.add_scalar(v, -it.ret);
    critic_parts.push_back(tape_.mul(d, d));
  }

  const nn::NodeId actor = tape_.neg(tape_.mean(tape_.concat(surr_parts)));
  const nn::NodeId critic =
      tape_.scale(tape_.mean(tape_.concat(critic_parts)), cfg_.critic_coef * 0.5);
  const nn::NodeId ent = tape_.min2(tape_.neg(tape_.mean(tape_.concat(ent1_parts))),
                                    tape_.neg(tape_.mean(tape_.concat(ent2_parts))));

  // The multiplier adapts before the bonus enters the loss and is treated as
  // a constant inside it.
  const double ent_val = tape_.value(ent);
  alpha_.value = std::max(0.0, alpha_.value + cfg_.entropy_coef * (cfg_.entropy_target - ent_val));

  nn::NodeId loss = tape_.add(tape_.add(actor, critic), tape_.scale(ent, -alpha_.value));
  double pen_val = 0.0;
  if (!pen1_parts.empty()) {
    const double inv_n = 1.0 / (static_cast<double>(batch.size()) * n_agents);
    const nn::NodeId p1 = tape_.scale(tape_.sum(tape_.concat(pen1_parts)), inv_n);
    const nn::NodeId p2 = tape_.scale(tape_.sum(tape_.concat(pen2_parts)), inv_n);
    const nn::NodeId pen = tape_.scale(tape_.max2(p1, p2), cfg_.action_penalty_coef);
    pen_val = tape_.value(pen);
    loss = tape_.add(loss, pen);
  }

  const double loss_val = tape_.value(loss);
  if (!std::isfinite(loss_val)) return false;

  for (const auto& named : sets_) named.set->zero_grad();
  tape_.backward(loss);
  for (const auto& named : sets_)
    if (!named.set->grads_finite()) return false;
  for (const auto& named : sets_) nn::clip_grad_norm(*named.set, cfg_.grad_clip);
  for (auto& opt : opts_) opt.step();

  report.actor_loss += tape_.value(actor);
  report.critic_loss += tape_.value(critic);
  report.entropy += ent_val;
  report.action_penalty += pen_val;
  report.total_loss += loss_val;
  report.minibatches += 1;
  return true;
}

}  // namespace moma::mappo
