#pragma once

#include <memory>
#include <span>
#include <vector>

#include "moma/data/dataset.hpp"
#include "moma/mappo/actor_critic.hpp"
#include "moma/nn/attention.hpp"
#include "moma/nn/layers.hpp"
#include "moma/nn/optim.hpp"

namespace moma::baselines {

/// |e - I(diff < 0)| * diff^2 for e in (0, 1).
double expectile_loss(double diff, double e);
/// Elementwise tape version: e * relu(diff)^2 + (1 - e) * relu(-diff)^2.
nn::NodeId expectile_loss(nn::Tape& t, nn::NodeId diff, double e);

/// target <- (1 - tau) * target + tau * online over the raw values; both sets
/// must have identical layouts.
void polyak_update(const nn::ParameterSet& online, nn::ParameterSet& target, double tau);

struct MaiqlConfig {
  mappo::ActorCriticConfig arch;  // policies, V heads (value_hidden), mixers
  std::vector<int> q_hidden = {256, 256};
  double gamma = 0.99;
  double expectile = 0.7;
  double beta = 3.0;  // AWR temperature
  double tau = 0.005;
  double lr = 3e-4;
  int batch_size = 256;
  long long train_steps = 50000;
  double weight_clamp = 100.0;  // cap on the exponential AWR weight
  double grad_clip = 1.0;
  bool twin_q = true;
  long long log_every = 100;
};

struct MaiqlBatchItem {
  Vec state, next_state;
  std::vector<std::vector<Vec>> histories;       // [agent][entry], ending at t
  std::vector<std::vector<Vec>> next_histories;  // ending at t+1
  envs::JointAction actions;
  double reward = 0.0;
  double mask = 1.0;  // 0 on absorbing terminal transitions
};

struct MaiqlStepReport {
  double q_loss = 0.0;
  double v_loss = 0.0;
  double policy_loss = 0.0;
  long long clamped_weights = 0;  // AWR weights capped this step
};

/// Offline multi-agent IQL: twin action-value heads regressed on SARSA
/// targets, expectile state-value learning against the mixed twin-min target
/// Q, and advantage-weighted likelihood policy extraction; all team values
/// mix per-agent heads through state-conditioned absolute weights plus bias.
/// Target Q parameters (heads, their memories and the Q mixer) track the
/// online ones by Polyak averaging only.
class Maiql {
 public:
  Maiql(envs::EnvSpec spec, MaiqlConfig cfg);

  void init(Rng& rng);

  /// One training step: Q update, V update, policy update, Polyak.
  MaiqlStepReport train_step(const data::OfflineDataset& dataset, Rng& rng);

  std::vector<MaiqlBatchItem> sample_batch(const data::OfflineDataset& dataset, int n,
                                           Rng& rng) const;

  // ---- loss builders (shared by training and the gradient checks) ----
  /// Mean over the batch of the summed twin squared Bellman errors against
  /// r + gamma * m * V(s'); V is evaluated with frozen (numeric) values.
  nn::NodeId q_loss_node(nn::Tape& t, std::span<const MaiqlBatchItem> batch);
  /// Mean expectile loss of (mixed target Q - mixed online V); the target Q
  /// side is numeric.
  nn::NodeId v_loss_node(nn::Tape& t, std::span<const MaiqlBatchItem> batch);
  /// Mean of -W(s,a) * sum_j log pi_j(a^j | h^j) with the detached weight
  ///   W = exp(bhat_Q - b_V) * Pi_i exp(beta (what_Q^i Qhat^i - w_V^i V^i))
  /// clamped at weight_clamp; `clamped` (optional) counts capped weights.
  nn::NodeId policy_loss_node(nn::Tape& t, std::span<const MaiqlBatchItem> batch,
                              long long* clamped);

  // ---- frozen-network evaluations ----
  /// Mixed online state value V(s) = sum_i |w_V^i(s)| V^i(h^i) + b_V(s).
  double online_v(const Vec& state, const std::vector<std::vector<Vec>>& histories) const;
  /// Mixed target action value with twin heads combined by elementwise
  /// minimum before mixing.
  double target_q(const Vec& state, const std::vector<std::vector<Vec>>& histories,
                  const envs::JointAction& actions) const;

  mappo::ActorCritic& policies() { return *policies_; }
  const mappo::ActorCritic& policies() const { return *policies_; }
  const envs::EnvSpec& spec() const { return spec_; }
  const MaiqlConfig& config() const { return cfg_; }
  int n_twins() const { return cfg_.twin_q ? 2 : 1; }

  struct QNet {
    // Behind a pointer so the sub-networks' references stay valid on move.
    std::unique_ptr<nn::ParameterSet> ps;
    nn::AttentionMemory memory;
    nn::Mlp head;  // [embedding, action slot] -> 1
  };
  struct VNet {
    std::unique_ptr<nn::ParameterSet> ps;
    nn::AttentionMemory memory;
    nn::Mlp head;  // embedding -> 1
  };

  std::vector<std::vector<QNet>>& q_nets() { return q_; }
  std::vector<std::vector<QNet>>& target_q_nets() { return q_target_; }
  std::vector<VNet>& v_nets() { return v_; }
  nn::ParameterSet& q_mixer_params() { return *q_mixer_ps_; }
  nn::ParameterSet& target_q_mixer_params() { return *q_mixer_target_ps_; }
  nn::ParameterSet& v_mixer_params() { return *v_mixer_ps_; }

 private:
  struct MixNodes {
    nn::NodeId weights = -1;  // |w^i(s)|, one per agent
    nn::NodeId bias = -1;     // b(s), unconstrained
  };
  MixNodes mix_nodes(nn::Tape& t, const nn::Mlp& mixer, const Vec& state) const;
  nn::NodeId q_value_node(nn::Tape& t, const QNet& q, const std::vector<Vec>& history,
                          int agent, const Vec& action) const;
  nn::NodeId v_value_node(nn::Tape& t, const VNet& v, const std::vector<Vec>& history) const;
  QNet make_qnet(int agent) const;
  VNet make_vnet(int agent) const;

  envs::EnvSpec spec_;
  MaiqlConfig cfg_;
  std::vector<std::vector<QNet>> q_;         // [agent][twin]
  std::vector<std::vector<QNet>> q_target_;  // same layout
  std::vector<VNet> v_;
  std::unique_ptr<nn::ParameterSet> q_mixer_ps_, q_mixer_target_ps_, v_mixer_ps_;
  nn::Mlp q_mixer_, q_mixer_target_, v_mixer_;
  std::unique_ptr<mappo::ActorCritic> policies_;
  std::vector<nn::ParameterSet*> q_sets_, v_sets_;        // online sets per update group
  std::vector<mappo::ActorCritic::NamedSet> pi_sets_;     // actor memory + policy sets
  std::vector<nn::Adam> q_opts_, v_opts_, pi_opts_;
  mutable nn::Tape scratch_;
  nn::Tape tape_;
};

/// Centralized view of a multi-agent dataset: one agent observing the global
/// state and acting in the joint action space (mixed-radix joint index for
/// discrete teams, last base agent fastest; concatenation for continuous
/// ones). Metadata keeps the base environment id so scoring still works.
data::OfflineDataset centralize_dataset(const data::OfflineDataset& d,
                                        const envs::EnvSpec& base_spec);

}  // namespace moma::baselines
