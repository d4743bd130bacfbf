#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "moma/envs/env.hpp"
#include "moma/nn/attention.hpp"
#include "moma/nn/layers.hpp"
#include "moma/rollout/rollout.hpp"

namespace moma::mappo {

struct ActorCriticConfig {
  int window = 10;     // history entries fed to the attention memory
  int embed_dim = 128;
  std::vector<int> policy_hidden = {256, 256};
  std::vector<int> value_hidden = {256, 256};
  std::vector<int> mixer_hidden = {256, 256};
};

/// Decentralized actors with a centralized, monotonically mixed critic.
///
/// Per agent: an attention memory over the agent's own observation-action
/// history (shared by the policy and the value head), an MLP trunk with a
/// Gaussian head (continuous) or a categorical head (discrete), and a scalar
/// utility head V^i(h^i). The team value mixes the utilities with
/// state-conditioned weights: V(s) = sum_i |w^i(s)| V^i(h^i) + b(s).
///
/// Parameters live in separate sets (per-agent memory / policy / value, plus
/// the mixer) so gradient clipping and learning rates apply per group.
class ActorCritic final : public rollout::PolicyInterface, public rollout::ValueInterface {
 public:
  ActorCritic(envs::EnvSpec spec, ActorCriticConfig cfg);

  void init(Rng& rng);

  struct Agent {
    // Behind pointers so the sub-networks' references stay valid on move.
    std::unique_ptr<nn::ParameterSet> memory_ps, policy_ps, value_ps;
    nn::AttentionMemory memory;
    nn::Mlp trunk;               // empty policy_hidden -> identity features
    nn::GaussianHead gaussian;   // continuous head
    nn::CategoricalHead categorical;  // discrete head
    nn::Mlp value_head;
    bool discrete = false;
    bool has_trunk = false;
  };

  // ---- tape builders (training and inference share these) ----
  nn::NodeId encode(nn::Tape& t, int agent, const std::vector<Vec>& history) const;

  struct PolicyNodes {
    bool discrete = false;
    nn::NodeId log_probs = -1;            // discrete: full log distribution
    nn::NodeId mu = -1, log_sigma = -1;   // continuous
  };
  PolicyNodes policy_nodes(nn::Tape& t, int agent, nn::NodeId embed) const;
  /// log pi_agent(action | history) as a scalar node.
  nn::NodeId log_prob(nn::Tape& t, int agent, const PolicyNodes& p, const Vec& action) const;
  /// V^agent(h) as a scalar node.
  nn::NodeId agent_value(nn::Tape& t, int agent, nn::NodeId embed) const;
  /// V(s) = sum_i |w^i(s)| V^i + b(s); differentiable through heads and mixer.
  nn::NodeId mixed_value(nn::Tape& t, const Vec& state,
                         std::span<const nn::NodeId> agent_values) const;

  // ---- rollout-generation interfaces ----
  void act(const std::vector<std::vector<Vec>>& histories, Rng& rng, envs::JointAction& actions,
           Vec& logps) const override;
  double team_value(const Vec& state,
                    const std::vector<std::vector<Vec>>& histories) const override;

  // ---- evaluation ----
  /// Distribution mode: Gaussian mean / argmax logits (ties -> lowest index).
  Vec greedy_action(int agent, const std::vector<Vec>& history) const;
  envs::JointAction greedy_actions(const std::vector<std::vector<Vec>>& histories) const;

  const envs::EnvSpec& spec() const { return spec_; }
  const ActorCriticConfig& config() const { return cfg_; }
  int n_agents() const { return spec_.n_agents; }
  std::vector<Agent>& agents() { return agents_; }
  const std::vector<Agent>& agents() const { return agents_; }
  nn::ParameterSet& mixer_params() { return *mixer_ps_; }
  const nn::ParameterSet& mixer_params() const { return *mixer_ps_; }

  /// Named, deterministic ordering of every parameter set (used by the
  /// checkpoint format and by per-set gradient clipping).
  struct NamedSet {
    std::string name;
    nn::ParameterSet* set = nullptr;
    bool is_memory = false;  // memory sets train at their own learning rate
  };
  std::vector<NamedSet> named_sets();

 private:
  envs::EnvSpec spec_;
  ActorCriticConfig cfg_;
  std::vector<Agent> agents_;
  std::unique_ptr<nn::ParameterSet> mixer_ps_;
  nn::Mlp mixer_;
  mutable nn::Tape scratch_;
};

/// Policy checkpoint: line 1 is a JSON header (algorithm id, environment
/// spec, architecture, caller-supplied config hash), then
/// "param <set> <block> <count> <values...>" lines and a closing "end".
/// Round trips are lossless.
void save_policy(ActorCritic& ac, const std::string& algorithm, const std::string& config_hash,
                 const std::string& path);

struct LoadedPolicy {
  std::unique_ptr<ActorCritic> actor_critic;
  std::string algorithm;
  std::string config_hash;
};
LoadedPolicy load_policy(const std::string& path);

struct PolicyIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace moma::mappo
