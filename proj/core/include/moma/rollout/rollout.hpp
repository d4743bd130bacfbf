#pragma once

#include <vector>

#include "moma/data/dataset.hpp"
#include "moma/envs/env.hpp"
#include "moma/wm/ensemble.hpp"

namespace moma::rollout {

/// One simulator step as seen by the rollout generator: successor state, the
/// pre-penalty mean reward, termination/truncation flags and the epistemic
/// uncertainties (zero when the step comes from the real environment).
struct ModelStep {
  Vec next_state;
  double mean_reward = 0.0;
  bool terminal = false;
  bool truncated = false;  // simulator horizon hit (ground-truth mode only)
  double eps_r = 0.0;
  double eps_g = 0.0;
};

/// What the generator needs from a dynamics source. `env_t` is the absolute
/// step index of the branch's spawning dataset state plus the rollout offset;
/// learned models ignore it, the ground-truth adapter uses it for truncation.
class ModelInterface {
 public:
  virtual ~ModelInterface() = default;
  virtual const envs::EnvSpec& spec() const = 0;
  virtual ModelStep step(const Vec& state, int env_t, const envs::JointAction& actions,
                         Rng& rng) const = 0;
  virtual std::vector<Vec> observe(const Vec& state) const = 0;
  /// Bounding box the successor states are guaranteed to respect, or nullptr
  /// when no such guarantee exists (ground-truth mode).
  virtual const data::DatasetStats* state_box() const { return nullptr; }
};

/// Learned-ensemble dynamics; observations of predicted states come from the
/// real environment's observation function.
class EnsembleModel : public ModelInterface {
 public:
  EnsembleModel(const wm::WorldModelEnsemble& ensemble, const envs::Env& env)
      : ensemble_(&ensemble), env_(&env) {}

  const envs::EnvSpec& spec() const override { return env_->spec(); }
  ModelStep step(const Vec& state, int env_t, const envs::JointAction& actions,
                 Rng& rng) const override;
  std::vector<Vec> observe(const Vec& state) const override { return env_->observe(state); }
  const data::DatasetStats* state_box() const override { return &ensemble_->stats(); }

 private:
  const wm::WorldModelEnsemble* ensemble_;
  const envs::Env* env_;
};

/// Real environment standing in for the model (diagnostic mode): exact
/// dynamics, zero uncertainty, truncation at the environment horizon.
class GroundTruthModel : public ModelInterface {
 public:
  explicit GroundTruthModel(const envs::Env& env) : env_(&env) {}

  const envs::EnvSpec& spec() const override { return env_->spec(); }
  ModelStep step(const Vec& state, int env_t, const envs::JointAction& actions,
                 Rng& rng) const override;
  std::vector<Vec> observe(const Vec& state) const override { return env_->observe(state); }

 private:
  const envs::Env* env_;
};

/// Decentralized actors: sample one action per agent from its
/// history-conditioned policy and report the joint log-probabilities.
class PolicyInterface {
 public:
  virtual ~PolicyInterface() = default;
  virtual void act(const std::vector<std::vector<Vec>>& histories, Rng& rng,
                   envs::JointAction& actions, Vec& logps) const = 0;
};

/// Centralized critic: mixed team value of a global state given the agents'
/// histories.
class ValueInterface {
 public:
  virtual ~ValueInterface() = default;
  virtual double team_value(const Vec& state,
                            const std::vector<std::vector<Vec>>& histories) const = 0;
};

struct RolloutConfig {
  int k = 10;             // rollout horizon
  int batch = 200;        // branches per generation pass
  double lambda_r = 0.0;  // reward-uncertainty penalty coefficient
  double lambda_g = 1.0;  // general-uncertainty penalty coefficient
  double l_eps = 0.0;     // uncertainty threshold; must be set (> 0)
  int window = 10;        // history window carried through the rollout
};

/// One step of synthetic experience. `model_mask` is 0 when the model
/// predicted an absorbing successor; `timeout_mask` is 0 on horizon or
/// uncertainty cut-offs (no bootstrapping across either).
struct SyntheticTransition {
  Vec state;                                // global state the step was taken from
  std::vector<std::vector<Vec>> histories;  // [agent][entry] at decision time
  envs::JointAction actions;
  Vec logp_old;          // per-agent log pi(a|h) at collection time
  double reward = 0.0;   // penalized reward
  double raw_reward = 0.0;
  double model_mask = 1.0;
  double timeout_mask = 1.0;
  Vec next_state;
  double value = 0.0;       // team value of (state, histories) at collection
  double next_value = 0.0;  // team value of the successor at collection
  double eps_r = 0.0;
  double eps_g = 0.0;
};

struct RolloutBuffer {
  std::vector<std::vector<SyntheticTransition>> rollouts;  // one per branch, length <= k
  RolloutConfig config;
  long long policy_version = 0;

  long long total_transitions() const;
};

/// r-tilde = r-bar - lambda_r * eps_r - lambda_g * eps_g.
double penalized_reward(double mean_reward, double eps_r, double eps_g, double lambda_r,
                        double lambda_g);

/// zeta_j = 0 iff j is the last in-budget step (j = t+k-1) or eps_g >= l_eps
/// (inclusive); 1 otherwise. `j` and `t` are absolute step indices.
double timeout_mask(int j, int t, int k, double eps_g, double l_eps);

/// Branches `config.batch` rollouts of up to `config.k` steps from uniformly
/// sampled dataset histories: each step samples the joint action from the
/// policies, steps the model, applies the uncertainty penalty and the timeout
/// mask, and extends every agent's window with (observation of the predicted
/// state, own action). A branch stops after recording a step whose timeout
/// mask is 0 (horizon, uncertainty or simulator truncation) or whose model
/// mask is 0 (predicted absorbing state). Branches draw from forked,
/// index-keyed RNG streams, so the buffer is reproducible under a fixed seed.
RolloutBuffer generate_rollouts(const data::OfflineDataset& dataset,
                                const PolicyInterface& policy, const ValueInterface& value,
                                const ModelInterface& model, const RolloutConfig& config,
                                Rng& rng);

}  // namespace moma::rollout
