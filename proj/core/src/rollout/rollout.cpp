#include "moma/rollout/rollout.hpp"

#include <stdexcept>
#include <string>

namespace moma::rollout {

ModelStep EnsembleModel::step(const Vec& state, int /*env_t*/, const envs::JointAction& actions,
                              Rng& rng) const {
  const wm::ModelPrediction p = ensemble_->step(state, actions, rng);
  ModelStep out;
  out.next_state = p.next_state;
  out.mean_reward = p.reward;
  out.terminal = p.terminal;
  out.truncated = false;
  out.eps_r = p.eps_r;
  out.eps_g = p.eps_g;
  return out;
}

ModelStep GroundTruthModel::step(const Vec& state, int env_t, const envs::JointAction& actions,
                                 Rng& /*rng*/) const {
  const envs::StepResult res = env_->step(state, env_t, actions);
  ModelStep out;
  out.next_state = res.state;
  out.mean_reward = res.reward;
  out.terminal = res.done;
  out.truncated = res.truncated;
  return out;
}

long long RolloutBuffer::total_transitions() const {
  long long n = 0;
  for (const auto& r : rollouts) n += static_cast<long long>(r.size());
  return n;
}

double penalized_reward(double mean_reward, double eps_r, double eps_g, double lambda_r,
                        double lambda_g) {
  return mean_reward - lambda_r * eps_r - lambda_g * eps_g;
}

double timeout_mask(int j, int t, int k, double eps_g, double l_eps) {
  return (j == t + k - 1 || eps_g >= l_eps) ? 0.0 : 1.0;
}

namespace {

void validate_config(const RolloutConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("generate_rollouts: k must be >= 1");
  if (cfg.batch < 1) throw std::invalid_argument("generate_rollouts: batch must be >= 1");
  if (cfg.lambda_r < 0.0 || cfg.lambda_g < 0.0)
    throw std::invalid_argument("generate_rollouts: penalty coefficients must be >= 0");
  if (!(cfg.l_eps > 0.0)) throw std::invalid_argument("generate_rollouts: l_eps must be > 0");
  if (cfg.window < 1) throw std::invalid_argument("generate_rollouts: window must be >= 1");
}

void check_state_box(const data::DatasetStats& box, const Vec& s) {
  if (s.size() != box.state_min.size())
    throw std::logic_error("generate_rollouts: predicted state has wrong dimension");
  for (std::size_t d = 0; d < s.size(); ++d) {
    if (s[d] < box.state_min[d] || s[d] > box.state_max[d])
      throw std::logic_error("generate_rollouts: predicted state escaped the dataset bounding box");
  }
}

}  // namespace

RolloutBuffer generate_rollouts(const data::OfflineDataset& dataset,
                                const PolicyInterface& policy, const ValueInterface& value,
                                const ModelInterface& model, const RolloutConfig& config,
                                Rng& rng) {
  validate_config(config);
  const envs::EnvSpec& spec = model.spec();
  const data::DatasetStats* box = model.state_box();

  RolloutBuffer buffer;
  buffer.config = config;
  buffer.rollouts.resize(static_cast<std::size_t>(config.batch));

  for (int branch = 0; branch < config.batch; ++branch) {
    Rng branch_rng = rng.fork("branch-" + std::to_string(branch));
    data::HistorySample start = data::sample_history(dataset, spec, config.window, branch_rng);

    Vec state = std::move(start.state);
    std::vector<std::vector<Vec>> histories = std::move(start.windows);
    auto& rollout = buffer.rollouts[static_cast<std::size_t>(branch)];
    rollout.reserve(static_cast<std::size_t>(config.k));

    for (int j = 0; j < config.k; ++j) {
      SyntheticTransition tr;
      tr.state = state;
      tr.histories = histories;
      policy.act(tr.histories, branch_rng, tr.actions, tr.logp_old);
      tr.value = value.team_value(state, tr.histories);

      const ModelStep ms = model.step(state, start.t + j, tr.actions, branch_rng);
      if (box != nullptr) check_state_box(*box, ms.next_state);
      tr.raw_reward = ms.mean_reward;
      tr.eps_r = ms.eps_r;
      tr.eps_g = ms.eps_g;
      tr.reward = penalized_reward(ms.mean_reward, ms.eps_r, ms.eps_g, config.lambda_r,
                                   config.lambda_g);
      tr.model_mask = ms.terminal ? 0.0 : 1.0;
      tr.timeout_mask = ms.truncated
                            ? 0.0
                            : timeout_mask(start.t + j, start.t, config.k, ms.eps_g, config.l_eps);
      tr.next_state = ms.next_state;

      // h^i_{j+1}: append (observation of the successor, own action), keep
      // the `window` most recent entries.
      const std::vector<Vec> next_obs = model.observe(ms.next_state);
      for (int i = 0; i < spec.n_agents; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const Vec slot = envs::encode_action_slot(spec.action_spaces[ui], tr.actions[ui]);
        Vec entry = next_obs[ui];
        entry.insert(entry.end(), slot.begin(), slot.end());
        auto& h = histories[ui];
        h.push_back(std::move(entry));
        if (static_cast<int>(h.size()) > config.window) h.erase(h.begin());
      }
      tr.next_value = value.team_value(ms.next_state, histories);

      state = ms.next_state;
      const bool stop = tr.timeout_mask == 0.0 || tr.model_mask == 0.0;
      rollout.push_back(std::move(tr));
      if (stop) break;
    }
  }
  return buffer;
}

}  // namespace moma::rollout
