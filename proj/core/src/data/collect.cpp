#include "moma/data/collect.hpp"

#include <stdexcept>

namespace moma::data {

namespace {

Trajectory run_episode(const envs::Env& env, const envs::ScriptedPolicy& policy, Rng& rng) {
  const envs::EnvSpec& spec = env.spec();
  Trajectory traj;
  traj.policy_tag = policy.tag();
  Vec state = env.reset(rng);
  traj.states.push_back(state);
  traj.obs.push_back(env.observe(state));
  for (int t = 0; t < spec.horizon; ++t) {
    const envs::JointAction a = policy.act(state, rng);
    envs::StepResult r = env.step(state, t, a);
    traj.actions.push_back(a);
    traj.rewards.push_back(r.reward);
    traj.states.push_back(r.state);
    traj.obs.push_back(r.obs);
    state = r.state;
    if (r.done) {
      traj.done = true;
      break;
    }
    if (r.truncated) break;
  }
  return traj;
}

std::string obs_mode_of(const std::string& env_id) {
  const auto pos = env_id.rfind('-');
  if (pos != std::string::npos) {
    const std::string suffix = env_id.substr(pos + 1);
    if (suffix == "fo" || suffix == "ind" || suffix == "leader") return suffix;
  }
  return "full";
}

}  // namespace

OfflineDataset collect(const envs::Env& env,
                       const std::vector<const envs::ScriptedPolicy*>& policies,
                       int n_episodes, std::uint64_t seed) {
  if (policies.empty()) throw std::invalid_argument("collect: no policies");
  if (n_episodes < 1) throw std::invalid_argument("collect: n_episodes must be >= 1");
  const envs::EnvSpec& spec = env.spec();

  OfflineDataset d;
  d.meta.env_id = spec.id;
  d.meta.obs_mode = obs_mode_of(spec.id);
  d.meta.n_agents = spec.n_agents;
  d.meta.state_dim = spec.state_dim;
  d.meta.obs_dims = spec.obs_dims;
  for (const auto& sp : spec.action_spaces) d.meta.action_dims.push_back(sp.dim);
  d.meta.collection_seed = seed;
  d.meta.n_episodes = n_episodes;

  Rng rng(seed);
  for (int e = 0; e < n_episodes; ++e) {
    const auto* policy = policies[static_cast<std::size_t>(e) % policies.size()];
    d.trajectories.push_back(run_episode(env, *policy, rng));
    d.meta.policy_tags.push_back(d.trajectories.back().policy_tag);
  }
  d.meta.n_records = d.count_records();
  return d;
}

double mean_score(const envs::Env& env, const envs::ScriptedPolicy& policy,
                  int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("mean_score: n_episodes must be >= 1");
  double total = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    total += episode_score_of(env, run_episode(env, policy, rng));
  }
  return total / n_episodes;
}

}  // namespace moma::data
