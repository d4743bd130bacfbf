#include "moma/harness/evaluate.hpp"

#include <cmath>
#include <stdexcept>

namespace moma::harness {

void mean_sem(const std::vector<double>& xs, double& mean, double& sem) {
  if (xs.empty()) throw std::invalid_argument("mean_sem: empty sample");
  const double n = static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += x;
  mean = s / n;
  if (xs.size() == 1) {
    sem = 0.0;
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

EvalTrace evaluate(const envs::Env& env, const GreedyPolicyFn& policy, const EvalOptions& opts,
                   Rng& rng) {
  if (opts.n_episodes <= 0) throw std::invalid_argument("evaluate: n_episodes must be positive");
  if (opts.window <= 0) throw std::invalid_argument("evaluate: window must be positive");
  const auto& spec = env.spec();

  EvalTrace trace;
  trace.result.episode_scores.reserve(static_cast<std::size_t>(opts.n_episodes));

  for (int e = 0; e < opts.n_episodes; ++e) {
    data::Trajectory traj;
    traj.states.push_back(env.reset(rng));
    traj.obs.push_back(env.observe(traj.states.back()));

    // Window entry for step j: concat(obs_j, slot(a_{j-1})), zeros at j = 0.
    std::vector<std::vector<Vec>> windows(static_cast<std::size_t>(spec.n_agents));
    for (int i = 0; i < spec.n_agents; ++i) {
      Vec entry = traj.obs[0][static_cast<std::size_t>(i)];
      const Vec slot = envs::zero_action_slot(spec.action_spaces[static_cast<std::size_t>(i)]);
      entry.insert(entry.end(), slot.begin(), slot.end());
      windows[static_cast<std::size_t>(i)].push_back(std::move(entry));
    }

    for (int t = 0; t < spec.horizon; ++t) {
      envs::JointAction actions = policy(windows);
      envs::validate_actions(spec, actions);
      envs::StepResult sr = env.step(traj.states.back(), t, actions);

      traj.actions.push_back(actions);
      traj.rewards.push_back(sr.reward);
      traj.states.push_back(sr.state);
      traj.obs.push_back(sr.obs);
      if (sr.done) {
        traj.done = true;
        break;
      }
      if (sr.truncated) break;

      for (int i = 0; i < spec.n_agents; ++i) {
        auto& w = windows[static_cast<std::size_t>(i)];
        Vec entry = sr.obs[static_cast<std::size_t>(i)];
        const Vec slot = envs::encode_action_slot(spec.action_spaces[static_cast<std::size_t>(i)],
                                                  actions[static_cast<std::size_t>(i)]);
        entry.insert(entry.end(), slot.begin(), slot.end());
        w.push_back(std::move(entry));
        if (static_cast<int>(w.size()) > opts.window) w.erase(w.begin());
      }
    }

    trace.result.episode_scores.push_back(data::episode_score_of(env, traj));
    if (opts.record_trajectories) trace.trajectories.push_back(std::move(traj));
  }

  mean_sem(trace.result.episode_scores, trace.result.mean_return, trace.result.sem);
  trace.result.normalized =
      opts.expert_score == opts.random_score
          ? trace.result.mean_return
          : data::normalized_score(trace.result.mean_return, opts.expert_score, opts.random_score);
  return trace;
}

}  // namespace moma::harness
