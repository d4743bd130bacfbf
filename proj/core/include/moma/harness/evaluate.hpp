#pragma once

#include <functional>
#include <vector>

#include "moma/data/dataset.hpp"
#include "moma/envs/env.hpp"
#include "moma/nn/random.hpp"

namespace moma::harness {

/// Maps per-agent history windows (entries are concat(obs_j, action-slot of
/// the previous step)) to one joint action. Greedy policies take no rng.
using GreedyPolicyFn =
    std::function<envs::JointAction(const std::vector<std::vector<Vec>>&)>;

struct EvalResult {
  double mean_return = 0.0;   // mean episode score (environment scoring rule)
  double sem = 0.0;           // standard error of the mean (n-1 denominator)
  double normalized = 0.0;    // only set when normalizers were supplied
  std::vector<double> episode_scores;
};

struct EvalOptions {
  int n_episodes = 100;
  int window = 10;
  // Dataset-recorded score normalizers; normalization is skipped when the
  // pair is degenerate (expert == random), e.g. for unit tests.
  double expert_score = 0.0;
  double random_score = 0.0;
  bool record_trajectories = false;  // keep full episodes in `trajectories`
};

struct EvalTrace {
  EvalResult result;
  std::vector<data::Trajectory> trajectories;  // filled when requested
};

/// Runs greedy episodes in the real simulator, maintaining the same history
/// windows the training code uses, and scores them with the environment's
/// scoring rule.
EvalTrace evaluate(const envs::Env& env, const GreedyPolicyFn& policy, const EvalOptions& opts,
                   Rng& rng);

/// Mean / SEM over a score list (n-1 variance; SEM = 0 for a single score).
void mean_sem(const std::vector<double>& xs, double& mean, double& sem);

}  // namespace moma::harness
