#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "moma/common.hpp"
#include "moma/envs/env.hpp"

namespace moma::data {

/// One episode. States/observations have length T+1 (the final entry is the
/// last state reached); actions/rewards have length T. `done` marks an
/// absorbing terminal state; truncation-only episodes keep it false.
struct Trajectory {
  std::vector<Vec> states;
  std::vector<std::vector<Vec>> obs;  // [step][agent]
  std::vector<envs::JointAction> actions;
  Vec rewards;
  bool done = false;
  std::string policy_tag;

  int length() const { return static_cast<int>(actions.size()); }  // T
};

struct DatasetMeta {
  int schema_version = 1;
  std::string env_id;
  std::string obs_mode;  // "full", "fo", "ind" or "leader"
  int n_agents = 0;
  int state_dim = 0;
  std::vector<int> obs_dims;
  std::vector<int> action_dims;  // flattened action width per agent
  std::uint64_t collection_seed = 0;
  int n_episodes = 0;
  long long n_records = 0;
  // Score normalizers on the raw episode-score scale.
  double expert_score = 0.0;
  double random_score = 0.0;
  std::vector<std::string> policy_tags;  // one per trajectory
};

struct DatasetStats {
  Vec state_min, state_max;  // per-dimension bounding box over all states
  double reward_min = 0.0, reward_max = 0.0;
  double score_mean = 0.0, score_median = 0.0, score_min = 0.0, score_max = 0.0;
};

struct OfflineDataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;

  long long count_records() const;
};

/// Per-agent observation-action windows ending at a dataset state s_t. Each
/// window entry is concat(obs_j, action-slot of a_{j-1}); the oldest entry of
/// a from-the-start window carries an all-zero action slot.
struct HistorySample {
  int traj = 0;
  int t = 0;
  Vec state;                              // s_t
  std::vector<std::vector<Vec>> windows;  // [agent][entry]
};

/// Exact min/max scan plus episode-score aggregates. The scoring rule comes
/// from the environment named in the metadata.
DatasetStats compute_stats(const OfflineDataset& d);

/// Trajectory-granular split; the validation side gets
/// clamp(round(n * val_fraction), 1, n-1) trajectories.
std::pair<OfflineDataset, OfflineDataset> split(const OfflineDataset& d, double val_fraction, Rng& rng);

/// Uniform over all valid (trajectory, t) pairs with t in [0, T-1]; windows
/// cover up to `window` most recent entries and never cross episode bounds.
HistorySample sample_history(const OfflineDataset& d, int window, Rng& rng);
/// Hot-path overload that skips the environment lookup.
HistorySample sample_history(const OfflineDataset& d, const envs::EnvSpec& spec, int window, Rng& rng);

/// Builds the window ending at step t of one trajectory (shared by
/// sample_history and the evaluation loop).
std::vector<std::vector<Vec>> history_windows(const envs::EnvSpec& spec, const Trajectory& traj,
                                              int t, int window);

/// (raw - random) / (expert - random); throws on degenerate normalizers.
double normalized_score(double raw, double expert, double random);

/// Episode score under the dataset's environment scoring rule.
double episode_score_of(const envs::Env& env, const Trajectory& traj);

}  // namespace moma::data
