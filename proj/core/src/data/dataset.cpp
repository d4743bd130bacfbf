#include "moma/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "moma/envs/registry.hpp"

namespace moma::data {

long long OfflineDataset::count_records() const {
  long long n = 0;
  for (const auto& t : trajectories) n += t.length() + 1;
  return n;
}

double episode_score_of(const envs::Env& env, const Trajectory& traj) {
  const double total = std::accumulate(traj.rewards.begin(), traj.rewards.end(), 0.0);
  return env.episode_score(total, traj.length());
}

DatasetStats compute_stats(const OfflineDataset& d) {
  if (d.trajectories.empty()) throw std::invalid_argument("compute_stats: empty dataset");
  const auto env = envs::make_env(d.meta.env_id);
  DatasetStats s;
  s.state_min.assign(static_cast<std::size_t>(d.meta.state_dim), 0.0);
  s.state_max.assign(static_cast<std::size_t>(d.meta.state_dim), 0.0);
  bool first_state = true, first_reward = true;
  Vec scores;
  scores.reserve(d.trajectories.size());
  for (const auto& traj : d.trajectories) {
    for (const Vec& st : traj.states) {
      if (static_cast<int>(st.size()) != d.meta.state_dim) {
        throw std::invalid_argument("compute_stats: state dim mismatch");
      }
      if (first_state) {
        s.state_min = st;
        s.state_max = st;
        first_state = false;
      } else {
        for (std::size_t i = 0; i < st.size(); ++i) {
          s.state_min[i] = std::min(s.state_min[i], st[i]);
          s.state_max[i] = std::max(s.state_max[i], st[i]);
        }
      }
    }
    for (double r : traj.rewards) {
      if (first_reward) {
        s.reward_min = s.reward_max = r;
        first_reward = false;
      } else {
        s.reward_min = std::min(s.reward_min, r);
        s.reward_max = std::max(s.reward_max, r);
      }
    }
    scores.push_back(episode_score_of(*env, traj));
  }
  Vec sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  s.score_min = sorted.front();
  s.score_max = sorted.back();
  s.score_mean = std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  const std::size_t n = sorted.size();
  s.score_median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return s;
}

std::pair<OfflineDataset, OfflineDataset> split(const OfflineDataset& d, double val_fraction, Rng& rng) {
  const int n = static_cast<int>(d.trajectories.size());
  if (n < 2) throw std::invalid_argument("split: need at least 2 trajectories");
  int n_val = static_cast<int>(std::llround(n * val_fraction));
  n_val = std::clamp(n_val, 1, n - 1);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates driven by the explicit stream.
  for (int i = n - 1; i > 0; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  auto take = [&d](const std::vector<int>& idx) {
    OfflineDataset out;
    out.meta = d.meta;
    out.meta.policy_tags.clear();
    for (int i : idx) {
      out.trajectories.push_back(d.trajectories[static_cast<std::size_t>(i)]);
      out.meta.policy_tags.push_back(d.trajectories[static_cast<std::size_t>(i)].policy_tag);
    }
    out.meta.n_episodes = static_cast<int>(idx.size());
    out.meta.n_records = out.count_records();
    return out;
  };
  return {take(train_idx), take(val_idx)};
}

std::vector<std::vector<Vec>> history_windows(const envs::EnvSpec& spec, const Trajectory& traj,
                                              int t, int window) {
  if (t < 0 || t > traj.length()) throw std::invalid_argument("history_windows: t out of range");
  const int lo = std::max(0, t - window + 1);
  std::vector<std::vector<Vec>> windows(static_cast<std::size_t>(spec.n_agents));
  for (int i = 0; i < spec.n_agents; ++i) {
    auto& w = windows[static_cast<std::size_t>(i)];
    const auto& sp = spec.action_spaces[static_cast<std::size_t>(i)];
    for (int j = lo; j <= t; ++j) {
      Vec entry = traj.obs[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      const Vec slot = j == 0
          ? envs::zero_action_slot(sp)
          : envs::encode_action_slot(sp, traj.actions[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i)]);
      entry.insert(entry.end(), slot.begin(), slot.end());
      w.push_back(std::move(entry));
    }
  }
  return windows;
}

HistorySample sample_history(const OfflineDataset& d, const envs::EnvSpec& spec, int window, Rng& rng) {
  if (d.trajectories.empty()) throw std::invalid_argument("sample_history: empty dataset");
  long long total = 0;
  for (const auto& traj : d.trajectories) total += traj.length();
  if (total <= 0) throw std::invalid_argument("sample_history: no non-terminal steps");
  long long pick = rng.uniform_int64(total);

  HistorySample hs;
  for (std::size_t k = 0; k < d.trajectories.size(); ++k) {
    const long long len = d.trajectories[k].length();
    if (pick < len) {
      hs.traj = static_cast<int>(k);
      hs.t = static_cast<int>(pick);
      break;
    }
    pick -= len;
  }
  const Trajectory& traj = d.trajectories[static_cast<std::size_t>(hs.traj)];
  hs.state = traj.states[static_cast<std::size_t>(hs.t)];
  hs.windows = history_windows(spec, traj, hs.t, window);
  return hs;
}

HistorySample sample_history(const OfflineDataset& d, int window, Rng& rng) {
  return sample_history(d, envs::make_env(d.meta.env_id)->spec(), window, rng);
}

double normalized_score(double raw, double expert, double random) {
  if (expert == random) throw std::invalid_argument("normalized_score: degenerate normalizers");
  return (raw - random) / (expert - random);
}

}  // namespace moma::data
