#pragma once

#include <memory>
#include <string>
#include <vector>

#include "moma/common.hpp"
#include "moma/nn/random.hpp"

namespace moma::envs {

/// Continuous actions live in [-1,1]^dim; discrete actions are a single
/// index stored as the first (only) element of the action vector.
struct ActionSpace {
  bool discrete = false;
  int dim = 1;  // vector length of one agent action
  int n = 0;    // number of choices (discrete only)
};

struct EnvSpec {
  std::string id;
  int n_agents = 0;
  int state_dim = 0;
  std::vector<int> obs_dims;             // one per agent
  std::vector<ActionSpace> action_spaces;  // one per agent
  int horizon = 0;

  int total_action_dim() const {
    int d = 0;
    for (const auto& a : action_spaces) d += a.dim;
    return d;
  }
};

/// Per-agent actions; each entry has the agent's action-space dim.
using JointAction = std::vector<Vec>;

struct StepResult {
  Vec state;              // s_{t+1}
  std::vector<Vec> obs;   // per-agent observations of s_{t+1}
  double reward = 0.0;    // shared team reward
  bool done = false;      // absorbing terminal state reached
  bool truncated = false; // horizon exhausted
};

/// Value-semantic simulator: the object holds dynamics only, state is passed
/// in and out, so independent episodes may run side by side.
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual Vec reset(Rng& rng) const = 0;
  /// `t` is the zero-based index of the step being taken; the result is
  /// truncated when t+1 reaches the horizon.
  virtual StepResult step(const Vec& state, int t, const JointAction& actions) const = 0;
  virtual std::vector<Vec> observe(const Vec& state) const = 0;
  /// Reported episode score given the undiscounted reward sum.
  virtual double episode_score(double total_reward, int steps) const = 0;
};

void validate_actions(const EnvSpec& spec, const JointAction& actions);

/// Flattens a joint action in agent order (discrete index as one number).
Vec flatten_actions(const EnvSpec& spec, const JointAction& actions);
JointAction unflatten_actions(const EnvSpec& spec, std::span<const double> flat);

/// Width of the action part of a history pair / model input: one-hot width
/// for discrete agents, raw dim for continuous ones.
int action_slot_dim(const ActionSpace& sp);
/// One-hot encodes discrete actions; copies continuous ones.
Vec encode_action_slot(const ActionSpace& sp, const Vec& action);
/// All-zero slot marking "no previous action" (distinct from any one-hot).
Vec zero_action_slot(const ActionSpace& sp);

}  // namespace moma::envs
