#include "moma/envs/coordination_game.hpp"

#include <cmath>
#include <stdexcept>

namespace moma::envs {

void validate_actions(const EnvSpec& spec, const JointAction& actions) {
  if (static_cast<int>(actions.size()) != spec.n_agents) {
    throw std::invalid_argument(spec.id + ": expected " + std::to_string(spec.n_agents) +
                                " agent actions, got " + std::to_string(actions.size()));
  }
  for (int i = 0; i < spec.n_agents; ++i) {
    const auto& sp = spec.action_spaces[static_cast<std::size_t>(i)];
    const auto& a = actions[static_cast<std::size_t>(i)];
    if (static_cast<int>(a.size()) != sp.dim) {
      throw std::invalid_argument(spec.id + ": agent " + std::to_string(i) + " action dim mismatch");
    }
    if (sp.discrete) {
      const double v = a[0];
      if (v != std::floor(v) || v < 0.0 || v >= sp.n) {
        throw std::invalid_argument(spec.id + ": agent " + std::to_string(i) +
                                    " discrete action out of range: " + std::to_string(v));
      }
    }
  }
}

Vec flatten_actions(const EnvSpec& spec, const JointAction& actions) {
  Vec flat;
  flat.reserve(static_cast<std::size_t>(spec.total_action_dim()));
  for (const auto& a : actions) flat.insert(flat.end(), a.begin(), a.end());
  return flat;
}

JointAction unflatten_actions(const EnvSpec& spec, std::span<const double> flat) {
  if (static_cast<int>(flat.size()) != spec.total_action_dim()) {
    throw std::invalid_argument(spec.id + ": flat action length mismatch");
  }
  JointAction out;
  std::size_t off = 0;
  for (const auto& sp : spec.action_spaces) {
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(off),
                     flat.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(sp.dim)));
    off += static_cast<std::size_t>(sp.dim);
  }
  return out;
}

int action_slot_dim(const ActionSpace& sp) { return sp.discrete ? sp.n : sp.dim; }

Vec encode_action_slot(const ActionSpace& sp, const Vec& action) {
  if (!sp.discrete) return action;
  Vec slot(static_cast<std::size_t>(sp.n), 0.0);
  const int idx = static_cast<int>(action.at(0));
  if (idx < 0 || idx >= sp.n) {
    throw std::invalid_argument("encode_action_slot: discrete action out of range");
  }
  slot[static_cast<std::size_t>(idx)] = 1.0;
  return slot;
}

Vec zero_action_slot(const ActionSpace& sp) {
  return Vec(static_cast<std::size_t>(action_slot_dim(sp)), 0.0);
}

CoordinationGame::CoordinationGame() {
  spec_.id = "coordgame-v0";
  spec_.n_agents = 2;
  spec_.state_dim = kStateDim;
  spec_.obs_dims = {kStateDim, kStateDim};
  ActionSpace a;
  a.discrete = true;
  a.dim = 1;
  a.n = 2;
  spec_.action_spaces = {a, a};
  spec_.horizon = kHorizon;
}

Vec CoordinationGame::reset(Rng& /*rng*/) const {
  Vec s(kStateDim, 0.0);
  s[0] = 1.0;  // start token
  return s;
}

StepResult CoordinationGame::step(const Vec& state, int t, const JointAction& actions) const {
  if (static_cast<int>(state.size()) != kStateDim) {
    throw std::invalid_argument("coordgame-v0: bad state size");
  }
  validate_actions(spec_, actions);
  const int a1 = static_cast<int>(actions[0][0]);
  const int a2 = static_cast<int>(actions[1][0]);
  StepResult r;
  r.state.assign(kStateDim, 0.0);
  r.state[static_cast<std::size_t>(1 + a1 * 2 + a2)] = 1.0;
  r.reward = a1 == a2 ? 1.0 : 0.0;
  r.done = false;
  r.truncated = t + 1 >= spec_.horizon;
  r.obs = observe(r.state);
  return r;
}

std::vector<Vec> CoordinationGame::observe(const Vec& state) const {
  return {state, state};  // both agents fully observe the one-hot state
}

double CoordinationGame::episode_score(double total_reward, int steps) const {
  return steps > 0 ? total_reward / steps : 0.0;
}

}  // namespace moma::envs
