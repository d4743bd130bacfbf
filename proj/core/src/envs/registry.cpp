#include "moma/envs/registry.hpp"

#include <stdexcept>

#include "moma/envs/coordination_game.hpp"
#include "moma/envs/reacher.hpp"

namespace moma::envs {

std::unique_ptr<Env> make_env(const std::string& id) {
  if (id == "coordgame-v0") return std::make_unique<CoordinationGame>();
  if (id == "reacher2-v0-fo") return std::make_unique<Reacher>(ReacherObsMode::kFullyObservant);
  if (id == "reacher2-v0-ind") return std::make_unique<Reacher>(ReacherObsMode::kIndependent);
  if (id == "reacher2-v0-leader") return std::make_unique<Reacher>(ReacherObsMode::kLeaderOnly);
  throw std::invalid_argument("make_env: unknown environment id: " + id);
}

CentralizedAdapter::CentralizedAdapter(std::unique_ptr<Env> base) : base_(std::move(base)) {
  const EnvSpec& b = base_->spec();
  bool all_discrete = true, all_continuous = true;
  for (const auto& sp : b.action_spaces) {
    (sp.discrete ? all_continuous : all_discrete) = false;
  }
  spec_.id = b.id + "-central";
  spec_.n_agents = 1;
  spec_.state_dim = b.state_dim;
  spec_.obs_dims = {b.state_dim};
  spec_.horizon = b.horizon;
  ActionSpace joint;
  if (all_discrete) {
    joint.discrete = true;
    joint.dim = 1;
    joint.n = 1;
    for (const auto& sp : b.action_spaces) joint.n *= sp.n;
  } else if (all_continuous) {
    joint.discrete = false;
    joint.dim = b.total_action_dim();
  } else {
    throw std::invalid_argument("CentralizedAdapter: mixed action spaces unsupported");
  }
  spec_.action_spaces = {joint};
}

JointAction CentralizedAdapter::to_base_actions(const Vec& team_action) const {
  const EnvSpec& b = base_->spec();
  JointAction out;
  if (spec_.action_spaces[0].discrete) {
    // Decode a mixed-radix joint index, last agent varying fastest.
    int idx = static_cast<int>(team_action.at(0));
    std::vector<int> digits(static_cast<std::size_t>(b.n_agents));
    for (int i = b.n_agents - 1; i >= 0; --i) {
      const int n = b.action_spaces[static_cast<std::size_t>(i)].n;
      digits[static_cast<std::size_t>(i)] = idx % n;
      idx /= n;
    }
    for (int d : digits) out.push_back(Vec{static_cast<double>(d)});
  } else {
    out = unflatten_actions(b, std::span<const double>(team_action.data(), team_action.size()));
  }
  return out;
}

StepResult CentralizedAdapter::step(const Vec& state, int t, const JointAction& actions) const {
  validate_actions(spec_, actions);
  StepResult r = base_->step(state, t, to_base_actions(actions.at(0)));
  r.obs = {r.state};
  return r;
}

}  // namespace moma::envs
