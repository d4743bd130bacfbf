#pragma once

#include <memory>
#include <string>

#include "moma/envs/env.hpp"

namespace moma::envs {

/// Known ids: coordgame-v0, reacher2-v0-fo, reacher2-v0-ind,
/// reacher2-v0-leader. Unknown ids throw.
std::unique_ptr<Env> make_env(const std::string& id);

/// Re-frames a multi-agent environment as a single "team agent" that
/// observes the global state and emits the joint action: two discrete agents
/// collapse to one discrete space of n1*n2 joint choices; continuous agents
/// collapse to one concatenated action vector.
class CentralizedAdapter final : public Env {
 public:
  explicit CentralizedAdapter(std::unique_ptr<Env> base);

  const EnvSpec& spec() const override { return spec_; }
  Vec reset(Rng& rng) const override { return base_->reset(rng); }
  StepResult step(const Vec& state, int t, const JointAction& actions) const override;
  std::vector<Vec> observe(const Vec& state) const override { return {state}; }
  double episode_score(double total_reward, int steps) const override {
    return base_->episode_score(total_reward, steps);
  }

  const Env& base() const { return *base_; }
  /// Maps the team action to the underlying per-agent actions.
  JointAction to_base_actions(const Vec& team_action) const;

 private:
  std::unique_ptr<Env> base_;
  EnvSpec spec_;
};

}  // namespace moma::envs
