#pragma once

#include "moma/envs/env.hpp"

namespace moma::envs {

/// Iterated coordination game: two agents simultaneously pick left (0) or
/// right (1); the team earns 1 when the picks agree, 0 otherwise. The state
/// is a one-hot over {start, (L,L), (L,R), (R,L), (R,R)} remembering the last
/// joint action. Episodes are truncation-only with horizon 25 and the episode
/// score is the mean per-step reward.
class CoordinationGame final : public Env {
 public:
  static constexpr int kStateDim = 5;
  static constexpr int kHorizon = 25;

  CoordinationGame();

  const EnvSpec& spec() const override { return spec_; }
  Vec reset(Rng& rng) const override;
  StepResult step(const Vec& state, int t, const JointAction& actions) const override;
  std::vector<Vec> observe(const Vec& state) const override;
  double episode_score(double total_reward, int steps) const override;

 private:
  EnvSpec spec_;
};

}  // namespace moma::envs
