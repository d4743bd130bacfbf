#pragma once

#include <memory>
#include <string>

#include "moma/envs/env.hpp"

namespace moma::envs {

/// Data-collection controllers. They see the global state (collection is a
/// centralized, privileged process) and draw any randomness from the passed
/// stream.
class ScriptedPolicy {
 public:
  virtual ~ScriptedPolicy() = default;
  virtual JointAction act(const Vec& state, Rng& rng) const = 0;
  /// Behavior tag recorded per trajectory in dataset metadata.
  virtual std::string tag() const = 0;
};

/// Each coordination-game agent independently picks "right" with its own
/// probability.
class BernoulliPolicy final : public ScriptedPolicy {
 public:
  BernoulliPolicy(double p_right_agent1, double p_right_agent2);
  JointAction act(const Vec& state, Rng& rng) const override;
  std::string tag() const override;

 private:
  double p1_, p2_;
};

/// Proportional controller driving both reacher joints to the inverse
/// kinematics solution of a fixed bending convention (+1 = counter-clockwise,
/// theta2 >= 0; -1 = clockwise).
class ReacherExpertPolicy final : public ScriptedPolicy {
 public:
  explicit ReacherExpertPolicy(int branch_sign, double gain = 5.0);
  JointAction act(const Vec& state, Rng& rng) const override;
  std::string tag() const override;
  int branch_sign() const { return branch_sign_; }

 private:
  int branch_sign_;
  double gain_;
};

/// Uniform over the action space: uniform index for discrete agents,
/// uniform in [-1,1]^dim for continuous agents.
class UniformRandomPolicy final : public ScriptedPolicy {
 public:
  explicit UniformRandomPolicy(EnvSpec spec);
  JointAction act(const Vec& state, Rng& rng) const override;
  std::string tag() const override { return "random"; }

 private:
  EnvSpec spec_;
};

}  // namespace moma::envs
