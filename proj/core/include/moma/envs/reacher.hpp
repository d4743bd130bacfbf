#pragma once

#include <utility>

#include "moma/envs/env.hpp"

namespace moma::envs {

enum class ReacherObsMode { kFullyObservant, kIndependent, kLeaderOnly };

/// Fingertip position of the two-link arm.
std::pair<double, double> reacher_fk(double theta1, double theta2);

struct IkSolution {
  double theta1 = 0.0;
  double theta2 = 0.0;
};

/// Closed-form inverse kinematics. branch_sign=+1 selects the elbow-up
/// (theta2 >= 0, counter-clockwise) branch, -1 the elbow-down branch. Targets
/// outside the reachable band are projected onto the nearest feasible radius.
IkSolution reacher_ik(double tx, double ty, int branch_sign);

/// Kinematic two-joint planar reacher with one agent per joint. Actions are
/// per-joint velocity commands: thetadot = clip(a, -1, 1) * 2 rad/s applied
/// over dt = 0.05. Reward is -||fingertip - target||; episodes truncate at
/// horizon 50. The elbow joint is limited to |theta2| <= pi (no wrap), which
/// preserves the two incompatible bending conventions.
///
/// State layout (8): [cos t1, sin t1, cos t2, sin t2, v1, v2, tx, ty].
class Reacher final : public Env {
 public:
  static constexpr double kL1 = 0.1;
  static constexpr double kL2 = 0.1;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 2.0;  // rad/s at |a| = 1
  static constexpr int kHorizon = 50;
  static constexpr int kStateDim = 8;
  static constexpr double kTargetRadiusMin = 0.05;
  static constexpr double kTargetRadiusMax = 0.19;

  explicit Reacher(ReacherObsMode mode);

  const EnvSpec& spec() const override { return spec_; }
  Vec reset(Rng& rng) const override;
  StepResult step(const Vec& state, int t, const JointAction& actions) const override;
  std::vector<Vec> observe(const Vec& state) const override;
  double episode_score(double total_reward, int /*steps*/) const override { return total_reward; }

  ReacherObsMode mode() const { return mode_; }

  static double theta1_of(const Vec& state);
  static double theta2_of(const Vec& state);
  static std::pair<double, double> fingertip_of(const Vec& state);

 private:
  ReacherObsMode mode_;
  EnvSpec spec_;
};

}  // namespace moma::envs
