#include "moma/envs/reacher.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace moma::envs {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::pair<double, double> reacher_fk(double theta1, double theta2) {
  const double x = Reacher::kL1 * std::cos(theta1) + Reacher::kL2 * std::cos(theta1 + theta2);
  const double y = Reacher::kL1 * std::sin(theta1) + Reacher::kL2 * std::sin(theta1 + theta2);
  return {x, y};
}

IkSolution reacher_ik(double tx, double ty, int branch_sign) {
  if (branch_sign != 1 && branch_sign != -1) {
    throw std::invalid_argument("reacher_ik: branch_sign must be +1 or -1");
  }
  double r = std::sqrt(tx * tx + ty * ty);
  const double phi = std::atan2(ty, tx);
  // Project unreachable radii onto the feasible band so the controller always
  // has a well-defined goal configuration.
  const double r_min = std::fabs(Reacher::kL1 - Reacher::kL2);
  const double r_max = Reacher::kL1 + Reacher::kL2;
  r = std::clamp(r, r_min, r_max);
  double c2 = (r * r - Reacher::kL1 * Reacher::kL1 - Reacher::kL2 * Reacher::kL2) /
              (2.0 * Reacher::kL1 * Reacher::kL2);
  c2 = std::clamp(c2, -1.0, 1.0);
  IkSolution sol;
  sol.theta2 = branch_sign * std::acos(c2);
  sol.theta1 = phi - std::atan2(Reacher::kL2 * std::sin(sol.theta2),
                                Reacher::kL1 + Reacher::kL2 * std::cos(sol.theta2));
  return sol;
}

Reacher::Reacher(ReacherObsMode mode) : mode_(mode) {
  spec_.n_agents = 2;
  spec_.state_dim = kStateDim;
  spec_.horizon = kHorizon;
  ActionSpace a;
  a.discrete = false;
  a.dim = 1;
  spec_.action_spaces = {a, a};
  switch (mode) {
    case ReacherObsMode::kFullyObservant:
      spec_.id = "reacher2-v0-fo";
      spec_.obs_dims = {10, 10};
      break;
    case ReacherObsMode::kIndependent:
      spec_.id = "reacher2-v0-ind";
      spec_.obs_dims = {5, 5};
      break;
    case ReacherObsMode::kLeaderOnly:
      spec_.id = "reacher2-v0-leader";
      spec_.obs_dims = {8, 6};
      break;
  }
}

Vec Reacher::reset(Rng& rng) const {
  // Shoulder starts anywhere; the elbow starts near straight so either
  // bending convention is equally cheap to adopt.
  const double th1 = rng.uniform(-kPi, kPi);
  const double th2 = rng.uniform(-0.1, 0.1);
  const double target_angle = rng.uniform(-kPi, kPi);
  const double target_radius = rng.uniform(kTargetRadiusMin, kTargetRadiusMax);
  Vec s(kStateDim);
  s[0] = std::cos(th1);
  s[1] = std::sin(th1);
  s[2] = std::cos(th2);
  s[3] = std::sin(th2);
  s[4] = 0.0;
  s[5] = 0.0;
  s[6] = target_radius * std::cos(target_angle);
  s[7] = target_radius * std::sin(target_angle);
  return s;
}

double Reacher::theta1_of(const Vec& state) { return std::atan2(state[1], state[0]); }
double Reacher::theta2_of(const Vec& state) { return std::atan2(state[3], state[2]); }

std::pair<double, double> Reacher::fingertip_of(const Vec& state) {
  return reacher_fk(theta1_of(state), theta2_of(state));
}

StepResult Reacher::step(const Vec& state, int t, const JointAction& actions) const {
  if (static_cast<int>(state.size()) != kStateDim) {
    throw std::invalid_argument(spec_.id + ": bad state size");
  }
  validate_actions(spec_, actions);
  const double v1 = std::clamp(actions[0][0], -1.0, 1.0) * kMaxSpeed;
  const double v2 = std::clamp(actions[1][0], -1.0, 1.0) * kMaxSpeed;
  const double th1 = theta1_of(state) + v1 * kDt;
  const double th2 = std::clamp(theta2_of(state) + v2 * kDt, -kPi, kPi);

  StepResult r;
  r.state.resize(kStateDim);
  r.state[0] = std::cos(th1);
  r.state[1] = std::sin(th1);
  r.state[2] = std::cos(th2);
  r.state[3] = std::sin(th2);
  r.state[4] = v1;
  r.state[5] = v2;
  r.state[6] = state[6];
  r.state[7] = state[7];
  const auto [fx, fy] = reacher_fk(th1, th2);
  const double dx = state[6] - fx;
  const double dy = state[7] - fy;
  r.reward = -std::sqrt(dx * dx + dy * dy);
  r.done = false;
  r.truncated = t + 1 >= spec_.horizon;
  r.obs = observe(r.state);
  return r;
}

std::vector<Vec> Reacher::observe(const Vec& state) const {
  const double tx = state[6], ty = state[7];
  switch (mode_) {
    case ReacherObsMode::kFullyObservant: {
      const auto [fx, fy] = fingertip_of(state);
      Vec o = {state[0], state[1], state[2], state[3], state[4], state[5],
               tx, ty, tx - fx, ty - fy};
      return {o, o};
    }
    case ReacherObsMode::kIndependent: {
      Vec o1 = {state[0], state[1], state[4], tx, ty};
      Vec o2 = {state[2], state[3], state[5], tx, ty};
      return {o1, o2};
    }
    case ReacherObsMode::kLeaderOnly: {
      Vec o1 = {state[0], state[1], state[2], state[3], state[4], state[5], tx, ty};
      Vec o2 = {state[0], state[1], state[2], state[3], state[4], state[5]};
      return {o1, o2};
    }
  }
  throw std::logic_error("Reacher::observe: unknown mode");
}

}  // namespace moma::envs
