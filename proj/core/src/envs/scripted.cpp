#include "moma/envs/scripted.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "moma/envs/reacher.hpp"

namespace moma::envs {

namespace {
double wrap_angle(double a) {
  // Wrap to (-pi, pi].
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a <= 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}
}  // namespace

BernoulliPolicy::BernoulliPolicy(double p1, double p2) : p1_(p1), p2_(p2) {
  if (p1 < 0.0 || p1 > 1.0 || p2 < 0.0 || p2 > 1.0) {
    throw std::invalid_argument("BernoulliPolicy: probabilities must be in [0,1]");
  }
}

JointAction BernoulliPolicy::act(const Vec& /*state*/, Rng& rng) const {
  return {Vec{rng.bernoulli(p1_) ? 1.0 : 0.0}, Vec{rng.bernoulli(p2_) ? 1.0 : 0.0}};
}

std::string BernoulliPolicy::tag() const {
  std::ostringstream os;
  os << "bernoulli:" << p1_ << "," << p2_;
  return os.str();
}

ReacherExpertPolicy::ReacherExpertPolicy(int branch_sign, double gain)
    : branch_sign_(branch_sign), gain_(gain) {
  if (branch_sign != 1 && branch_sign != -1) {
    throw std::invalid_argument("ReacherExpertPolicy: branch_sign must be +1 or -1");
  }
}

JointAction ReacherExpertPolicy::act(const Vec& state, Rng& /*rng*/) const {
  if (state.size() != Reacher::kStateDim) {
    throw std::invalid_argument("ReacherExpertPolicy: bad state size");
  }
  const IkSolution goal = reacher_ik(state[6], state[7], branch_sign_);
  // The shoulder is a free revolute joint: take the short way around. The
  // elbow is limited to [-pi, pi], so its error must stay unwrapped.
  const double e1 = wrap_angle(goal.theta1 - Reacher::theta1_of(state));
  const double e2 = goal.theta2 - Reacher::theta2_of(state);
  return {Vec{std::clamp(gain_ * e1, -1.0, 1.0)}, Vec{std::clamp(gain_ * e2, -1.0, 1.0)}};
}

std::string ReacherExpertPolicy::tag() const {
  return branch_sign_ > 0 ? "expert:ccw" : "expert:cw";
}

UniformRandomPolicy::UniformRandomPolicy(EnvSpec spec) : spec_(std::move(spec)) {}

JointAction UniformRandomPolicy::act(const Vec& /*state*/, Rng& rng) const {
  JointAction out;
  out.reserve(spec_.action_spaces.size());
  for (const auto& sp : spec_.action_spaces) {
    if (sp.discrete) {
      out.push_back(Vec{static_cast<double>(rng.uniform_int(sp.n))});
    } else {
      Vec a(static_cast<std::size_t>(sp.dim));
      for (double& v : a) v = rng.uniform(-1.0, 1.0);
      out.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace moma::envs
