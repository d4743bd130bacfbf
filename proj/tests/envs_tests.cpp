#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "moma/envs/env.hpp"
#include "moma/envs/reacher.hpp"
#include "moma/envs/registry.hpp"
#include "moma/envs/scripted.hpp"

using namespace moma;
using envs::JointAction;

namespace {

JointAction coord_actions(double a1, double a2) { return {{a1}, {a2}}; }

double dist_to_target(const Vec& state) {
  const auto [fx, fy] = envs::Reacher::fingertip_of(state);
  return std::hypot(fx - state[6], fy - state[7]);
}

// Run one full episode under a scripted policy; returns the final state.
Vec run_episode(const envs::Env& env, const envs::ScriptedPolicy& policy, Rng& rng,
                double* total_reward = nullptr, std::vector<Vec>* states = nullptr) {
  Vec state = env.reset(rng);
  double total = 0.0;
  for (int t = 0; t < env.spec().horizon; ++t) {
    const auto result = env.step(state, t, policy.act(state, rng));
    total += result.reward;
    state = result.state;
    if (states) states->push_back(state);
    if (result.done || result.truncated) break;
  }
  if (total_reward) *total_reward = total;
  return state;
}

}  // namespace

TEST_CASE("coordination game: spec shape and one-hot start state") {
  auto env = envs::make_env("coordgame-v0");
  const auto& spec = env->spec();
  CHECK(spec.n_agents == 2);
  CHECK(spec.state_dim == 5);
  CHECK(spec.horizon == 25);
  for (int i = 0; i < 2; ++i) {
    CHECK(spec.obs_dims[static_cast<std::size_t>(i)] == 5);
    CHECK(spec.action_spaces[static_cast<std::size_t>(i)].discrete);
    CHECK(spec.action_spaces[static_cast<std::size_t>(i)].n == 2);
  }
  Rng rng(0);
  const Vec s0 = env->reset(rng);
  CHECK(s0 == Vec{1.0, 0.0, 0.0, 0.0, 0.0});
  const auto obs = env->observe(s0);
  CHECK(obs.size() == 2);
  CHECK(obs[0] == s0);
  CHECK(obs[1] == s0);
}

TEST_CASE("coordination game: reward is 1 iff the two choices agree") {
  auto env = envs::make_env("coordgame-v0");
  Rng rng(0);
  const Vec s0 = env->reset(rng);

  struct Case {
    double a1, a2, reward;
    int hot;  // expected one-hot slot of the successor state
  };
  // Outcome slots follow (a1, a2) in row-major order after the start slot.
  const Case cases[] = {
      {0, 0, 1.0, 1}, {0, 1, 0.0, 2}, {1, 0, 0.0, 3}, {1, 1, 1.0, 4}};
  for (const auto& c : cases) {
    const auto r = env->step(s0, 0, coord_actions(c.a1, c.a2));
    CHECK(r.reward == c.reward);
    for (int i = 0; i < 5; ++i)
      CHECK(r.state[static_cast<std::size_t>(i)] == (i == c.hot ? 1.0 : 0.0));
    CHECK(!r.done);
    CHECK(!r.truncated);
  }
}

TEST_CASE("coordination game: truncates at the horizon, never terminates") {
  auto env = envs::make_env("coordgame-v0");
  Rng rng(1);
  Vec state = env->reset(rng);
  for (int t = 0; t < 25; ++t) {
    const auto r = env->step(state, t, coord_actions(1, 1));
    CHECK(!r.done);
    CHECK(r.truncated == (t == 24));
    state = r.state;
  }
  // Score is the per-step average of the shared reward.
  CHECK(env->episode_score(25.0, 25) == doctest::Approx(1.0));
  CHECK(env->episode_score(12.0, 25) == doctest::Approx(0.48));
}

TEST_CASE("scripted bernoulli policy matches its agreement probability") {
  // p1 = p2 = 0.75 agree with probability 0.75^2 + 0.25^2 = 0.625.
  auto env = envs::make_env("coordgame-v0");
  envs::BernoulliPolicy policy(0.75, 0.75);
  Rng rng(2);
  const Vec s0 = env->reset(rng);
  const int n = 100000;
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto acts = policy.act(s0, rng);
    mean += (acts[0][0] == acts[1][0]) ? 1.0 : 0.0;
  }
  mean /= n;
  CHECK(std::abs(mean - 0.625) < 0.01);
}

TEST_CASE("reacher kinematics: forward and inverse agree on both branches") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double radius = rng.uniform(envs::Reacher::kTargetRadiusMin,
                                      envs::Reacher::kTargetRadiusMax);
    const double angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double tx = radius * std::cos(angle), ty = radius * std::sin(angle);
    for (int sign : {+1, -1}) {
      const auto ik = envs::reacher_ik(tx, ty, sign);
      const auto [fx, fy] = envs::reacher_fk(ik.theta1, ik.theta2);
      CHECK(std::abs(fx - tx) <= 1e-9);
      CHECK(std::abs(fy - ty) <= 1e-9);
      if (sign > 0) CHECK(ik.theta2 >= 0.0);
      if (sign < 0) CHECK(ik.theta2 <= 0.0);
    }
  }
}

TEST_CASE("reacher: reset targets stay in the reachable annulus") {
  envs::Reacher env(envs::ReacherObsMode::kFullyObservant);
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const Vec s = env.reset(rng);
    const double r = std::hypot(s[6], s[7]);
    CHECK(r >= envs::Reacher::kTargetRadiusMin - 1e-12);
    CHECK(r <= envs::Reacher::kTargetRadiusMax + 1e-12);
    // Angles encoded as unit cos/sin pairs.
    CHECK(std::abs(s[0] * s[0] + s[1] * s[1] - 1.0) <= 1e-12);
    CHECK(std::abs(s[2] * s[2] + s[3] * s[3] - 1.0) <= 1e-12);
  }
}

TEST_CASE("reacher: velocity integration, clipping and elbow limit") {
  envs::Reacher env(envs::ReacherObsMode::kFullyObservant);
  Rng rng(5);
  Vec s = env.reset(rng);
  const double t1 = envs::Reacher::theta1_of(s);
  const double t2 = envs::Reacher::theta2_of(s);

  // Action 0.5 -> 1 rad/s -> 0.05 rad per step; 3.0 clips to 1 -> 2 rad/s.
  const auto r = env.step(s, 0, {{0.5}, {3.0}});
  CHECK(envs::Reacher::theta1_of(r.state) == doctest::Approx(t1 + 0.5 * 2.0 * 0.05).epsilon(1e-12));
  const double expect_t2 = std::min(t2 + 2.0 * 0.05, std::numbers::pi);
  CHECK(envs::Reacher::theta2_of(r.state) == doctest::Approx(expect_t2).epsilon(1e-9));
  CHECK(r.state[4] == doctest::Approx(1.0));   // v1 = 0.5 * 2
  CHECK(r.state[5] == doctest::Approx(2.0));   // v2 clipped
  CHECK(r.state[6] == s[6]);                   // target fixed within episode
  CHECK(r.state[7] == s[7]);
  CHECK(r.reward == doctest::Approx(-dist_to_target(r.state)).epsilon(1e-12));

  // The elbow never crosses |theta2| = pi.
  Vec state = s;
  for (int t = 0; t < 50; ++t) {
    const auto rr = env.step(state, t, {{1.0}, {1.0}});
    CHECK(std::abs(envs::Reacher::theta2_of(rr.state)) <= std::numbers::pi + 1e-12);
    state = rr.state;
  }
}

TEST_CASE("reacher: truncation only at the horizon") {
  envs::Reacher env(envs::ReacherObsMode::kFullyObservant);
  Rng rng(6);
  Vec state = env.reset(rng);
  for (int t = 0; t < 50; ++t) {
    const auto r = env.step(state, t, {{0.1}, {-0.1}});
    CHECK(!r.done);
    CHECK(r.truncated == (t == 49));
    state = r.state;
  }
}

TEST_CASE("reacher observation modes expose the documented slices") {
  Rng rng(7);
  envs::Reacher fo(envs::ReacherObsMode::kFullyObservant);
  const Vec s = fo.reset(rng);
  const auto [fx, fy] = envs::Reacher::fingertip_of(s);

  SUBCASE("fully observant: identical 10-dim views with the target gap") {
    const auto obs = fo.observe(s);
    REQUIRE(obs.size() == 2);
    REQUIRE(obs[0].size() == 10);
    CHECK(obs[0] == obs[1]);
    for (int i = 0; i < 6; ++i) CHECK(obs[0][static_cast<std::size_t>(i)] == s[static_cast<std::size_t>(i)]);
    CHECK(obs[0][6] == s[6]);
    CHECK(obs[0][7] == s[7]);
    CHECK(obs[0][8] == doctest::Approx(s[6] - fx).epsilon(1e-12));
    CHECK(obs[0][9] == doctest::Approx(s[7] - fy).epsilon(1e-12));
  }

  SUBCASE("independent: each agent sees only its own joint plus the target") {
    envs::Reacher ind(envs::ReacherObsMode::kIndependent);
    const auto obs = ind.observe(s);
    REQUIRE(obs[0].size() == 5);
    REQUIRE(obs[1].size() == 5);
    CHECK(obs[0] == Vec{s[0], s[1], s[4], s[6], s[7]});
    CHECK(obs[1] == Vec{s[2], s[3], s[5], s[6], s[7]});
  }

  SUBCASE("leader-only: agent 1 sees the target, agent 2 does not") {
    envs::Reacher leader(envs::ReacherObsMode::kLeaderOnly);
    const auto obs = leader.observe(s);
    REQUIRE(obs[0].size() == 8);
    REQUIRE(obs[1].size() == 6);
    CHECK(obs[0] == Vec{s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]});
    CHECK(obs[1] == Vec{s[0], s[1], s[2], s[3], s[4], s[5]});
  }
}

TEST_CASE("reacher expert policies reach the target on their own branch") {
  envs::Reacher env(envs::ReacherObsMode::kFullyObservant);
  for (int sign : {+1, -1}) {
    envs::ReacherExpertPolicy expert(sign);
    Rng rng(8);
    int near = 0, episodes = 50;
    for (int e = 0; e < episodes; ++e) {
      const Vec last = run_episode(env, expert, rng);
      if (dist_to_target(last) <= 0.01) ++near;
    }
    CHECK(near == episodes);
  }
}

TEST_CASE("counter-clockwise expert keeps the elbow bent upward") {
  envs::Reacher env(envs::ReacherObsMode::kFullyObservant);
  envs::ReacherExpertPolicy ccw(+1);
  Rng rng(9);
  int nonneg = 0, total = 0;
  for (int e = 0; e < 40; ++e) {
    std::vector<Vec> states;
    run_episode(env, ccw, rng, nullptr, &states);
    for (const Vec& s : states) {
      ++total;
      if (envs::Reacher::theta2_of(s) >= 0.0) ++nonneg;
    }
  }
  CHECK(nonneg >= static_cast<int>(0.99 * total));
}

TEST_CASE("environment stepping is a pure function of (state, action)") {
  for (const char* id : {"coordgame-v0", "reacher2-v0-fo"}) {
    auto env = envs::make_env(id);
    Rng rng(10);
    const Vec s = env->reset(rng);
    JointAction a;
    if (env->spec().action_spaces[0].discrete) {
      a = coord_actions(1, 0);
    } else {
      a = {{0.3}, {-0.7}};
    }
    const auto r1 = env->step(s, 3, a);
    const auto r2 = env->step(s, 3, a);
    CHECK(r1.state == r2.state);
    CHECK(r1.reward == r2.reward);
  }
}

TEST_CASE("action flattening round-trips and validates shapes") {
  auto env = envs::make_env("coordgame-v0");
  const auto& spec = env->spec();
  const JointAction a = coord_actions(1, 0);
  const Vec flat = envs::flatten_actions(spec, a);
  CHECK(flat == Vec{1.0, 0.0});
  const JointAction back = envs::unflatten_actions(spec, flat);
  CHECK(back == a);
  CHECK_THROWS(envs::validate_actions(spec, {{1.0}}));          // missing agent
  CHECK_THROWS(envs::validate_actions(spec, {{1.0, 0.0}, {0.0}}));  // wrong dim
  CHECK_THROWS(envs::validate_actions(spec, {{2.0}, {0.0}}));   // index out of range
  CHECK_NOTHROW(envs::validate_actions(spec, a));

  auto reacher = envs::make_env("reacher2-v0-fo");
  const JointAction ra = {{0.25}, {-0.5}};
  CHECK(envs::flatten_actions(reacher->spec(), ra) == Vec{0.25, -0.5});
  CHECK(envs::unflatten_actions(reacher->spec(), Vec{0.25, -0.5}) == ra);
}

TEST_CASE("action slots one-hot discrete choices and copy continuous ones") {
  envs::ActionSpace disc{true, 1, 2};
  CHECK(envs::action_slot_dim(disc) == 2);
  CHECK(envs::encode_action_slot(disc, {1.0}) == Vec{0.0, 1.0});
  CHECK(envs::encode_action_slot(disc, {0.0}) == Vec{1.0, 0.0});
  CHECK(envs::zero_action_slot(disc) == Vec{0.0, 0.0});

  envs::ActionSpace cont{false, 2, 0};
  CHECK(envs::action_slot_dim(cont) == 2);
  CHECK(envs::encode_action_slot(cont, {0.3, -0.4}) == Vec{0.3, -0.4});
  CHECK(envs::zero_action_slot(cont) == Vec{0.0, 0.0});
}

TEST_CASE("centralized adapter folds two discrete agents into one") {
  envs::CentralizedAdapter central(envs::make_env("coordgame-v0"));
  const auto& spec = central.spec();
  CHECK(spec.id == "coordgame-v0-central");
  CHECK(spec.n_agents == 1);
  CHECK(spec.obs_dims == std::vector<int>{5});
  REQUIRE(spec.action_spaces.size() == 1);
  CHECK(spec.action_spaces[0].discrete);
  CHECK(spec.action_spaces[0].n == 4);

  Rng rng(11);
  const Vec s0 = central.reset(rng);
  // Joint index 2 decodes to (a1=1, a2=0): last agent varies fastest.
  const auto base = central.to_base_actions({2.0});
  CHECK(base == JointAction{{1.0}, {0.0}});
  auto plain = envs::make_env("coordgame-v0");
  const auto r_central = central.step(s0, 0, {{2.0}});
  const auto r_plain = plain->step(s0, 0, coord_actions(1, 0));
  CHECK(r_central.state == r_plain.state);
  CHECK(r_central.reward == r_plain.reward);
  CHECK(r_central.obs.size() == 1);
  CHECK(r_central.obs[0] == r_plain.state);  // centralized view = full state
}

TEST_CASE("registry rejects unknown environment ids") {
  CHECK_THROWS(envs::make_env("unknown-env"));
  CHECK(envs::make_env("reacher2-v0-ind")->spec().obs_dims == std::vector<int>{5, 5});
  CHECK(envs::make_env("reacher2-v0-leader")->spec().obs_dims == std::vector<int>{8, 6});
}
