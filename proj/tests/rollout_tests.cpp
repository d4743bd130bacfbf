#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "moma/data/collect.hpp"
#include "moma/data/dataset.hpp"
#include "moma/envs/registry.hpp"
#include "moma/envs/scripted.hpp"
#include "moma/rollout/rollout.hpp"

using namespace moma;

namespace {

data::OfflineDataset coord_dataset(int episodes, std::uint64_t seed) {
  auto env = envs::make_env("coordgame-v0");
  envs::BernoulliPolicy policy(0.5, 0.5);
  return data::collect(*env, {&policy}, episodes, seed);
}

// Deterministic dynamics stub: successor = state, fixed reward, scripted
// uncertainty per call index (shared across branches via mutable counter).
class FakeModel final : public rollout::ModelInterface {
 public:
  FakeModel(const envs::Env& env, double reward, Vec eps_schedule = {})
      : env_(&env), reward_(reward), eps_schedule_(std::move(eps_schedule)) {}

  const envs::EnvSpec& spec() const override { return env_->spec(); }

  rollout::ModelStep step(const Vec& state, int /*env_t*/, const envs::JointAction& /*actions*/,
                          Rng& /*rng*/) const override {
    rollout::ModelStep out;
    out.next_state = state;
    out.mean_reward = reward_;
    out.eps_r = 0.01;
    out.eps_g = eps_schedule_.empty()
                    ? 0.02
                    : eps_schedule_[static_cast<std::size_t>(
                          std::min<long long>(calls_, static_cast<long long>(eps_schedule_.size()) - 1))];
    ++calls_;
    return out;
  }
  std::vector<Vec> observe(const Vec& state) const override { return env_->observe(state); }

 private:
  const envs::Env* env_;
  double reward_;
  Vec eps_schedule_;
  mutable long long calls_ = 0;
};

// Always terminal after one step.
class AbsorbingModel final : public rollout::ModelInterface {
 public:
  explicit AbsorbingModel(const envs::Env& env) : env_(&env) {}
  const envs::EnvSpec& spec() const override { return env_->spec(); }
  rollout::ModelStep step(const Vec& state, int, const envs::JointAction&, Rng&) const override {
    rollout::ModelStep out;
    out.next_state = state;
    out.mean_reward = 1.0;
    out.terminal = true;
    return out;
  }
  std::vector<Vec> observe(const Vec& state) const override { return env_->observe(state); }

 private:
  const envs::Env* env_;
};

// Emits a state outside any dataset box while claiming one exists.
class EscapingModel final : public rollout::ModelInterface {
 public:
  EscapingModel(const envs::Env& env, const data::DatasetStats& stats)
      : env_(&env), stats_(&stats) {}
  const envs::EnvSpec& spec() const override { return env_->spec(); }
  rollout::ModelStep step(const Vec& state, int, const envs::JointAction&, Rng&) const override {
    rollout::ModelStep out;
    out.next_state = Vec(state.size(), 99.0);
    out.mean_reward = 0.0;
    return out;
  }
  std::vector<Vec> observe(const Vec& state) const override { return env_->observe(state); }
  const data::DatasetStats* state_box() const override { return stats_; }

 private:
  const envs::Env* env_;
  const data::DatasetStats* stats_;
};

// Uniform-random scripted actor exposed through the policy interface.
class RandomPolicy final : public rollout::PolicyInterface {
 public:
  explicit RandomPolicy(const envs::EnvSpec& spec) : spec_(&spec) {}
  void act(const std::vector<std::vector<Vec>>& /*histories*/, Rng& rng,
           envs::JointAction& actions, Vec& logps) const override {
    actions.clear();
    logps.clear();
    for (const auto& sp : spec_->action_spaces) {
      if (sp.discrete) {
        actions.push_back({static_cast<double>(rng.uniform_int(sp.n))});
        logps.push_back(-std::log(static_cast<double>(sp.n)));
      } else {
        Vec a(static_cast<std::size_t>(sp.dim));
        for (double& x : a) x = rng.uniform(-1.0, 1.0);
        actions.push_back(std::move(a));
        logps.push_back(0.0);
      }
    }
  }

 private:
  const envs::EnvSpec* spec_;
};

class ZeroValue final : public rollout::ValueInterface {
 public:
  double team_value(const Vec&, const std::vector<std::vector<Vec>>&) const override { return 0.25; }
};

}  // namespace

TEST_CASE("penalized reward subtracts both weighted uncertainties") {
  CHECK(rollout::penalized_reward(0.5, 0.1, 0.1, 1.0, 2.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(rollout::penalized_reward(1.0, 0.0, 0.0, 5.0, 5.0) == 1.0);
  // Nonnegative coefficients never raise the reward.
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double r = rng.normal();
    const double er = std::abs(rng.normal()), eg = std::abs(rng.normal());
    const double lr = std::abs(rng.normal()), lg = std::abs(rng.normal());
    CHECK(rollout::penalized_reward(r, er, eg, lr, lg) <= r + 1e-15);
  }
}

TEST_CASE("timeout mask cuts at the horizon step and at the uncertainty cap") {
  // Branch spawned at t=3 with budget k=4: steps run j = 3,4,5,6.
  CHECK(rollout::timeout_mask(3, 3, 4, 0.0, 1.0) == 1.0);
  CHECK(rollout::timeout_mask(5, 3, 4, 0.0, 1.0) == 1.0);
  CHECK(rollout::timeout_mask(6, 3, 4, 0.0, 1.0) == 0.0);  // j == t+k-1
  CHECK(rollout::timeout_mask(4, 3, 4, 1.0, 1.0) == 0.0);  // eps at the cap: inclusive
  CHECK(rollout::timeout_mask(4, 3, 4, 1.5, 1.0) == 0.0);
  CHECK(rollout::timeout_mask(4, 3, 4, 0.999999, 1.0) == 1.0);
}

TEST_CASE("branches run the full budget when nothing cuts them short") {
  const auto d = coord_dataset(5, 2);
  auto env = envs::make_env("coordgame-v0");
  FakeModel model(*env, 0.5);
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 5;
  cfg.batch = 8;
  cfg.lambda_r = 1.0;
  cfg.lambda_g = 2.0;
  cfg.l_eps = 10.0;
  cfg.window = 4;
  Rng rng(3);
  const auto buf = rollout::generate_rollouts(d, policy, value, model, cfg, rng);

  REQUIRE(buf.rollouts.size() == 8);
  CHECK(buf.total_transitions() == 40);
  for (const auto& branch : buf.rollouts) {
    REQUIRE(branch.size() == 5);
    for (std::size_t j = 0; j < branch.size(); ++j) {
      const auto& tr = branch[j];
      // Deterministic penalty arithmetic from the scripted uncertainties.
      CHECK(tr.raw_reward == 0.5);
      CHECK(tr.reward == doctest::Approx(0.5 - 1.0 * 0.01 - 2.0 * 0.02).epsilon(1e-12));
      CHECK(tr.reward <= tr.raw_reward);
      CHECK(tr.model_mask == 1.0);
      CHECK(tr.timeout_mask == (j + 1 == branch.size() ? 0.0 : 1.0));
      CHECK(tr.value == 0.25);
      CHECK(tr.next_value == 0.25);
      CHECK(tr.logp_old.size() == 2);
      // Fake dynamics: the state never moves.
      CHECK(tr.next_state == tr.state);
      // Windows never exceed the configured length.
      for (const auto& w : tr.histories) CHECK(w.size() <= 4);
    }
    // Sequential steps chain states.
    for (std::size_t j = 1; j < branch.size(); ++j)
      CHECK(branch[j].state == branch[j - 1].next_state);
  }
}

TEST_CASE("branches start from dataset states") {
  const auto d = coord_dataset(5, 4);
  std::set<std::string> dataset_states;
  for (const auto& traj : d.trajectories)
    for (const auto& s : traj.states) {
      std::string key;
      for (double v : s) key += std::to_string(v) + ",";
      dataset_states.insert(key);
    }
  auto env = envs::make_env("coordgame-v0");
  FakeModel model(*env, 0.0);
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 2;
  cfg.batch = 50;
  cfg.l_eps = 10.0;
  Rng rng(5);
  const auto buf = rollout::generate_rollouts(d, policy, value, model, cfg, rng);
  for (const auto& branch : buf.rollouts) {
    std::string key;
    for (double v : branch[0].state) key += std::to_string(v) + ",";
    CHECK(dataset_states.count(key) == 1);
  }
}

TEST_CASE("an uncertainty spike ends the branch with a zero timeout mask") {
  const auto d = coord_dataset(3, 6);
  auto env = envs::make_env("coordgame-v0");
  // eps_g per model call: fine, spike. Every branch sees the spike on its
  // second step because the schedule is indexed per call and batch = 1.
  FakeModel model(*env, 0.0, {0.0, 5.0});
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 6;
  cfg.batch = 1;
  cfg.l_eps = 1.0;
  Rng rng(7);
  const auto buf = rollout::generate_rollouts(d, policy, value, model, cfg, rng);
  REQUIRE(buf.rollouts.size() == 1);
  const auto& branch = buf.rollouts[0];
  REQUIRE(branch.size() == 2);
  CHECK(branch[0].timeout_mask == 1.0);
  CHECK(branch[1].timeout_mask == 0.0);
  CHECK(branch[1].eps_g == 5.0);
  CHECK(branch[1].model_mask == 1.0);  // not absorbing, just cut off
}

TEST_CASE("an absorbing prediction ends the branch with a zero model mask") {
  const auto d = coord_dataset(3, 8);
  auto env = envs::make_env("coordgame-v0");
  AbsorbingModel model(*env);
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 6;
  cfg.batch = 4;
  cfg.l_eps = 10.0;
  Rng rng(9);
  const auto buf = rollout::generate_rollouts(d, policy, value, model, cfg, rng);
  for (const auto& branch : buf.rollouts) {
    REQUIRE(branch.size() == 1);
    CHECK(branch[0].model_mask == 0.0);
  }
}

TEST_CASE("rollout generation is bitwise reproducible under a fixed seed") {
  const auto d = coord_dataset(4, 10);
  auto env = envs::make_env("coordgame-v0");
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 4;
  cfg.batch = 6;
  cfg.l_eps = 10.0;
  auto run = [&] {
    FakeModel model(*env, 0.3);
    Rng rng(11);
    return rollout::generate_rollouts(d, policy, value, model, cfg, rng);
  };
  const auto a = run(), b = run();
  REQUIRE(a.rollouts.size() == b.rollouts.size());
  for (std::size_t i = 0; i < a.rollouts.size(); ++i) {
    REQUIRE(a.rollouts[i].size() == b.rollouts[i].size());
    for (std::size_t j = 0; j < a.rollouts[i].size(); ++j) {
      CHECK(a.rollouts[i][j].state == b.rollouts[i][j].state);
      CHECK(a.rollouts[i][j].actions == b.rollouts[i][j].actions);
      CHECK(a.rollouts[i][j].logp_old == b.rollouts[i][j].logp_old);
      CHECK(a.rollouts[i][j].reward == b.rollouts[i][j].reward);
    }
  }
}

TEST_CASE("a state escaping the guaranteed box is a hard failure") {
  const auto d = coord_dataset(3, 12);
  const auto stats = data::compute_stats(d);
  auto env = envs::make_env("coordgame-v0");
  EscapingModel model(*env, stats);
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 3;
  cfg.batch = 2;
  cfg.l_eps = 10.0;
  Rng rng(13);
  CHECK_THROWS_AS(rollout::generate_rollouts(d, policy, value, model, cfg, rng), std::logic_error);
}

TEST_CASE("config validation rejects a missing uncertainty threshold") {
  const auto d = coord_dataset(3, 14);
  auto env = envs::make_env("coordgame-v0");
  FakeModel model(*env, 0.0);
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 3;
  cfg.batch = 2;
  cfg.l_eps = 0.0;  // unset
  Rng rng(15);
  CHECK_THROWS(rollout::generate_rollouts(d, policy, value, model, cfg, rng));
}

TEST_CASE("ground-truth mode: exact dynamics, zero eps, horizon truncation") {
  const auto d = coord_dataset(4, 16);
  auto env = envs::make_env("coordgame-v0");
  rollout::GroundTruthModel model(*env);
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 30;  // crosses the env horizon of 25 for late spawn points
  cfg.batch = 40;
  cfg.l_eps = 1.0;
  Rng rng(17);
  const auto buf = rollout::generate_rollouts(d, policy, value, model, cfg, rng);

  bool saw_truncation = false;
  for (const auto& branch : buf.rollouts) {
    REQUIRE(!branch.empty());
    CHECK(branch.size() <= 30);
    for (const auto& tr : branch) {
      CHECK(tr.eps_r == 0.0);
      CHECK(tr.eps_g == 0.0);
      CHECK(tr.reward == tr.raw_reward);  // no uncertainty, no penalty
      // Real game dynamics: reward means the one-hot matches agreement.
      const bool agree = tr.actions[0][0] == tr.actions[1][0];
      CHECK(tr.raw_reward == (agree ? 1.0 : 0.0));
      CHECK(tr.model_mask == 1.0);  // the game has no absorbing states
    }
    if (branch.size() < 30) saw_truncation = true;
    CHECK(branch.back().timeout_mask == 0.0);
  }
  // Some spawn points sit close enough to the horizon to truncate early.
  CHECK(saw_truncation);
}

TEST_CASE("histories grow by one entry per model step up to the window") {
  const auto d = coord_dataset(3, 18);
  auto env = envs::make_env("coordgame-v0");
  FakeModel model(*env, 0.0);
  RandomPolicy policy(env->spec());
  ZeroValue value;
  rollout::RolloutConfig cfg;
  cfg.k = 6;
  cfg.batch = 10;
  cfg.l_eps = 10.0;
  cfg.window = 3;
  Rng rng(19);
  const auto buf = rollout::generate_rollouts(d, policy, value, model, cfg, rng);
  for (const auto& branch : buf.rollouts) {
    const std::size_t start = branch[0].histories[0].size();
    CHECK(start >= 1);
    CHECK(start <= 3);
    for (std::size_t j = 0; j < branch.size(); ++j) {
      for (int agent = 0; agent < 2; ++agent) {
        const auto& w = branch[j].histories[static_cast<std::size_t>(agent)];
        CHECK(w.size() == std::min<std::size_t>(start + j, 3));
        // Window entries are concat(observation, previous-action slot).
        for (const auto& entry : w) CHECK(entry.size() == 7);
      }
      if (j > 0) {
        // The newest entry carries the previous step's own action one-hot.
        const auto& prev = branch[j - 1];
        for (int agent = 0; agent < 2; ++agent) {
          const auto& entry = branch[j].histories[static_cast<std::size_t>(agent)].back();
          const double a = prev.actions[static_cast<std::size_t>(agent)][0];
          CHECK(entry[5] == (a == 0.0 ? 1.0 : 0.0));
          CHECK(entry[6] == (a == 1.0 ? 1.0 : 0.0));
        }
      }
    }
  }
}

TEST_CASE("ensemble model adapter reports the dataset box and clips into it") {
  const auto d = coord_dataset(20, 20);
  const auto stats = data::compute_stats(d);
  auto env = envs::make_env("coordgame-v0");

  // Hand-built ensemble around biases; predictions stay in the one-hot set.
  std::vector<wm::EnsembleMember> members;
  for (int i = 0; i < 2; ++i) {
    wm::EnsembleMember m(5, 4, {4});
    auto& ps = m.params();
    ps.freeze();
    ps.fill(ps.block_id("state.ls.b"), -40.0);
    ps.fill(ps.block_id("reward.ls.b"), -40.0);
    auto mu = ps.values(ps.block_id("state.mu.b"));
    mu[2] = 1.0;
    ps.values(ps.block_id("reward.mu.b"))[0] = 0.5;
    ps.values(ps.block_id("done.b"))[0] = -2.0;
    members.push_back(std::move(m));
  }
  wm::WorldModelConfig cfg;
  cfg.n_members = 2;
  cfg.n_elites = 2;
  wm::WorldModelEnsemble ens(env->spec(), cfg, std::move(members), {0, 1}, stats);
  ens.set_leps(1.0);

  rollout::EnsembleModel model(ens, *env);
  CHECK(model.state_box() == &ens.stats());
  Rng rng(21);
  const auto step = model.step(Vec{1, 0, 0, 0, 0}, 0, {{0.0}, {1.0}}, rng);
  CHECK(step.next_state == Vec{0, 0, 1, 0, 0});  // one-hot projection applied
  CHECK(step.mean_reward == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(!step.terminal);
  CHECK(!step.truncated);
  CHECK(step.eps_g == 0.0);  // identical members
}
