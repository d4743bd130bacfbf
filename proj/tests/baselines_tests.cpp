#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "moma/baselines/ibc.hpp"
#include "moma/baselines/maiql.hpp"
#include "moma/data/collect.hpp"
#include "moma/envs/registry.hpp"
#include "moma/envs/scripted.hpp"
#include "moma/nn/finite_diff.hpp"

using namespace moma;

namespace {

mappo::ActorCriticConfig small_arch() {
  mappo::ActorCriticConfig cfg;
  cfg.window = 2;
  cfg.embed_dim = 8;
  cfg.policy_hidden = {8};
  cfg.value_hidden = {4};
  cfg.mixer_hidden = {4};
  return cfg;
}

baselines::MaiqlConfig small_cfg() {
  baselines::MaiqlConfig cfg;
  cfg.arch = small_arch();
  cfg.q_hidden = {8};
  cfg.batch_size = 8;
  return cfg;
}

// One hand-built batch item on the coordination game start state.
baselines::MaiqlBatchItem coord_item(const envs::Env& env, const envs::JointAction& actions,
                                     double reward, double mask) {
  baselines::MaiqlBatchItem item;
  item.state = Vec{1, 0, 0, 0, 0};
  item.next_state = Vec{0, 1, 0, 0, 0};
  const auto entry_of = [&](const Vec& state) {
    std::vector<std::vector<Vec>> h;
    const auto obs = env.observe(state);
    for (int i = 0; i < env.spec().n_agents; ++i) {
      Vec e = obs[static_cast<std::size_t>(i)];
      const Vec slot = envs::zero_action_slot(env.spec().action_spaces[static_cast<std::size_t>(i)]);
      e.insert(e.end(), slot.begin(), slot.end());
      h.push_back({e});
    }
    return h;
  };
  item.histories = entry_of(item.state);
  item.next_histories = entry_of(item.next_state);
  item.actions = actions;
  item.reward = reward;
  item.mask = mask;
  return item;
}

void zero_all(baselines::Maiql& m) {
  // Touching the data freezes each set with all-zero values.
  for (auto& per_agent : m.q_nets())
    for (auto& q : per_agent) q.ps->freeze();
  for (auto& per_agent : m.target_q_nets())
    for (auto& q : per_agent) q.ps->freeze();
  for (auto& v : m.v_nets()) v.ps->freeze();
  m.q_mixer_params().freeze();
  m.target_q_mixer_params().freeze();
  m.v_mixer_params().freeze();
  for (const auto& named : m.policies().named_sets()) named.set->freeze();
}

}  // namespace

TEST_CASE("expectile loss closed forms, reflection, and minimizer") {
  CHECK(baselines::expectile_loss(0.0, 0.7) == 0.0);
  CHECK(baselines::expectile_loss(1.0, 0.7) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(baselines::expectile_loss(-1.0, 0.7) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(baselines::expectile_loss(2.0, 0.7) == doctest::Approx(2.8).epsilon(1e-12));
  CHECK(baselines::expectile_loss(-2.0, 0.7) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(baselines::expectile_loss(3.0, 0.5) == doctest::Approx(0.5 * 9.0).epsilon(1e-12));

  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double d = rng.normal() * 2.0;
    const double e = rng.uniform(0.05, 0.95);
    CHECK(baselines::expectile_loss(d, e) ==
          doctest::Approx(baselines::expectile_loss(-d, 1.0 - e)).epsilon(1e-12));

    // Tape version agrees with the scalar one.
    nn::Tape t;
    const double tape_val = t.value(baselines::expectile_loss(t, t.scalar(d), e));
    CHECK(tape_val == doctest::Approx(baselines::expectile_loss(d, e)).epsilon(1e-12));
  }

  // For a fair coin in {0,1}, the 0.7-expectile objective is minimized at 0.7.
  const auto objective = [](double v) {
    return 0.5 * (baselines::expectile_loss(0.0 - v, 0.7) + baselines::expectile_loss(1.0 - v, 0.7));
  };
  CHECK(objective(0.7) < objective(0.69));
  CHECK(objective(0.7) < objective(0.71));
}

TEST_CASE("expectile tape gradients match the analytic slopes") {
  for (const double d0 : {1.3, -0.8}) {
    nn::ParameterSet ps;
    const int id = ps.add_vector("d", 1);
    ps.freeze();
    ps.values(id)[0] = d0;
    nn::Tape t;
    const nn::NodeId loss = baselines::expectile_loss(t, t.param(ps, id), 0.7);
    ps.zero_grad();
    t.backward(loss);
    const double expect = d0 > 0.0 ? 2.0 * 0.7 * d0 : 2.0 * 0.3 * d0;
    CHECK(ps.grads(id)[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("polyak updates interpolate the raw parameter values") {
  const auto make = [](double fill_value) {
    auto ps = std::make_unique<nn::ParameterSet>();
    ps->add_vector("a", 3);
    ps->add_matrix("b", 2, 2);
    ps->freeze();
    for (auto& v : ps->values()) v = fill_value;
    return ps;
  };
  auto online = make(1.0);
  auto target = make(0.0);
  Rng rng(2);
  for (auto& v : online->values()) v = rng.normal();
  for (auto& v : target->values()) v = rng.normal();
  const Vec t0(target->values().begin(), target->values().end());

  SUBCASE("tau = 1 copies bitwise") {
    baselines::polyak_update(*online, *target, 1.0);
    for (std::size_t i = 0; i < t0.size(); ++i)
      CHECK(target->values()[i] == online->values()[i]);
  }
  SUBCASE("tau = 0 is a no-op") {
    baselines::polyak_update(*online, *target, 0.0);
    for (std::size_t i = 0; i < t0.size(); ++i) CHECK(target->values()[i] == t0[i]);
  }
  SUBCASE("intermediate tau follows the exact blend") {
    baselines::polyak_update(*online, *target, 0.25);
    for (std::size_t i = 0; i < t0.size(); ++i)
      CHECK(target->values()[i] ==
            doctest::Approx(0.75 * t0[i] + 0.25 * online->values()[i]).epsilon(1e-15));
  }
  SUBCASE("repeated updates approach the online values geometrically") {
    for (int k = 0; k < 10; ++k) baselines::polyak_update(*online, *target, 0.1);
    const double shrink = std::pow(0.9, 10);
    for (std::size_t i = 0; i < t0.size(); ++i)
      CHECK(target->values()[i] ==
            doctest::Approx(online->values()[i] + shrink * (t0[i] - online->values()[i]))
                .epsilon(1e-12));
  }
  SUBCASE("mismatched layouts are rejected") {
    nn::ParameterSet other;
    other.add_vector("a", 2);
    other.freeze();
    CHECK_THROWS(baselines::polyak_update(*online, other, 0.5));
  }
}

TEST_CASE("maiql initialization copies the online nets into the targets") {
  auto env = envs::make_env("coordgame-v0");
  baselines::Maiql m(env->spec(), small_cfg());
  Rng rng(3);
  m.init(rng);
  REQUIRE(m.q_nets().size() == 2);
  REQUIRE(m.q_nets()[0].size() == 2);  // twin heads
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      const auto on = m.q_nets()[i][k].ps->values();
      const auto tg = m.target_q_nets()[i][k].ps->values();
      REQUIRE(on.size() == tg.size());
      for (std::size_t j = 0; j < on.size(); ++j) CHECK(on[j] == tg[j]);
    }
  const auto mo = m.q_mixer_params().values();
  const auto mt = m.target_q_mixer_params().values();
  for (std::size_t j = 0; j < mo.size(); ++j) CHECK(mo[j] == mt[j]);
}

TEST_CASE("q loss closed form on zeroed networks") {
  auto env = envs::make_env("coordgame-v0");
  baselines::Maiql m(env->spec(), small_cfg());
  zero_all(m);

  const auto item = coord_item(*env, {{1.0}, {0.0}}, 0.5, 1.0);
  std::vector<baselines::MaiqlBatchItem> batch = {item};
  // Everything is zero: both twins predict 0 against a target of r = 0.5.
  nn::Tape t;
  CHECK(t.value(m.q_loss_node(t, batch)) == doctest::Approx(2.0 * 0.25).epsilon(1e-12));

  // A terminal mask removes the bootstrap even with a large V(s').
  auto& vmix = m.v_mixer_params();
  auto vb = vmix.values(vmix.block_id("mixer.l1.b"));
  vb[0] = 1.0;
  vb[1] = 1.0;
  for (auto& v : m.v_nets())
    v.ps->values(v.ps->block_id("v.l1.b"))[0] = 9.0;
  CHECK(m.online_v(item.next_state, item.next_histories) == doctest::Approx(18.0).epsilon(1e-12));

  auto terminal = item;
  terminal.mask = 0.0;
  std::vector<baselines::MaiqlBatchItem> term_batch = {terminal};
  nn::Tape t2;
  CHECK(t2.value(m.q_loss_node(t2, term_batch)) == doctest::Approx(0.5).epsilon(1e-12));

  // With the bootstrap alive the target grows to r + gamma * 18.
  nn::Tape t3;
  const double target = 0.5 + 0.99 * 18.0;
  CHECK(t3.value(m.q_loss_node(t3, batch)) ==
        doctest::Approx(2.0 * target * target).epsilon(1e-10));
}

TEST_CASE("v loss is the expectile of (target q - online v)") {
  auto env = envs::make_env("coordgame-v0");
  for (const double c : {0.4, -0.4}) {
    baselines::Maiql m(env->spec(), small_cfg());
    zero_all(m);
    auto& qmix = m.target_q_mixer_params();
    qmix.values(qmix.block_id("mixer.l1.b"))[2] = c;  // Qhat(s, a) = c everywhere

    const auto item = coord_item(*env, {{0.0}, {0.0}}, 0.0, 1.0);
    CHECK(m.target_q(item.state, item.histories, item.actions) == doctest::Approx(c).epsilon(1e-12));

    std::vector<baselines::MaiqlBatchItem> batch = {item, item};
    nn::Tape t;
    const double expect = (c > 0.0 ? 0.7 : 0.3) * c * c;
    CHECK(t.value(m.v_loss_node(t, batch)) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("target q takes the twin minimum per head before mixing") {
  auto env = envs::make_env("coordgame-v0");
  baselines::Maiql m(env->spec(), small_cfg());
  zero_all(m);

  auto& qmix = m.target_q_mixer_params();
  auto qb = qmix.values(qmix.block_id("mixer.l1.b"));
  qb[0] = 1.0;  // agent 0 weight
  qb[1] = 0.0;  // agent 1 ignored
  qb[2] = 0.3;  // bias
  auto& twin0 = *m.target_q_nets()[0][0].ps;
  auto& twin1 = *m.target_q_nets()[0][1].ps;
  twin0.values(twin0.block_id("q.l1.b"))[0] = 0.5;
  twin1.values(twin1.block_id("q.l1.b"))[0] = 0.2;

  const auto item = coord_item(*env, {{1.0}, {1.0}}, 0.0, 1.0);
  CHECK(m.target_q(item.state, item.histories, item.actions) ==
        doctest::Approx(1.0 * 0.2 + 0.3).epsilon(1e-12));

  // Swapping the twin values changes nothing: the minimum is symmetric.
  twin0.values(twin0.block_id("q.l1.b"))[0] = 0.2;
  twin1.values(twin1.block_id("q.l1.b"))[0] = 0.5;
  CHECK(m.target_q(item.state, item.histories, item.actions) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("online v mixes per-agent values through abs weights plus bias") {
  auto env = envs::make_env("coordgame-v0");
  baselines::Maiql m(env->spec(), small_cfg());
  zero_all(m);
  auto& vmix = m.v_mixer_params();
  auto vb = vmix.values(vmix.block_id("mixer.l1.b"));
  vb[0] = -2.0;  // abs -> 2
  vb[1] = 1.0;
  vb[2] = 0.25;
  auto& v0 = *m.v_nets()[0].ps;
  auto& v1 = *m.v_nets()[1].ps;
  v0.values(v0.block_id("v.l1.b"))[0] = 0.3;
  v1.values(v1.block_id("v.l1.b"))[0] = -0.1;

  const auto item = coord_item(*env, {{0.0}, {0.0}}, 0.0, 1.0);
  CHECK(m.online_v(item.state, item.histories) ==
        doctest::Approx(2.0 * 0.3 + 1.0 * (-0.1) + 0.25).epsilon(1e-12));
}

TEST_CASE("policy loss: unit weights reduce to the mean joint nll") {
  auto env = envs::make_env("coordgame-v0");
  baselines::Maiql m(env->spec(), small_cfg());
  zero_all(m);
  const auto item = coord_item(*env, {{1.0}, {0.0}}, 0.0, 1.0);
  std::vector<baselines::MaiqlBatchItem> batch = {item, item};
  long long clamped = 0;
  nn::Tape t;
  // Zero networks: W = exp(0) = 1 and each agent is uniform over 2 actions.
  CHECK(t.value(m.policy_loss_node(t, batch, &clamped)) ==
        doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-12));
  CHECK(clamped == 0);
}

TEST_CASE("policy loss: the state-bias weight factor carries no temperature") {
  auto env = envs::make_env("coordgame-v0");
  baselines::Maiql m(env->spec(), small_cfg());
  zero_all(m);
  auto& qmix = m.target_q_mixer_params();
  qmix.values(qmix.block_id("mixer.l1.b"))[2] = std::numbers::ln2;  // bhat - b_V = ln 2

  const auto item = coord_item(*env, {{0.0}, {1.0}}, 0.0, 1.0);
  std::vector<baselines::MaiqlBatchItem> batch = {item};
  long long clamped = 0;
  nn::Tape t;
  // W = exp(ln 2) = 2 exactly, independent of beta.
  CHECK(t.value(m.policy_loss_node(t, batch, &clamped)) ==
        doctest::Approx(4.0 * std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("policy loss: per-agent exponents scale with beta and use twin-min q") {
  auto env = envs::make_env("coordgame-v0");
  baselines::MaiqlConfig cfg = small_cfg();
  baselines::Maiql m(env->spec(), cfg);
  zero_all(m);
  auto& qmix = m.target_q_mixer_params();
  qmix.values(qmix.block_id("mixer.l1.b"))[0] = 1.0;  // agent 0 target weight
  auto& twin0 = *m.target_q_nets()[0][0].ps;
  auto& twin1 = *m.target_q_nets()[0][1].ps;
  twin0.values(twin0.block_id("q.l1.b"))[0] = 0.2;
  twin1.values(twin1.block_id("q.l1.b"))[0] = 0.5;  // min -> 0.2

  const auto item = coord_item(*env, {{1.0}, {1.0}}, 0.0, 1.0);
  std::vector<baselines::MaiqlBatchItem> batch = {item};
  long long clamped = 0;
  nn::Tape t;
  // log W = beta * (1 * 0.2) = 0.6 with beta = 3.
  const double expect = std::exp(cfg.beta * 0.2) * 2.0 * std::numbers::ln2;
  CHECK(t.value(m.policy_loss_node(t, batch, &clamped)) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(clamped == 0);
}

TEST_CASE("policy loss clamps oversized weights and counts them") {
  auto env = envs::make_env("coordgame-v0");
  baselines::MaiqlConfig cfg = small_cfg();
  cfg.weight_clamp = 1.5;  // below exp(0.6) ~ 1.822
  baselines::Maiql m(env->spec(), cfg);
  zero_all(m);
  auto& qmix = m.target_q_mixer_params();
  qmix.values(qmix.block_id("mixer.l1.b"))[0] = 1.0;
  auto& twin0 = *m.target_q_nets()[0][0].ps;
  auto& twin1 = *m.target_q_nets()[0][1].ps;
  twin0.values(twin0.block_id("q.l1.b"))[0] = 0.2;
  twin1.values(twin1.block_id("q.l1.b"))[0] = 0.2;

  const auto item = coord_item(*env, {{1.0}, {1.0}}, 0.0, 1.0);
  std::vector<baselines::MaiqlBatchItem> batch = {item, item, item};
  long long clamped = 0;
  nn::Tape t;
  CHECK(t.value(m.policy_loss_node(t, batch, &clamped)) ==
        doctest::Approx(1.5 * 2.0 * std::numbers::ln2).epsilon(1e-12));
  CHECK(clamped == 3);
}

TEST_CASE("all three maiql losses pass finite-difference gradient checks") {
  auto env = envs::make_env("coordgame-v0");
  baselines::Maiql m(env->spec(), small_cfg());
  Rng rng(4);
  m.init(rng);

  envs::BernoulliPolicy behavior(0.4, 0.7);
  const auto dataset = data::collect(*env, {&behavior}, 4, 5);
  Rng batch_rng(6);
  const auto batch = m.sample_batch(dataset, 4, batch_rng);
  REQUIRE(batch.size() == 4);

  Rng fd_rng(7);
  const auto check = [&](nn::ParameterSet& ps, auto builder) {
    const auto loss = [&](bool with_grad) {
      nn::Tape t;
      const nn::NodeId node = builder(t);
      if (with_grad) t.backward(node);
      return t.value(node);
    };
    const auto r = nn::finite_diff_check(ps, loss, fd_rng, 60);
    CHECK(r.max_rel_err <= 1e-4);
  };

  check(*m.q_nets()[0][0].ps, [&](nn::Tape& t) { return m.q_loss_node(t, batch); });
  check(m.q_mixer_params(), [&](nn::Tape& t) { return m.q_loss_node(t, batch); });
  check(*m.v_nets()[1].ps, [&](nn::Tape& t) { return m.v_loss_node(t, batch); });
  check(m.v_mixer_params(), [&](nn::Tape& t) { return m.v_loss_node(t, batch); });
  check(*m.policies().agents()[0].policy_ps,
        [&](nn::Tape& t) { return m.policy_loss_node(t, batch, nullptr); });
  check(*m.policies().agents()[1].memory_ps,
        [&](nn::Tape& t) { return m.policy_loss_node(t, batch, nullptr); });
}

TEST_CASE("sample_batch produces well-formed items") {
  auto env = envs::make_env("coordgame-v0");
  baselines::Maiql m(env->spec(), small_cfg());
  Rng rng(8);
  m.init(rng);
  envs::BernoulliPolicy behavior(0.5, 0.5);
  const auto dataset = data::collect(*env, {&behavior}, 5, 9);
  Rng batch_rng(10);
  const auto batch = m.sample_batch(dataset, 32, batch_rng);
  REQUIRE(batch.size() == 32);
  for (const auto& item : batch) {
    CHECK(item.state.size() == 5);
    CHECK(item.next_state.size() == 5);
    REQUIRE(item.histories.size() == 2);
    REQUIRE(item.next_histories.size() == 2);
    for (int i = 0; i < 2; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      CHECK(!item.histories[ui].empty());
      CHECK(item.histories[ui].size() <= 2);
      CHECK(item.next_histories[ui].size() <= 2);
      for (const auto& e : item.histories[ui]) CHECK(e.size() == 7);  // obs 5 + one-hot 2
    }
    CHECK(item.mask == 1.0);  // this environment only truncates
    CHECK((item.reward == 0.0 || item.reward == 1.0));
  }
}

TEST_CASE("a maiql training step runs polyak tracking last") {
  auto env = envs::make_env("coordgame-v0");
  baselines::MaiqlConfig cfg = small_cfg();
  cfg.tau = 0.05;
  baselines::Maiql m(env->spec(), cfg);
  Rng rng(11);
  m.init(rng);
  envs::BernoulliPolicy behavior(0.5, 0.5);
  const auto dataset = data::collect(*env, {&behavior}, 5, 12);

  const auto grab = [](const nn::ParameterSet& ps) {
    return Vec(ps.values().begin(), ps.values().end());
  };
  std::vector<Vec> targets_before;
  for (auto& per_agent : m.target_q_nets())
    for (auto& q : per_agent) targets_before.push_back(grab(*q.ps));
  targets_before.push_back(grab(m.target_q_mixer_params()));

  Rng step_rng(13);
  const auto report = m.train_step(dataset, step_rng);
  CHECK(std::isfinite(report.q_loss));
  CHECK(std::isfinite(report.v_loss));
  CHECK(std::isfinite(report.policy_loss));
  CHECK(report.q_loss > 0.0);

  std::vector<const nn::ParameterSet*> online, target;
  for (std::size_t i = 0; i < m.q_nets().size(); ++i)
    for (std::size_t k = 0; k < m.q_nets()[i].size(); ++k) {
      online.push_back(m.q_nets()[i][k].ps.get());
      target.push_back(m.target_q_nets()[i][k].ps.get());
    }
  online.push_back(&m.q_mixer_params());
  target.push_back(&m.target_q_mixer_params());

  for (std::size_t s = 0; s < online.size(); ++s) {
    const auto on = online[s]->values();
    const auto tg = target[s]->values();
    bool moved = false;
    for (std::size_t j = 0; j < on.size(); ++j) {
      const double expect = (1.0 - cfg.tau) * targets_before[s][j] + cfg.tau * on[j];
      CHECK(tg[j] == doctest::Approx(expect).epsilon(1e-12));
      moved = moved || tg[j] != targets_before[s][j];
    }
    CHECK(moved);  // the online step actually changed something to track
  }
}

TEST_CASE("centralizing a discrete dataset builds mixed-radix joint actions") {
  auto env = envs::make_env("coordgame-v0");
  envs::BernoulliPolicy behavior(0.5, 0.5);
  const auto dataset = data::collect(*env, {&behavior}, 4, 14);
  const auto central = baselines::centralize_dataset(dataset, env->spec());

  CHECK(central.meta.env_id == dataset.meta.env_id);
  CHECK(central.meta.n_agents == 1);
  CHECK(central.meta.obs_mode == "central");
  CHECK(central.meta.obs_dims == std::vector<int>{5});
  CHECK(central.meta.action_dims == std::vector<int>{1});
  REQUIRE(central.trajectories.size() == dataset.trajectories.size());

  for (std::size_t e = 0; e < dataset.trajectories.size(); ++e) {
    const auto& base = dataset.trajectories[e];
    const auto& cen = central.trajectories[e];
    CHECK(cen.states == base.states);
    CHECK(cen.rewards == base.rewards);
    CHECK(cen.done == base.done);
    CHECK(cen.policy_tag == base.policy_tag);
    REQUIRE(cen.actions.size() == base.actions.size());
    for (std::size_t t = 0; t < base.actions.size(); ++t) {
      const double a0 = base.actions[t][0][0];
      const double a1 = base.actions[t][1][0];
      REQUIRE(cen.actions[t].size() == 1);
      CHECK(cen.actions[t][0] == Vec{a0 * 2.0 + a1});  // last agent fastest
      CHECK(cen.obs[t] == std::vector<Vec>{base.states[t]});
    }
  }
}

TEST_CASE("centralizing a continuous dataset concatenates agent actions") {
  auto env = envs::make_env("reacher2-v0-fo");
  envs::ReacherExpertPolicy expert(1.0);
  const auto dataset = data::collect(*env, {&expert}, 2, 15);
  const auto central = baselines::centralize_dataset(dataset, env->spec());
  CHECK(central.meta.action_dims == std::vector<int>{2});
  for (std::size_t e = 0; e < dataset.trajectories.size(); ++e)
    for (std::size_t t = 0; t < dataset.trajectories[e].actions.size(); ++t) {
      const auto& joint = dataset.trajectories[e].actions[t];
      const Vec expect = {joint[0][0], joint[1][0]};
      CHECK(central.trajectories[e].actions[t][0] == expect);
    }
}

TEST_CASE("centralizing mixed action spaces is rejected") {
  auto env = envs::make_env("coordgame-v0");
  envs::BernoulliPolicy behavior(0.5, 0.5);
  const auto dataset = data::collect(*env, {&behavior}, 1, 16);
  envs::EnvSpec mixed = env->spec();
  mixed.action_spaces[1].discrete = false;
  mixed.action_spaces[1].dim = 1;
  CHECK_THROWS_AS(baselines::centralize_dataset(dataset, mixed), std::invalid_argument);
}

TEST_CASE("behavioral cloning reproduces a constant-action dataset") {
  auto env = envs::make_env("coordgame-v0");
  envs::BernoulliPolicy always_one(1.0, 1.0);
  const auto dataset = data::collect(*env, {&always_one}, 10, 17);

  mappo::ActorCritic policies(env->spec(), small_arch());
  Rng rng(18);
  policies.init(rng);

  // Critic parts must stay untouched by cloning.
  const auto grab = [](const nn::ParameterSet& ps) {
    return Vec(ps.values().begin(), ps.values().end());
  };
  const Vec value0 = grab(*policies.agents()[0].value_ps);
  const Vec value1 = grab(*policies.agents()[1].value_ps);
  const Vec mixer0 = grab(policies.mixer_params());

  baselines::IbcConfig cfg;
  cfg.lr = 3e-3;
  cfg.batch_size = 64;
  cfg.train_steps = 250;
  cfg.log_every = 100;
  std::vector<long long> log_steps;
  Rng train_rng(19);
  const auto report = baselines::ibc_train(dataset, policies, cfg, train_rng,
                                           [&](long long step, double) { log_steps.push_back(step); });
  CHECK(report.steps == 250);
  CHECK(report.final_loss < 0.05);
  CHECK(log_steps == std::vector<long long>{100, 200, 250});

  CHECK(grab(*policies.agents()[0].value_ps) == value0);
  CHECK(grab(*policies.agents()[1].value_ps) == value1);
  CHECK(grab(policies.mixer_params()) == mixer0);

  // Greedy play copies the behavior on arbitrary reachable histories.
  Rng eval_rng(20);
  Vec state = env->reset(eval_rng);
  std::vector<std::vector<Vec>> histories;
  const auto obs0 = env->observe(state);
  for (int i = 0; i < 2; ++i) {
    Vec e = obs0[static_cast<std::size_t>(i)];
    const Vec slot = envs::zero_action_slot(env->spec().action_spaces[static_cast<std::size_t>(i)]);
    e.insert(e.end(), slot.begin(), slot.end());
    histories.push_back({e});
  }
  for (int t = 0; t < 5; ++t) {
    const auto acts = policies.greedy_actions(histories);
    CHECK(acts[0] == Vec{1.0});
    CHECK(acts[1] == Vec{1.0});
    const auto r = env->step(state, t, acts);
    state = r.state;
    const auto obs = env->observe(state);
    for (int i = 0; i < 2; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      Vec e = obs[ui];
      const Vec slot = envs::encode_action_slot(env->spec().action_spaces[ui], acts[ui]);
      e.insert(e.end(), slot.begin(), slot.end());
      histories[ui].push_back(std::move(e));
      if (histories[ui].size() > 2) histories[ui].erase(histories[ui].begin());
    }
  }
}

TEST_CASE("maiql config validation") {
  auto env = envs::make_env("coordgame-v0");
  auto bad = [&](auto mutate) {
    baselines::MaiqlConfig cfg = small_cfg();
    mutate(cfg);
    CHECK_THROWS_AS(baselines::Maiql(env->spec(), cfg), std::invalid_argument);
  };
  bad([](baselines::MaiqlConfig& c) { c.expectile = 0.0; });
  bad([](baselines::MaiqlConfig& c) { c.expectile = 1.0; });
  bad([](baselines::MaiqlConfig& c) { c.tau = -0.1; });
  bad([](baselines::MaiqlConfig& c) { c.weight_clamp = 0.0; });
  bad([](baselines::MaiqlConfig& c) { c.lr = 0.0; });
  bad([](baselines::MaiqlConfig& c) { c.batch_size = 0; });
}
