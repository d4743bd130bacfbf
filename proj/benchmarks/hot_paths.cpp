// Microbenchmarks for the training hot paths: tape forward/backward, the
// attention memory, ensemble model steps and advantage estimation.

#include <benchmark/benchmark.h>

#include <vector>

#include "moma/envs/registry.hpp"
#include "moma/mappo/gae.hpp"
#include "moma/nn/attention.hpp"
#include "moma/nn/layers.hpp"
#include "moma/nn/tape.hpp"
#include "moma/wm/ensemble.hpp"

namespace {

using namespace moma;

void BM_MlpForwardBackward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  nn::ParameterSet ps;
  nn::Mlp mlp(ps, "mlp", nn::MlpSpec{width, 1, {width, width}});
  Rng rng(7);
  mlp.init(rng);
  Vec x(static_cast<std::size_t>(width), 0.1);

  nn::Tape tape;
  for (auto _ : state) {
    tape.reset();
    const nn::NodeId out = mlp.forward(tape, tape.constant(x));
    ps.zero_grad();
    tape.backward(out);
    benchmark::DoNotOptimize(tape.value(out));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(256);

void BM_AttentionEncode(benchmark::State& state) {
  const int entries = static_cast<int>(state.range(0));
  nn::ParameterSet ps;
  nn::AttentionMemory mem(ps, "mem", nn::AttentionMemorySpec{8, 4, 10, 64});
  Rng rng(7);
  mem.init(rng);

  std::vector<Vec> history;
  for (int i = 0; i < entries; ++i) history.push_back(Vec(12, 0.05 * (i + 1)));

  nn::Tape tape;
  for (auto _ : state) {
    tape.reset();
    const nn::NodeId h = mem.encode(tape, history);
    benchmark::DoNotOptimize(tape.values(h).front());
  }
}
BENCHMARK(BM_AttentionEncode)->Arg(1)->Arg(10);

void BM_EnsembleModelStep(benchmark::State& state) {
  auto env = envs::make_env("reacher2-v0-fo");
  const envs::EnvSpec& spec = env->spec();
  int action_dim = 0;
  for (const auto& sp : spec.action_spaces) action_dim += envs::action_slot_dim(sp);

  wm::WorldModelConfig cfg;
  cfg.n_members = 7;
  cfg.n_elites = 5;
  cfg.hidden = {64, 64};
  std::vector<wm::EnsembleMember> members;
  Rng rng(3);
  for (int m = 0; m < cfg.n_members; ++m) {
    members.emplace_back(spec.state_dim, action_dim, cfg.hidden);
    members.back().init(rng);
  }
  data::DatasetStats stats;
  stats.state_min = Vec(static_cast<std::size_t>(spec.state_dim), -5.0);
  stats.state_max = Vec(static_cast<std::size_t>(spec.state_dim), 5.0);
  stats.reward_min = -1.0;
  stats.reward_max = 0.0;
  wm::WorldModelEnsemble ensemble(spec, cfg, std::move(members), {0, 1, 2, 3, 4}, stats);
  ensemble.set_leps(1e9);

  const Vec s = env->reset(rng);
  const envs::JointAction a = {Vec{0.3}, Vec{-0.2}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ensemble.step(s, a, rng));
  }
}
BENCHMARK(BM_EnsembleModelStep);

void BM_GaeWithTimeouts(benchmark::State& state) {
  const std::size_t n = 2048;
  Rng rng(11);
  Vec rewards(n), values(n), next_values(n), masks(n, 1.0), timeouts(n);
  for (std::size_t i = 0; i < n; ++i) {
    rewards[i] = rng.uniform(-1.0, 1.0);
    values[i] = rng.uniform(-1.0, 1.0);
    next_values[i] = rng.uniform(-1.0, 1.0);
    timeouts[i] = rng.bernoulli(0.9) ? 1.0 : 0.0;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mappo::gae_with_timeouts(rewards, values, next_values, masks, timeouts, 0.99, 0.98));
  }
}
BENCHMARK(BM_GaeWithTimeouts);

}  // namespace

BENCHMARK_MAIN();
