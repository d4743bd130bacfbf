#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "moma/harness/config.hpp"
#include "moma/harness/evaluate.hpp"

namespace moma::harness {

struct ExperimentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// `gen-data`: collects a scripted-policy dataset and writes it to `out`.
/// Keys: env, policy (bernoulli:p1,p2 | mixture | expert:ccw | expert:cw |
/// random), episodes, seed, out, normalizer_episodes.
void generate_dataset(const Config& cfg);

/// `train-wm`: trains the dynamics ensemble on `dataset`, calibrates the
/// uncertainty cut-off on the validation split, writes the checkpoint to
/// `out`. Keys: dataset, out, seed, val_fraction, wm_* hyperparameters.
void train_world_model(const Config& cfg);

struct RunSummary {
  std::string algorithm;
  std::string env_id;   // underlying environment (the centralized variant
  bool centralized = false;  // trains on the "team agent" reframing)
  std::string dataset;
  std::uint64_t seed = 0;
  long long final_step = 0;
  EvalResult final_eval;
  std::string config_hash;  // all keys
  std::string group_hash;   // all keys except seed/out (multi-seed grouping)
  std::string out_dir;
};

/// `train`: runs one algorithm (moma-ppo | ibc | maiql | iql-central) on an
/// offline dataset; writes metrics.csv, policy.ckpt and summary.json into
/// the `out` directory. Training errors abort the run but leave the metrics
/// rows written so far on disk.
RunSummary run_experiment(const Config& cfg);

/// `eval`: reloads a policy checkpoint and re-runs the greedy evaluation
/// (normalizers come from `dataset` when given).
EvalResult evaluate_checkpoint(const Config& cfg);

/// `report`: aggregates summary.json files into mean +/- SEM rows per
/// (dataset, algorithm). Runs grouped together must share a group hash;
/// single-seed groups are flagged since their SEM is 0 by convention.
std::string make_report(const std::vector<std::string>& summary_paths);

}  // namespace moma::harness
