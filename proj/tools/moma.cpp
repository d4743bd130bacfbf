#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moma/data/io.hpp"
#include "moma/harness/config.hpp"
#include "moma/harness/experiment.hpp"

namespace {

moma::harness::Config assemble_config(const std::string& config_path,
                                      const std::vector<std::string>& overrides) {
  moma::harness::Config cfg;
  if (!config_path.empty()) cfg = moma::harness::Config::from_file(config_path);
  cfg.merge(moma::harness::Config::from_pairs(overrides));
  moma::harness::apply_env_overrides(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moma: offline multi-agent RL laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> summaries;
  std::string report_out;

  auto add_config_args = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("overrides", overrides, "key=value overrides (win over the file)");
  };

  CLI::App* gen = app.add_subcommand(
      "gen-data", "Collect a scripted-policy dataset (env, policy, episodes, seed, out)");
  add_config_args(gen);
  CLI::App* wm = app.add_subcommand(
      "train-wm", "Train the dynamics ensemble on a dataset (dataset, out, seed, wm_*)");
  add_config_args(wm);
  CLI::App* train = app.add_subcommand(
      "train", "Train a policy on an offline dataset (algo, dataset, seed, out, ...)");
  add_config_args(train);
  CLI::App* ev = app.add_subcommand(
      "eval", "Re-evaluate a policy checkpoint (policy, episodes, seed[, dataset])");
  add_config_args(ev);
  CLI::App* rep = app.add_subcommand("report", "Aggregate run summaries into a score table");
  rep->add_option("summaries", summaries, "summary.json files")->required();
  rep->add_option("--out", report_out, "also write the table to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto cfg = assemble_config(config_path, overrides);
      moma::harness::generate_dataset(cfg);
      std::printf("wrote %s\n", cfg.str("out").c_str());
    } else if (wm->parsed()) {
      const auto cfg = assemble_config(config_path, overrides);
      moma::harness::train_world_model(cfg);
      std::printf("wrote %s\n", cfg.str("out").c_str());
    } else if (train->parsed()) {
      const auto cfg = assemble_config(config_path, overrides);
      const moma::harness::RunSummary s = moma::harness::run_experiment(cfg);
      std::printf("%s on %s seed %llu: return %.6f +/- %.6f, normalized %.6f (step %lld)\n",
                  s.algorithm.c_str(), s.dataset.c_str(),
                  static_cast<unsigned long long>(s.seed), s.final_eval.mean_return,
                  s.final_eval.sem, s.final_eval.normalized, s.final_step);
      std::printf("artifacts in %s\n", s.out_dir.c_str());
    } else if (ev->parsed()) {
      const auto cfg = assemble_config(config_path, overrides);
      const moma::harness::EvalResult r = moma::harness::evaluate_checkpoint(cfg);
      std::printf("return %.6f +/- %.6f, normalized %.6f over %zu episodes\n", r.mean_return,
                  r.sem, r.normalized, r.episode_scores.size());
    } else if (rep->parsed()) {
      const std::string table = moma::harness::make_report(summaries);
      std::fputs(table.c_str(), stdout);
      if (!report_out.empty()) {
        std::ofstream out(report_out);
        if (!out) throw moma::harness::ExperimentError("cannot write report: " + report_out);
        out << table;
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
