#include "moma/harness/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include <json.hpp>

#include "moma/baselines/ibc.hpp"
#include "moma/baselines/maiql.hpp"
#include "moma/data/collect.hpp"
#include "moma/data/io.hpp"
#include "moma/envs/registry.hpp"
#include "moma/envs/scripted.hpp"
#include "moma/harness/metrics.hpp"
#include "moma/mappo/actor_critic.hpp"
#include "moma/mappo/ppo.hpp"
#include "moma/rollout/rollout.hpp"
#include "moma/wm/checkpoint.hpp"
#include "moma/wm/ensemble.hpp"

namespace moma::harness {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void validate_keys(const Config& cfg, const std::set<std::string>& allowed,
                   const std::string& subcommand) {
  for (const auto& [k, v] : cfg.entries()) {
    if (!allowed.count(k)) {
      throw ExperimentError("unknown " + subcommand + " config key: " + k);
    }
  }
}

const std::set<std::string> kGenDataKeys = {"env",  "policy", "episodes",
                                            "seed", "out",    "normalizer_episodes"};

const std::set<std::string> kTrainWmKeys = {
    "dataset",       "out",           "seed",          "val_fraction",   "wm_hidden",
    "wm_members",    "wm_elites",     "wm_lr",         "wm_batch_size",  "wm_train_steps",
    "wm_grad_clip",  "wm_project_onehot", "leps_multiplier", "leps_percentile",
    "wm_max_attempts"};

const std::set<std::string> kTrainKeys = {
    // run plumbing
    "algo", "dataset", "seed", "out", "train_steps", "eval_every", "eval_episodes",
    // shared architecture
    "window", "embed_dim", "policy_hidden", "value_hidden", "mixer_hidden",
    // model-based rollouts
    "wm", "gt", "k", "rollout_batch", "lambda_r", "lambda_g", "l_eps",
    // on-policy optimization
    "clip", "gae_lambda", "gamma", "epochs", "transitions_per_update", "minibatch", "lr",
    "memory_lr", "critic_coef", "entropy_coef", "entropy_target", "action_penalty_coef",
    "grad_clip",
    // offline baselines
    "batch_size", "q_hidden", "expectile", "beta", "tau", "weight_clamp", "twin_q"};

const std::set<std::string> kEvalKeys = {"policy", "dataset", "episodes", "seed"};

void ensure_parent_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

bool all_discrete(const envs::EnvSpec& spec) {
  for (const auto& sp : spec.action_spaces) {
    if (!sp.discrete) return false;
  }
  return true;
}

bool is_reacher(const std::string& env_id) { return env_id.rfind("reacher2", 0) == 0; }

mappo::ActorCriticConfig arch_from(const Config& cfg) {
  mappo::ActorCriticConfig a;
  a.window = static_cast<int>(cfg.integer("window", a.window));
  a.embed_dim = static_cast<int>(cfg.integer("embed_dim", a.embed_dim));
  a.policy_hidden = cfg.int_list("policy_hidden", a.policy_hidden);
  a.value_hidden = cfg.int_list("value_hidden", a.value_hidden);
  a.mixer_hidden = cfg.int_list("mixer_hidden", a.mixer_hidden);
  return a;
}

void write_summary_json(const RunSummary& s, long long eval_episodes, long long train_steps) {
  ordered_json j;
  j["format_version"] = 1;
  j["algorithm"] = s.algorithm;
  j["env_id"] = s.env_id;
  j["centralized"] = s.centralized;
  j["dataset"] = s.dataset;
  j["seed"] = s.seed;
  j["train_steps"] = train_steps;
  j["eval_episodes"] = eval_episodes;
  j["final_step"] = s.final_step;
  j["final"] = ordered_json{{"mean_return", s.final_eval.mean_return},
                            {"sem", s.final_eval.sem},
                            {"normalized", s.final_eval.normalized}};
  j["config_hash"] = s.config_hash;
  j["group_hash"] = s.group_hash;
  j["metrics"] = "metrics.csv";
  j["policy"] = "policy.ckpt";

  const std::string path = s.out_dir + "/summary.json";
  std::ofstream out(path);
  if (!out) throw ExperimentError("cannot write summary: " + path);
  out << j.dump(2) << "\n";
}

struct RolloutStats {
  double mean_length = 0.0;
  double trunc_frac = 0.0;  // branches cut by the uncertainty threshold
  double mean_eps_g = 0.0;
};

RolloutStats rollout_stats(const rollout::RolloutBuffer& buffer) {
  RolloutStats st;
  if (buffer.rollouts.empty()) return st;
  long long steps = 0, cut = 0;
  double eps_sum = 0.0;
  for (const auto& branch : buffer.rollouts) {
    steps += static_cast<long long>(branch.size());
    for (const auto& tr : branch) eps_sum += tr.eps_g;
    if (!branch.empty() && branch.back().eps_g >= buffer.config.l_eps) ++cut;
  }
  st.mean_length = static_cast<double>(steps) / static_cast<double>(buffer.rollouts.size());
  st.trunc_frac = static_cast<double>(cut) / static_cast<double>(buffer.rollouts.size());
  st.mean_eps_g = steps > 0 ? eps_sum / static_cast<double>(steps) : 0.0;
  return st;
}

}  // namespace

void generate_dataset(const Config& cfg) {
  validate_keys(cfg, kGenDataKeys, "gen-data");
  const std::string env_id = cfg.str("env");
  const std::string policy = cfg.str("policy");
  const int episodes = static_cast<int>(cfg.integer("episodes"));
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out = cfg.str("out");

  auto env = envs::make_env(env_id);
  const envs::EnvSpec& spec = env->spec();

  std::vector<std::unique_ptr<envs::ScriptedPolicy>> owned;
  if (policy.rfind("bernoulli:", 0) == 0) {
    if (env_id.rfind("coordgame", 0) != 0) {
      throw ExperimentError("policy 'bernoulli:' needs a coordination-game environment");
    }
    const std::string args = policy.substr(std::string("bernoulli:").size());
    const auto comma = args.find(',');
    if (comma == std::string::npos) {
      throw ExperimentError("policy 'bernoulli:' needs two comma-separated probabilities");
    }
    double p1 = 0.0, p2 = 0.0;
    try {
      p1 = std::stod(args.substr(0, comma));
      p2 = std::stod(args.substr(comma + 1));
    } catch (const std::exception&) {
      throw ExperimentError("policy 'bernoulli:' has malformed probabilities: " + args);
    }
    owned.push_back(std::make_unique<envs::BernoulliPolicy>(p1, p2));
  } else if (policy == "mixture") {
    if (!is_reacher(env_id)) throw ExperimentError("policy 'mixture' needs a reacher environment");
    owned.push_back(std::make_unique<envs::ReacherExpertPolicy>(+1));
    owned.push_back(std::make_unique<envs::ReacherExpertPolicy>(-1));
  } else if (policy == "expert:ccw" || policy == "expert:cw") {
    if (!is_reacher(env_id)) throw ExperimentError("policy 'expert:' needs a reacher environment");
    owned.push_back(std::make_unique<envs::ReacherExpertPolicy>(policy == "expert:ccw" ? +1 : -1));
  } else if (policy == "random") {
    owned.push_back(std::make_unique<envs::UniformRandomPolicy>(spec));
  } else {
    throw ExperimentError("unknown policy spec: " + policy);
  }
  std::vector<const envs::ScriptedPolicy*> ptrs;
  for (const auto& p : owned) ptrs.push_back(p.get());

  data::OfflineDataset d = data::collect(*env, ptrs, episodes, seed);

  if (is_reacher(env_id)) {
    const int n = static_cast<int>(cfg.integer("normalizer_episodes", 100));
    Rng master(seed);
    Rng expert_rng = master.fork("norm-expert");
    Rng random_rng = master.fork("norm-random");
    const envs::ReacherExpertPolicy expert(+1);
    const envs::UniformRandomPolicy random(spec);
    d.meta.expert_score = data::mean_score(*env, expert, n, expert_rng);
    d.meta.random_score = data::mean_score(*env, random, n, random_rng);
  } else {
    // Coordination game: perfect agreement scores 1 per step, uniform play
    // matches half the time.
    d.meta.expert_score = 1.0;
    d.meta.random_score = 0.5;
  }

  ensure_parent_dir(out);
  data::save(d, out);
}

void train_world_model(const Config& cfg) {
  validate_keys(cfg, kTrainWmKeys, "train-wm");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out = cfg.str("out");

  data::OfflineDataset d = data::load(cfg.str("dataset"));
  auto env = envs::make_env(d.meta.env_id);
  const data::DatasetStats stats = data::compute_stats(d);

  wm::WorldModelConfig wcfg;
  wcfg.n_members = static_cast<int>(cfg.integer("wm_members", wcfg.n_members));
  wcfg.n_elites = static_cast<int>(cfg.integer("wm_elites", wcfg.n_elites));
  wcfg.hidden = cfg.int_list("wm_hidden", wcfg.hidden);
  wcfg.lr = cfg.real("wm_lr", wcfg.lr);
  wcfg.batch_size = static_cast<int>(cfg.integer("wm_batch_size", wcfg.batch_size));
  wcfg.train_steps = cfg.integer("wm_train_steps", wcfg.train_steps);
  wcfg.grad_clip = cfg.real("wm_grad_clip", wcfg.grad_clip);
  wcfg.project_onehot = cfg.boolean("wm_project_onehot", wcfg.project_onehot);
  wcfg.leps_multiplier = cfg.real("leps_multiplier", wcfg.leps_multiplier);
  wcfg.leps_percentile = cfg.real("leps_percentile", wcfg.leps_percentile);
  wcfg.max_train_attempts = static_cast<int>(cfg.integer("wm_max_attempts", wcfg.max_train_attempts));

  Rng master(seed);
  Rng split_rng = master.fork("split");
  auto [train, val] = data::split(d, cfg.real("val_fraction", 0.1), split_rng);

  Rng train_rng = master.fork("wm");
  wm::WorldModelEnsemble ensemble =
      wm::train_ensemble(train, val, env->spec(), stats, wcfg, train_rng);

  ensure_parent_dir(out);
  wm::save_ensemble(ensemble, out);
}

RunSummary run_experiment(const Config& cfg) {
  validate_keys(cfg, kTrainKeys, "train");
  const std::string algo = cfg.str("algo");
  if (algo != "moma-ppo" && algo != "ibc" && algo != "maiql" && algo != "iql-central") {
    throw ExperimentError("unknown algorithm: " + algo);
  }
  const std::string dataset_path = cfg.str("dataset");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const std::string out_dir = cfg.str("out");
  fs::create_directories(out_dir);

  data::OfflineDataset dataset = data::load(dataset_path);
  const std::string base_env_id = dataset.meta.env_id;

  std::unique_ptr<envs::Env> env;
  if (algo == "iql-central") {
    env = std::make_unique<envs::CentralizedAdapter>(envs::make_env(base_env_id));
    dataset = baselines::centralize_dataset(dataset, envs::make_env(base_env_id)->spec());
  } else {
    env = envs::make_env(base_env_id);
  }
  const envs::EnvSpec& spec = env->spec();

  const mappo::ActorCriticConfig arch = arch_from(cfg);
  const long long default_steps =
      algo == "moma-ppo" ? (is_reacher(base_env_id) ? 20000 : 5000)
                         : (algo == "ibc" ? baselines::IbcConfig{}.train_steps
                                          : baselines::MaiqlConfig{}.train_steps);
  const long long train_steps = cfg.integer("train_steps", default_steps);
  const long long eval_every = cfg.integer("eval_every", algo == "moma-ppo" ? 50 : 5000);
  const long long eval_episodes = cfg.integer("eval_episodes", 100);
  if (train_steps < 1) throw ExperimentError("train_steps must be >= 1");
  if (eval_every < 1) throw ExperimentError("eval_every must be >= 1");

  EvalOptions eopts;
  eopts.n_episodes = static_cast<int>(eval_episodes);
  eopts.window = arch.window;
  eopts.expert_score = dataset.meta.expert_score;
  eopts.random_score = dataset.meta.random_score;

  Rng master(seed);
  Rng init_rng = master.fork("init");
  Rng train_rng = master.fork("train");
  Rng eval_master = master.fork("eval");

  RunSummary summary;
  summary.algorithm = algo;
  summary.env_id = base_env_id;
  summary.centralized = algo == "iql-central";
  summary.dataset = dataset_path;
  summary.seed = seed;
  summary.config_hash = cfg.hash();
  summary.group_hash = cfg.hash({"seed", "out"});
  summary.out_dir = out_dir;

  const std::string metrics_path = out_dir + "/metrics.csv";
  const std::string policy_path = out_dir + "/policy.ckpt";

  if (algo == "moma-ppo") {
    mappo::ActorCritic ac(spec, arch);
    ac.init(init_rng);

    mappo::PpoConfig pcfg;
    pcfg.clip = cfg.real("clip", pcfg.clip);
    pcfg.gae_lambda = cfg.real("gae_lambda", pcfg.gae_lambda);
    pcfg.gamma = cfg.real("gamma", pcfg.gamma);
    pcfg.epochs = static_cast<int>(cfg.integer("epochs", pcfg.epochs));
    pcfg.transitions_per_update =
        static_cast<int>(cfg.integer("transitions_per_update", pcfg.transitions_per_update));
    pcfg.minibatch = static_cast<int>(cfg.integer("minibatch", pcfg.minibatch));
    pcfg.lr = cfg.real("lr", pcfg.lr);
    pcfg.memory_lr = cfg.real("memory_lr", pcfg.memory_lr);
    pcfg.critic_coef = cfg.real("critic_coef", pcfg.critic_coef);
    pcfg.entropy_coef = cfg.real("entropy_coef", pcfg.entropy_coef);
    // Discrete-action entropy lives on a much smaller scale than the
    // continuous default target.
    pcfg.entropy_target = cfg.real("entropy_target", all_discrete(spec) ? 0.3 : -4.0);
    pcfg.action_penalty_coef = cfg.real("action_penalty_coef", pcfg.action_penalty_coef);
    pcfg.grad_clip = cfg.real("grad_clip", pcfg.grad_clip);
    mappo::PpoTrainer trainer(ac, pcfg);

    const bool gt = cfg.boolean("gt", false);
    std::unique_ptr<wm::WorldModelEnsemble> ensemble;
    std::unique_ptr<rollout::ModelInterface> model;
    double l_eps = 0.0;
    if (gt) {
      model = std::make_unique<rollout::GroundTruthModel>(*env);
      // Uncertainties are exactly zero here; any positive threshold is inert.
      l_eps = cfg.real("l_eps", 1.0);
    } else {
      if (!cfg.has("wm")) throw ExperimentError("moma-ppo needs wm=<ensemble checkpoint> (or gt=true)");
      ensemble = std::make_unique<wm::WorldModelEnsemble>(wm::load_ensemble(cfg.str("wm")));
      if (ensemble->env_spec().state_dim != spec.state_dim) {
        throw ExperimentError("world model state dim " +
                              std::to_string(ensemble->env_spec().state_dim) +
                              " does not match environment state dim " +
                              std::to_string(spec.state_dim));
      }
      int slot_dim = 0;
      for (const auto& sp : spec.action_spaces) slot_dim += envs::action_slot_dim(sp);
      if (!ensemble->members().empty() && ensemble->members().front().action_dim() != slot_dim) {
        throw ExperimentError("world model action dim does not match the environment");
      }
      model = std::make_unique<rollout::EnsembleModel>(*ensemble, *env);
      l_eps = cfg.real("l_eps", ensemble->l_eps());
    }

    rollout::RolloutConfig rcfg;
    rcfg.k = static_cast<int>(cfg.integer("k", rcfg.k));
    rcfg.batch = static_cast<int>(
        cfg.integer("rollout_batch", (pcfg.transitions_per_update + rcfg.k - 1) / rcfg.k));
    rcfg.lambda_r = cfg.real("lambda_r", rcfg.lambda_r);
    rcfg.lambda_g = cfg.real("lambda_g", rcfg.lambda_g);
    rcfg.l_eps = l_eps;
    rcfg.window = arch.window;

    MetricsLog log(metrics_path,
                   {"eval_return", "eval_sem", "normalized_score", "actor_loss", "critic_loss",
                    "entropy", "action_penalty", "alpha", "rollout_mean_length",
                    "rollout_trunc_frac", "rollout_mean_eps_g"});
    const GreedyPolicyFn greedy = [&ac](const std::vector<std::vector<Vec>>& h) {
      return ac.greedy_actions(h);
    };

    {
      Rng eval_rng = eval_master.fork("0");
      const EvalTrace ev = evaluate(*env, greedy, eopts, eval_rng);
      log.append(0, {ev.result.mean_return, ev.result.sem, ev.result.normalized, 0.0, 0.0, 0.0,
                     0.0, 0.0, 0.0, 0.0, 0.0});
    }

    EvalResult final_eval;
    for (long long u = 1; u <= train_steps; ++u) {
      rollout::RolloutBuffer buffer =
          rollout::generate_rollouts(dataset, ac, ac, *model, rcfg, train_rng);
      const mappo::PpoReport report = trainer.update(buffer, train_rng);
      if (report.aborted) {
        throw NumericError("optimization update " + std::to_string(u) +
                           " hit a non-finite loss; aborting (metrics up to the previous "
                           "evaluation are on disk)");
      }
      if (u % eval_every == 0 || u == train_steps) {
        Rng eval_rng = eval_master.fork(std::to_string(u));
        const EvalTrace ev = evaluate(*env, greedy, eopts, eval_rng);
        const RolloutStats st = rollout_stats(buffer);
        log.append(u, {ev.result.mean_return, ev.result.sem, ev.result.normalized,
                       report.actor_loss, report.critic_loss, report.entropy,
                       report.action_penalty, report.alpha, st.mean_length, st.trunc_frac,
                       st.mean_eps_g});
        final_eval = ev.result;
      }
    }
    summary.final_step = train_steps;
    summary.final_eval = final_eval;
    mappo::save_policy(ac, algo, summary.config_hash, policy_path);
  } else if (algo == "ibc") {
    mappo::ActorCritic ac(spec, arch);
    ac.init(init_rng);

    baselines::IbcConfig icfg;
    icfg.lr = cfg.real("lr", icfg.lr);
    icfg.batch_size = static_cast<int>(cfg.integer("batch_size", icfg.batch_size));
    icfg.train_steps = train_steps;
    icfg.grad_clip = cfg.real("grad_clip", icfg.grad_clip);
    icfg.log_every = eval_every;

    MetricsLog log(metrics_path, {"eval_return", "eval_sem", "normalized_score", "bc_loss"});
    const GreedyPolicyFn greedy = [&ac](const std::vector<std::vector<Vec>>& h) {
      return ac.greedy_actions(h);
    };

    {
      Rng eval_rng = eval_master.fork("0");
      const EvalTrace ev = evaluate(*env, greedy, eopts, eval_rng);
      log.append(0, {ev.result.mean_return, ev.result.sem, ev.result.normalized, 0.0});
    }

    EvalResult final_eval;
    long long final_step = 0;
    baselines::ibc_train(dataset, ac, icfg, train_rng,
                         [&](long long step, double loss) {
                           Rng eval_rng = eval_master.fork(std::to_string(step));
                           const EvalTrace ev = evaluate(*env, greedy, eopts, eval_rng);
                           log.append(step, {ev.result.mean_return, ev.result.sem,
                                             ev.result.normalized, loss});
                           final_eval = ev.result;
                           final_step = step;
                         });
    summary.final_step = final_step;
    summary.final_eval = final_eval;
    mappo::save_policy(ac, algo, summary.config_hash, policy_path);
  } else {  // maiql | iql-central
    baselines::MaiqlConfig mcfg;
    mcfg.arch = arch;
    mcfg.q_hidden = cfg.int_list("q_hidden", mcfg.q_hidden);
    mcfg.gamma = cfg.real("gamma", mcfg.gamma);
    mcfg.expectile = cfg.real("expectile", mcfg.expectile);
    mcfg.beta = cfg.real("beta", mcfg.beta);
    mcfg.tau = cfg.real("tau", mcfg.tau);
    mcfg.lr = cfg.real("lr", mcfg.lr);
    mcfg.batch_size = static_cast<int>(cfg.integer("batch_size", mcfg.batch_size));
    mcfg.train_steps = train_steps;
    mcfg.weight_clamp = cfg.real("weight_clamp", mcfg.weight_clamp);
    mcfg.grad_clip = cfg.real("grad_clip", mcfg.grad_clip);
    mcfg.twin_q = cfg.boolean("twin_q", mcfg.twin_q);
    mcfg.log_every = eval_every;

    baselines::Maiql agent(spec, mcfg);
    agent.init(init_rng);

    MetricsLog log(metrics_path, {"eval_return", "eval_sem", "normalized_score", "q_loss",
                                  "v_loss", "policy_loss", "clamped_weights"});
    const GreedyPolicyFn greedy = [&agent](const std::vector<std::vector<Vec>>& h) {
      return agent.policies().greedy_actions(h);
    };

    {
      Rng eval_rng = eval_master.fork("0");
      const EvalTrace ev = evaluate(*env, greedy, eopts, eval_rng);
      log.append(0, {ev.result.mean_return, ev.result.sem, ev.result.normalized, 0.0, 0.0, 0.0,
                     0.0});
    }

    EvalResult final_eval;
    for (long long s = 1; s <= train_steps; ++s) {
      const baselines::MaiqlStepReport rep = agent.train_step(dataset, train_rng);
      if (s % eval_every == 0 || s == train_steps) {
        Rng eval_rng = eval_master.fork(std::to_string(s));
        const EvalTrace ev = evaluate(*env, greedy, eopts, eval_rng);
        log.append(s, {ev.result.mean_return, ev.result.sem, ev.result.normalized, rep.q_loss,
                       rep.v_loss, rep.policy_loss,
                       static_cast<double>(rep.clamped_weights)});
        final_eval = ev.result;
      }
    }
    summary.final_step = train_steps;
    summary.final_eval = final_eval;
    mappo::save_policy(agent.policies(), algo, summary.config_hash, policy_path);
  }

  write_summary_json(summary, eval_episodes, train_steps);
  return summary;
}

EvalResult evaluate_checkpoint(const Config& cfg) {
  validate_keys(cfg, kEvalKeys, "eval");
  mappo::LoadedPolicy loaded = mappo::load_policy(cfg.str("policy"));
  const envs::EnvSpec& spec = loaded.actor_critic->spec();

  std::unique_ptr<envs::Env> env;
  const std::string suffix = "-central";
  if (spec.id.size() > suffix.size() &&
      spec.id.compare(spec.id.size() - suffix.size(), suffix.size(), suffix) == 0) {
    env = std::make_unique<envs::CentralizedAdapter>(
        envs::make_env(spec.id.substr(0, spec.id.size() - suffix.size())));
  } else {
    env = envs::make_env(spec.id);
  }

  EvalOptions eopts;
  eopts.n_episodes = static_cast<int>(cfg.integer("episodes", 100));
  eopts.window = loaded.actor_critic->config().window;
  if (cfg.has("dataset")) {
    const data::OfflineDataset d = data::load(cfg.str("dataset"));
    eopts.expert_score = d.meta.expert_score;
    eopts.random_score = d.meta.random_score;
  }

  Rng master(static_cast<std::uint64_t>(cfg.integer("seed", 0)));
  Rng eval_rng = master.fork("eval");
  mappo::ActorCritic& ac = *loaded.actor_critic;
  const GreedyPolicyFn greedy = [&ac](const std::vector<std::vector<Vec>>& h) {
    return ac.greedy_actions(h);
  };
  return evaluate(*env, greedy, eopts, eval_rng).result;
}

}  // namespace moma::harness
