#include "moma/mappo/actor_critic.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "moma/data/io.hpp"

namespace moma::mappo {

ActorCritic::ActorCritic(envs::EnvSpec spec, ActorCriticConfig cfg)
    : spec_(std::move(spec)), cfg_(std::move(cfg)), mixer_ps_(std::make_unique<nn::ParameterSet>()) {
  if (spec_.n_agents < 1) throw std::invalid_argument("ActorCritic: need at least one agent");
  if (cfg_.window < 1) throw std::invalid_argument("ActorCritic: window must be >= 1");
  agents_.reserve(static_cast<std::size_t>(spec_.n_agents));
  for (int i = 0; i < spec_.n_agents; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const envs::ActionSpace& sp = spec_.action_spaces[ui];
    Agent ag;
    ag.memory_ps = std::make_unique<nn::ParameterSet>();
    ag.policy_ps = std::make_unique<nn::ParameterSet>();
    ag.value_ps = std::make_unique<nn::ParameterSet>();
    ag.discrete = sp.discrete;

    nn::AttentionMemorySpec mspec;
    mspec.obs_dim = spec_.obs_dims[ui];
    mspec.action_dim = envs::action_slot_dim(sp);
    mspec.window = cfg_.window;
    mspec.embed_dim = cfg_.embed_dim;
    ag.memory = nn::AttentionMemory(*ag.memory_ps, "memory", mspec);

    int feature_dim = cfg_.embed_dim;
    ag.has_trunk = !cfg_.policy_hidden.empty();
    if (ag.has_trunk) {
      nn::MlpSpec tspec;
      tspec.input_dim = cfg_.embed_dim;
      tspec.output_dim = cfg_.policy_hidden.back();
      tspec.hidden.assign(cfg_.policy_hidden.begin(), cfg_.policy_hidden.end() - 1);
      ag.trunk = nn::Mlp(*ag.policy_ps, "trunk", tspec);
      feature_dim = tspec.output_dim;
    }
    if (sp.discrete) {
      ag.categorical = nn::CategoricalHead(*ag.policy_ps, "head", feature_dim, sp.n);
    } else {
      ag.gaussian = nn::GaussianHead(*ag.policy_ps, "head", feature_dim, sp.dim);
    }

    nn::MlpSpec vspec;
    vspec.input_dim = cfg_.embed_dim;
    vspec.output_dim = 1;
    vspec.hidden = cfg_.value_hidden;
    ag.value_head = nn::Mlp(*ag.value_ps, "v", vspec);

    agents_.push_back(std::move(ag));
  }

  nn::MlpSpec mspec;
  mspec.input_dim = spec_.state_dim;
  mspec.output_dim = spec_.n_agents + 1;  // weights per agent plus the bias
  mspec.hidden = cfg_.mixer_hidden;
  mixer_ = nn::Mlp(*mixer_ps_, "mixer", mspec);
}

void ActorCritic::init(Rng& rng) {
  for (auto& ag : agents_) {
    ag.memory.init(rng);
    if (ag.has_trunk) ag.trunk.init(rng);
    if (ag.discrete) {
      ag.categorical.init(rng);
    } else {
      ag.gaussian.init(rng);
    }
    ag.value_head.init(rng);
  }
  mixer_.init(rng);
}

nn::NodeId ActorCritic::encode(nn::Tape& t, int agent, const std::vector<Vec>& history) const {
  return agents_[static_cast<std::size_t>(agent)].memory.encode(t, history);
}

ActorCritic::PolicyNodes ActorCritic::policy_nodes(nn::Tape& t, int agent,
                                                   nn::NodeId embed) const {
  const Agent& ag = agents_[static_cast<std::size_t>(agent)];
  nn::NodeId features = embed;
  if (ag.has_trunk) features = t.relu(ag.trunk.forward(t, embed));
  PolicyNodes out;
  out.discrete = ag.discrete;
  if (ag.discrete) {
    out.log_probs = t.log_softmax(ag.categorical.forward(t, features));
  } else {
    const auto g = ag.gaussian.forward(t, features);
    out.mu = g.mu;
    out.log_sigma = g.log_sigma;
  }
  return out;
}

nn::NodeId ActorCritic::log_prob(nn::Tape& t, int agent, const PolicyNodes& p,
                                 const Vec& action) const {
  const Agent& ag = agents_[static_cast<std::size_t>(agent)];
  if (ag.discrete) {
    const auto idx = static_cast<int>(std::llround(action.at(0)));
    return t.slice(p.log_probs, idx, 1);
  }
  return nn::gaussian_log_prob(t, p.mu, p.log_sigma, t.constant(action));
}

nn::NodeId ActorCritic::agent_value(nn::Tape& t, int agent, nn::NodeId embed) const {
  return agents_[static_cast<std::size_t>(agent)].value_head.forward(t, embed);
}

nn::NodeId ActorCritic::mixed_value(nn::Tape& t, const Vec& state,
                                    std::span<const nn::NodeId> agent_values) const {
  if (static_cast<int>(agent_values.size()) != spec_.n_agents)
    throw std::invalid_argument("mixed_value: one utility per agent required");
  const nn::NodeId m = mixer_.forward(t, t.constant(state));
  const nn::NodeId w = t.abs(t.slice(m, 0, spec_.n_agents));
  nn::NodeId acc = t.slice(m, spec_.n_agents, 1);  // b(s), unconstrained
  for (int i = 0; i < spec_.n_agents; ++i)
    acc = t.add(acc, t.mul(t.slice(w, i, 1), agent_values[static_cast<std::size_t>(i)]));
  return acc;
}

void ActorCritic::act(const std::vector<std::vector<Vec>>& histories, Rng& rng,
                      envs::JointAction& actions, Vec& logps) const {
  if (static_cast<int>(histories.size()) != spec_.n_agents)
    throw std::invalid_argument("act: one history per agent required");
  actions.assign(static_cast<std::size_t>(spec_.n_agents), Vec{});
  logps.assign(static_cast<std::size_t>(spec_.n_agents), 0.0);
  scratch_.reset();
  for (int i = 0; i < spec_.n_agents; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const nn::NodeId embed = encode(scratch_, i, histories[ui]);
    const PolicyNodes p = policy_nodes(scratch_, i, embed);
    if (p.discrete) {
      const nn::NodeId probs = scratch_.exp(p.log_probs);
      const int a = nn::sample_categorical(scratch_.values(probs), rng);
      actions[ui] = Vec{static_cast<double>(a)};
    } else {
      actions[ui] =
          nn::sample_diag_gaussian(scratch_.values(p.mu), scratch_.values(p.log_sigma), rng);
    }
    logps[ui] = scratch_.value(log_prob(scratch_, i, p, actions[ui]));
  }
}

double ActorCritic::team_value(const Vec& state,
                               const std::vector<std::vector<Vec>>& histories) const {
  if (static_cast<int>(histories.size()) != spec_.n_agents)
    throw std::invalid_argument("team_value: one history per agent required");
  scratch_.reset();
  std::vector<nn::NodeId> utilities(static_cast<std::size_t>(spec_.n_agents));
  for (int i = 0; i < spec_.n_agents; ++i) {
    const nn::NodeId embed = encode(scratch_, i, histories[static_cast<std::size_t>(i)]);
    utilities[static_cast<std::size_t>(i)] = agent_value(scratch_, i, embed);
  }
  return scratch_.value(mixed_value(scratch_, state, utilities));
}

Vec ActorCritic::greedy_action(int agent, const std::vector<Vec>& history) const {
  scratch_.reset();
  const nn::NodeId embed = encode(scratch_, agent, history);
  const PolicyNodes p = policy_nodes(scratch_, agent, embed);
  if (p.discrete) {
    const int a = nn::argmax_index(scratch_.values(p.log_probs));
    return Vec{static_cast<double>(a)};
  }
  const auto mu = scratch_.values(p.mu);
  return Vec(mu.begin(), mu.end());
}

envs::JointAction ActorCritic::greedy_actions(const std::vector<std::vector<Vec>>& histories) const {
  if (static_cast<int>(histories.size()) != spec_.n_agents)
    throw std::invalid_argument("greedy_actions: one history per agent required");
  envs::JointAction out(static_cast<std::size_t>(spec_.n_agents));
  for (int i = 0; i < spec_.n_agents; ++i)
    out[static_cast<std::size_t>(i)] = greedy_action(i, histories[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<ActorCritic::NamedSet> ActorCritic::named_sets() {
  std::vector<NamedSet> out;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const std::string base = "agent" + std::to_string(i);
    out.push_back({base + ".memory", agents_[i].memory_ps.get(), true});
    out.push_back({base + ".policy", agents_[i].policy_ps.get(), false});
    out.push_back({base + ".value", agents_[i].value_ps.get(), false});
  }
  out.push_back({"mixer", mixer_ps_.get(), false});
  return out;
}

// ---- checkpointing ----

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, long long line, const std::string& msg) {
  throw PolicyIoError(path + ":" + std::to_string(line) + ": " + msg);
}

ordered_json spec_json(const envs::EnvSpec& spec) {
  ordered_json j;
  j["id"] = spec.id;
  j["n_agents"] = spec.n_agents;
  j["state_dim"] = spec.state_dim;
  j["obs_dims"] = spec.obs_dims;
  ordered_json spaces = ordered_json::array();
  for (const auto& sp : spec.action_spaces) {
    ordered_json a;
    a["discrete"] = sp.discrete;
    a["dim"] = sp.dim;
    a["n"] = sp.n;
    spaces.push_back(std::move(a));
  }
  j["action_spaces"] = std::move(spaces);
  j["horizon"] = spec.horizon;
  return j;
}

envs::EnvSpec spec_from_json(const ordered_json& j) {
  envs::EnvSpec spec;
  spec.id = j.at("id").get<std::string>();
  spec.n_agents = j.at("n_agents").get<int>();
  spec.state_dim = j.at("state_dim").get<int>();
  spec.obs_dims = j.at("obs_dims").get<std::vector<int>>();
  for (const auto& a : j.at("action_spaces")) {
    envs::ActionSpace sp;
    sp.discrete = a.at("discrete").get<bool>();
    sp.dim = a.at("dim").get<int>();
    sp.n = a.at("n").get<int>();
    spec.action_spaces.push_back(sp);
  }
  spec.horizon = j.at("horizon").get<int>();
  return spec;
}

double parse_double(const std::string& path, long long line, const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == nullptr || *end != '\0' || tok.empty()) fail(path, line, "bad number '" + tok + "'");
  return v;
}

}  // namespace

void save_policy(ActorCritic& ac, const std::string& algorithm, const std::string& config_hash,
                 const std::string& path) {
  ordered_json header;
  header["format_version"] = 1;
  header["algorithm"] = algorithm;
  header["env"] = spec_json(ac.spec());
  const ActorCriticConfig& cfg = ac.config();
  ordered_json jcfg;
  jcfg["window"] = cfg.window;
  jcfg["embed_dim"] = cfg.embed_dim;
  jcfg["policy_hidden"] = cfg.policy_hidden;
  jcfg["value_hidden"] = cfg.value_hidden;
  jcfg["mixer_hidden"] = cfg.mixer_hidden;
  header["config"] = std::move(jcfg);
  header["config_hash"] = config_hash;

  std::ofstream out(path);
  if (!out) throw PolicyIoError("cannot open '" + path + "' for writing");
  out << header.dump() << '\n';
  for (const auto& named : ac.named_sets()) {
    const nn::ParameterSet& ps = *named.set;
    for (int b = 0; b < ps.num_blocks(); ++b) {
      const auto& block = ps.block(b);
      out << "param " << named.name << ' ' << block.name << ' ' << block.size();
      for (double v : ps.values(b)) out << ' ' << data::format_double(v);
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw PolicyIoError("write to '" + path + "' failed");
}

LoadedPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PolicyIoError("cannot open '" + path + "' for reading");
  std::string line;
  long long line_no = 0;

  if (!std::getline(in, line)) fail(path, 1, "missing header");
  ++line_no;
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const std::exception& ex) {
    fail(path, line_no, std::string("header is not valid JSON: ") + ex.what());
  }

  LoadedPolicy result;
  try {
    if (header.at("format_version").get<int>() != 1)
      throw PolicyIoError("unsupported format_version");
    result.algorithm = header.at("algorithm").get<std::string>();
    const envs::EnvSpec spec = spec_from_json(header.at("env"));
    const auto& jcfg = header.at("config");
    ActorCriticConfig cfg;
    cfg.window = jcfg.at("window").get<int>();
    cfg.embed_dim = jcfg.at("embed_dim").get<int>();
    cfg.policy_hidden = jcfg.at("policy_hidden").get<std::vector<int>>();
    cfg.value_hidden = jcfg.at("value_hidden").get<std::vector<int>>();
    cfg.mixer_hidden = jcfg.at("mixer_hidden").get<std::vector<int>>();
    result.actor_critic = std::make_unique<ActorCritic>(spec, cfg);
    result.config_hash = header.at("config_hash").get<std::string>();
  } catch (const PolicyIoError&) {
    throw;
  } catch (const std::exception& ex) {
    fail(path, line_no, std::string("bad header field: ") + ex.what());
  }

  auto named = result.actor_critic->named_sets();
  std::vector<std::vector<bool>> filled(named.size());
  for (std::size_t s = 0; s < named.size(); ++s)
    filled[s].assign(static_cast<std::size_t>(named[s].set->num_blocks()), false);

  bool saw_end = false;
  std::istringstream fields;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) fail(path, line_no, "empty line");
    if (line == "end") {
      saw_end = true;
      break;
    }
    fields.clear();
    fields.str(line);
    std::string kind, set_name, block_name;
    long long count = -1;
    if (!(fields >> kind >> set_name >> block_name >> count) || kind != "param")
      fail(path, line_no, "expected 'param <set> <block> <count> ...'");
    std::size_t set_idx = named.size();
    for (std::size_t s = 0; s < named.size(); ++s) {
      if (named[s].name == set_name) {
        set_idx = s;
        break;
      }
    }
    if (set_idx == named.size()) fail(path, line_no, "unknown parameter set '" + set_name + "'");
    nn::ParameterSet& ps = *named[set_idx].set;
    int block_id = -1;
    try {
      block_id = ps.block_id(block_name);
    } catch (const std::exception&) {
      fail(path, line_no, "unknown block '" + block_name + "' in set '" + set_name + "'");
    }
    auto dst = ps.values(block_id);
    if (count != static_cast<long long>(dst.size()))
      fail(path, line_no, "block '" + block_name + "' has " + std::to_string(dst.size()) +
                              " values, line declares " + std::to_string(count));
    if (filled[set_idx][static_cast<std::size_t>(block_id)])
      fail(path, line_no, "block '" + block_name + "' of set '" + set_name + "' appears twice");
    std::string tok;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (!(fields >> tok)) fail(path, line_no, "too few values for block '" + block_name + "'");
      dst[i] = parse_double(path, line_no, tok);
    }
    if (fields >> tok) fail(path, line_no, "trailing tokens after block '" + block_name + "'");
    filled[set_idx][static_cast<std::size_t>(block_id)] = true;
  }
  if (!saw_end) fail(path, line_no, "missing 'end' line (truncated file?)");
  for (std::size_t s = 0; s < named.size(); ++s)
    for (std::size_t b = 0; b < filled[s].size(); ++b)
      if (!filled[s][b])
        throw PolicyIoError(path + ": set '" + named[s].name + "' block '" +
                            named[s].set->block(static_cast<int>(b)).name + "' is missing");
  return result;
}

}  // namespace moma::mappo
