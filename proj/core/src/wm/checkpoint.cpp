#include "moma/wm/checkpoint.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "moma/data/io.hpp"
#include "moma/envs/registry.hpp"

namespace moma::wm {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, long long line, const std::string& msg) {
  throw CheckpointError(path + ":" + std::to_string(line) + ": " + msg);
}

ordered_json stats_json(const data::DatasetStats& s) {
  ordered_json j;
  j["state_min"] = s.state_min;
  j["state_max"] = s.state_max;
  j["reward_min"] = s.reward_min;
  j["reward_max"] = s.reward_max;
  j["score_mean"] = s.score_mean;
  j["score_median"] = s.score_median;
  j["score_min"] = s.score_min;
  j["score_max"] = s.score_max;
  return j;
}

data::DatasetStats stats_from_json(const ordered_json& j) {
  data::DatasetStats s;
  s.state_min = j.at("state_min").get<Vec>();
  s.state_max = j.at("state_max").get<Vec>();
  s.reward_min = j.at("reward_min").get<double>();
  s.reward_max = j.at("reward_max").get<double>();
  s.score_mean = j.at("score_mean").get<double>();
  s.score_median = j.at("score_median").get<double>();
  s.score_min = j.at("score_min").get<double>();
  s.score_max = j.at("score_max").get<double>();
  return s;
}

double parse_double(const std::string& path, long long line, const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == nullptr || *end != '\0' || tok.empty()) fail(path, line, "bad number '" + tok + "'");
  return v;
}

}  // namespace

void save_ensemble(const WorldModelEnsemble& e, const std::string& path) {
  const WorldModelConfig& cfg = e.config();
  ordered_json header;
  header["format_version"] = 1;
  header["env_id"] = e.env_spec().id;
  header["state_dim"] = e.env_spec().state_dim;
  header["action_dim"] = e.members().empty() ? 0 : e.members().front().action_dim();
  header["hidden"] = cfg.hidden;
  header["n_members"] = cfg.n_members;
  header["n_elites"] = cfg.n_elites;
  header["elites"] = e.elites();
  header["validation_scores"] = e.validation_scores();
  header["l_eps"] = e.l_eps();
  header["project_onehot"] = cfg.project_onehot;
  header["leps_multiplier"] = cfg.leps_multiplier;
  header["leps_percentile"] = cfg.leps_percentile;
  header["lr"] = cfg.lr;
  header["batch_size"] = cfg.batch_size;
  header["train_steps"] = cfg.train_steps;
  header["grad_clip"] = cfg.grad_clip;
  header["max_train_attempts"] = cfg.max_train_attempts;
  header["stats"] = stats_json(e.stats());

  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out << header.dump() << '\n';
  for (std::size_t m = 0; m < e.members().size(); ++m) {
    const nn::ParameterSet& ps = e.members()[m].params();
    for (int b = 0; b < ps.num_blocks(); ++b) {
      const auto& block = ps.block(b);
      out << "param " << m << ' ' << block.name << ' ' << block.size();
      for (double v : ps.values(b)) out << ' ' << data::format_double(v);
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw CheckpointError("write to '" + path + "' failed");
}

WorldModelEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open '" + path + "' for reading");
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

  WorldModelConfig cfg;
  std::string env_id;
  int state_dim = 0, action_dim = 0;
  std::vector<int> elites;
  std::vector<double> val_scores;
  double l_eps = 0.0;
  data::DatasetStats stats;
  try {
    if (header.at("format_version").get<int>() != 1)
      throw CheckpointError("unsupported format_version");
    env_id = header.at("env_id").get<std::string>();
    state_dim = header.at("state_dim").get<int>();
    action_dim = header.at("action_dim").get<int>();
    cfg.hidden = header.at("hidden").get<std::vector<int>>();
    cfg.n_members = header.at("n_members").get<int>();
    cfg.n_elites = header.at("n_elites").get<int>();
    elites = header.at("elites").get<std::vector<int>>();
    val_scores = header.at("validation_scores").get<std::vector<double>>();
    l_eps = header.at("l_eps").get<double>();
    cfg.project_onehot = header.at("project_onehot").get<bool>();
    cfg.leps_multiplier = header.at("leps_multiplier").get<double>();
    cfg.leps_percentile = header.at("leps_percentile").get<double>();
    cfg.lr = header.at("lr").get<double>();
    cfg.batch_size = header.at("batch_size").get<int>();
    cfg.train_steps = header.at("train_steps").get<long long>();
    cfg.grad_clip = header.at("grad_clip").get<double>();
    cfg.max_train_attempts = header.at("max_train_attempts").get<int>();
    stats = stats_from_json(header.at("stats"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& ex) {
    fail(path, line_no, std::string("bad header field: ") + ex.what());
  }

  const auto env = envs::make_env(env_id);
  const envs::EnvSpec& spec = env->spec();
  if (spec.state_dim != state_dim)
    fail(path, line_no, "state_dim " + std::to_string(state_dim) + " does not match environment '" +
                            env_id + "' (" + std::to_string(spec.state_dim) + ")");

  std::vector<EnsembleMember> members;
  members.reserve(static_cast<std::size_t>(cfg.n_members));
  for (int m = 0; m < cfg.n_members; ++m) members.emplace_back(state_dim, action_dim, cfg.hidden);
  std::vector<std::vector<bool>> filled(members.size());
  for (std::size_t m = 0; m < members.size(); ++m)
    filled[m].assign(static_cast<std::size_t>(members[m].params().num_blocks()), false);

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
    std::string kind, block_name;
    long long member = -1, count = -1;
    if (!(fields >> kind >> member >> block_name >> count) || kind != "param")
      fail(path, line_no, "expected 'param <member> <block> <count> ...'");
    if (member < 0 || member >= static_cast<long long>(members.size()))
      fail(path, line_no, "member index " + std::to_string(member) + " out of range");
    nn::ParameterSet& ps = members[static_cast<std::size_t>(member)].params();
    int block_id = -1;
    try {
      block_id = ps.block_id(block_name);
    } catch (const std::exception&) {
      fail(path, line_no, "unknown block '" + block_name + "'");
    }
    auto dst = ps.values(block_id);
    if (count != static_cast<long long>(dst.size()))
      fail(path, line_no, "block '" + block_name + "' has " + std::to_string(dst.size()) +
                              " values, line declares " + std::to_string(count));
    if (filled[static_cast<std::size_t>(member)][static_cast<std::size_t>(block_id)])
      fail(path, line_no, "block '" + block_name + "' of member " + std::to_string(member) +
                              " appears twice");
    std::string tok;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (!(fields >> tok)) fail(path, line_no, "too few values for block '" + block_name + "'");
      dst[i] = parse_double(path, line_no, tok);
    }
    if (fields >> tok) fail(path, line_no, "trailing tokens after block '" + block_name + "'");
    filled[static_cast<std::size_t>(member)][static_cast<std::size_t>(block_id)] = true;
  }
  if (!saw_end) fail(path, line_no, "missing 'end' line (truncated file?)");
  {
    std::string tail;
    if (std::getline(in, tail) && !tail.empty())
      fail(path, line_no + 1, "unexpected content after 'end'");
  }
  for (std::size_t m = 0; m < members.size(); ++m)
    for (std::size_t b = 0; b < filled[m].size(); ++b)
      if (!filled[m][b])
        throw CheckpointError(path + ": member " + std::to_string(m) + " block '" +
                              members[m].params().block(static_cast<int>(b)).name + "' is missing");

  WorldModelEnsemble loaded(spec, cfg, std::move(members), std::move(elites), std::move(stats));
  loaded.set_leps(l_eps);
  loaded.set_validation_scores(std::move(val_scores));
  return loaded;
}

}  // namespace moma::wm
