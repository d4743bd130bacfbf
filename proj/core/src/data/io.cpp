#include "moma/data/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace moma::data {

namespace {

using ordered_json = nlohmann::ordered_json;

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

[[noreturn]] void fail(const std::string& path, long long line, const std::string& what) {
  throw DatasetIoError(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<double> parse_numbers(const std::string& path, long long line_no, const std::string& line) {
  std::vector<double> out;
  const char* p = line.c_str();
  while (*p != '\0') {
    while (*p == ' ') ++p;
    if (*p == '\0') break;
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p) fail(path, line_no, "malformed number near '" + std::string(p).substr(0, 12) + "'");
    out.push_back(v);
    p = end;
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

std::string stats_checksum(const DatasetStats& s) {
  std::string canon;
  auto put = [&canon](double v) {
    append_double(canon, v);
    canon += ' ';
  };
  for (double v : s.state_min) put(v);
  for (double v : s.state_max) put(v);
  put(s.reward_min);
  put(s.reward_max);
  put(s.score_mean);
  put(s.score_median);
  put(s.score_min);
  put(s.score_max);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
  return buf;
}

void save(const OfflineDataset& d, const std::string& path) {
  const DatasetStats stats = compute_stats(d);

  ordered_json header;
  header["schema_version"] = d.meta.schema_version;
  header["env_id"] = d.meta.env_id;
  header["obs_mode"] = d.meta.obs_mode;
  header["n_agents"] = d.meta.n_agents;
  header["state_dim"] = d.meta.state_dim;
  header["obs_dims"] = d.meta.obs_dims;
  header["action_dims"] = d.meta.action_dims;
  header["collection_seed"] = d.meta.collection_seed;
  header["n_episodes"] = d.meta.n_episodes;
  header["n_records"] = d.count_records();
  header["expert_score"] = d.meta.expert_score;
  header["random_score"] = d.meta.random_score;
  header["stats_checksum"] = stats_checksum(stats);
  header["policy_tags"] = d.meta.policy_tags;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetIoError(path + ": cannot open for writing");
  out << header.dump() << '\n';

  long long records = 0;
  std::string line;
  for (std::size_t k = 0; k < d.trajectories.size(); ++k) {
    const Trajectory& traj = d.trajectories[k];
    const int T = traj.length();
    for (int t = 0; t <= T; ++t) {
      line.clear();
      line += std::to_string(k);
      line += ' ';
      line += std::to_string(t);
      for (double v : traj.states[static_cast<std::size_t>(t)]) {
        line += ' ';
        append_double(line, v);
      }
      for (const Vec& o : traj.obs[static_cast<std::size_t>(t)]) {
        for (double v : o) {
          line += ' ';
          append_double(line, v);
        }
      }
      if (t < T) {
        for (const Vec& a : traj.actions[static_cast<std::size_t>(t)]) {
          for (double v : a) {
            line += ' ';
            append_double(line, v);
          }
        }
        line += ' ';
        append_double(line, traj.rewards[static_cast<std::size_t>(t)]);
        line += " 0";
      } else {
        for (int ad : d.meta.action_dims) {
          for (int i = 0; i < ad; ++i) line += " 0";
        }
        line += " 0 ";
        line += traj.done ? '1' : '0';
      }
      out << line << '\n';
      ++records;
    }
  }
  out << "records " << records << '\n';
  if (!out) throw DatasetIoError(path + ": write failed");
}

OfflineDataset load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetIoError(path + ": cannot open");

  std::string line;
  long long line_no = 1;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const std::exception& e) {
    fail(path, 1, std::string("header parse error: ") + e.what());
  }

  OfflineDataset d;
  try {
    d.meta.schema_version = header.at("schema_version").get<int>();
    if (d.meta.schema_version != 1) {
      fail(path, 1, "schema-version mismatch: expected 1, found " + std::to_string(d.meta.schema_version));
    }
    d.meta.env_id = header.at("env_id").get<std::string>();
    d.meta.obs_mode = header.at("obs_mode").get<std::string>();
    d.meta.n_agents = header.at("n_agents").get<int>();
    d.meta.state_dim = header.at("state_dim").get<int>();
    d.meta.obs_dims = header.at("obs_dims").get<std::vector<int>>();
    d.meta.action_dims = header.at("action_dims").get<std::vector<int>>();
    d.meta.collection_seed = header.at("collection_seed").get<std::uint64_t>();
    d.meta.n_episodes = header.at("n_episodes").get<int>();
    d.meta.n_records = header.at("n_records").get<long long>();
    d.meta.expert_score = header.at("expert_score").get<double>();
    d.meta.random_score = header.at("random_score").get<double>();
    d.meta.policy_tags = header.at("policy_tags").get<std::vector<std::string>>();
  } catch (const DatasetIoError&) {
    throw;
  } catch (const std::exception& e) {
    fail(path, 1, std::string("header field error: ") + e.what());
  }
  const std::string expected_checksum = header.at("stats_checksum").get<std::string>();

  if (static_cast<int>(d.meta.obs_dims.size()) != d.meta.n_agents ||
      static_cast<int>(d.meta.action_dims.size()) != d.meta.n_agents) {
    fail(path, 1, "schema error: n_agents does not match obs/action dim lists");
  }
  if (static_cast<int>(d.meta.policy_tags.size()) != d.meta.n_episodes) {
    fail(path, 1, "schema error: policy_tags size does not match n_episodes");
  }

  int obs_total = 0;
  for (int v : d.meta.obs_dims) obs_total += v;
  int act_total = 0;
  for (int v : d.meta.action_dims) act_total += v;
  const std::size_t expect_fields =
      static_cast<std::size_t>(2 + d.meta.state_dim + obs_total + act_total + 2);

  long long records = 0;
  bool saw_footer = false;
  Trajectory cur;
  long long cur_traj = -1;
  bool prev_done = false;

  // A record's terminal status is only known once the next line (or the
  // footer) arrives, so actions/rewards are stashed for all T+1 records and
  // the trailing padding pair is validated and trimmed when the trajectory
  // closes.
  auto finish_trajectory = [&](long long end_line) {
    if (cur_traj < 0) return;
    if (cur.states.size() < 2) {
      fail(path, end_line, "trajectory " + std::to_string(cur_traj) + " has fewer than 2 records");
    }
    for (const Vec& a : cur.actions.back()) {
      for (double v : a) {
        if (v != 0.0) fail(path, end_line, "terminal record action not zero-padded");
      }
    }
    if (cur.rewards.back() != 0.0) fail(path, end_line, "terminal record reward not zero-padded");
    cur.actions.pop_back();
    cur.rewards.pop_back();
    d.trajectories.push_back(std::move(cur));
    cur = Trajectory{};
    prev_done = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("records ", 0) == 0) {
      const long long declared = std::strtoll(line.c_str() + 8, nullptr, 10);
      if (declared != records) {
        fail(path, line_no, "record-count mismatch: footer says " + std::to_string(declared) +
                                ", file has " + std::to_string(records));
      }
      saw_footer = true;
      break;
    }
    const std::vector<double> f = parse_numbers(path, line_no, line);
    if (f.size() != expect_fields) {
      fail(path, line_no, "expected " + std::to_string(expect_fields) + " fields, got " +
                              std::to_string(f.size()));
    }
    const long long traj_idx = static_cast<long long>(f[0]);
    const long long step_idx = static_cast<long long>(f[1]);
    if (f[0] != static_cast<double>(traj_idx) || f[1] != static_cast<double>(step_idx)) {
      fail(path, line_no, "non-integer trajectory/step index");
    }

    if (traj_idx != cur_traj) {
      if (traj_idx != cur_traj + 1) fail(path, line_no, "non-consecutive trajectory index");
      finish_trajectory(line_no);
      cur_traj = traj_idx;
      if (step_idx != 0) fail(path, line_no, "trajectory does not start at step 0");
    } else {
      if (prev_done) fail(path, line_no, "record after a done flag inside one trajectory");
      const auto expected_step = static_cast<long long>(cur.states.size());
      if (step_idx != expected_step) {
        fail(path, line_no, "non-consecutive step index: expected " + std::to_string(expected_step));
      }
    }

    std::size_t off = 2;
    Vec state(f.begin() + static_cast<std::ptrdiff_t>(off),
              f.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(d.meta.state_dim)));
    off += static_cast<std::size_t>(d.meta.state_dim);
    std::vector<Vec> obs;
    for (int od : d.meta.obs_dims) {
      obs.emplace_back(f.begin() + static_cast<std::ptrdiff_t>(off),
                       f.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(od)));
      off += static_cast<std::size_t>(od);
    }
    envs::JointAction action;
    for (int ad : d.meta.action_dims) {
      action.emplace_back(f.begin() + static_cast<std::ptrdiff_t>(off),
                          f.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(ad)));
      off += static_cast<std::size_t>(ad);
    }
    const double reward = f[off];
    const double done = f[off + 1];
    if (done != 0.0 && done != 1.0) fail(path, line_no, "done flag must be 0 or 1");

    cur.states.push_back(std::move(state));
    cur.obs.push_back(std::move(obs));
    cur.actions.push_back(std::move(action));
    cur.rewards.push_back(reward);
    if (done == 1.0) {
      cur.done = true;
      prev_done = true;
    }
    ++records;
  }
  if (!saw_footer) fail(path, line_no, "truncated file: missing records footer");

  finish_trajectory(line_no);

  for (std::size_t k = 0; k < d.trajectories.size(); ++k) {
    d.trajectories[k].policy_tag =
        k < d.meta.policy_tags.size() ? d.meta.policy_tags[k] : std::string{};
  }

  if (static_cast<int>(d.trajectories.size()) != d.meta.n_episodes) {
    fail(path, line_no, "episode count mismatch: header says " + std::to_string(d.meta.n_episodes) +
                            ", file has " + std::to_string(d.trajectories.size()));
  }
  if (records != d.meta.n_records) {
    fail(path, line_no, "n_records mismatch between header and file body");
  }

  const std::string actual_checksum = stats_checksum(compute_stats(d));
  if (actual_checksum != expected_checksum) {
    throw DatasetIoError(path + ": stats checksum mismatch (file corrupt?)");
  }
  return d;
}

}  // namespace moma::data
