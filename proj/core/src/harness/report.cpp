#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "moma/harness/experiment.hpp"

namespace moma::harness {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string make_report(const std::vector<std::string>& summary_paths) {
  if (summary_paths.empty()) throw ExperimentError("report needs at least one summary file");

  struct Entry {
    std::string task, algo, group_hash;
    double mean_return = 0.0, normalized = 0.0;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Entry>> groups;

  for (const auto& path : summary_paths) {
    std::ifstream in(path);
    if (!in) throw ExperimentError("cannot read summary: " + path);
    ordered_json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ExperimentError("malformed summary " + path + ": " + e.what());
    }
    Entry e;
    try {
      e.task = fs::path(j.at("dataset").get<std::string>()).stem().string();
      e.algo = j.at("algorithm").get<std::string>();
      e.group_hash = j.at("group_hash").get<std::string>();
      e.mean_return = j.at("final").at("mean_return").get<double>();
      e.normalized = j.at("final").at("normalized").get<double>();
    } catch (const std::exception& ex) {
      throw ExperimentError("summary " + path + " is missing fields: " + ex.what());
    }
    groups[{e.task, e.algo}].push_back(std::move(e));
  }

  std::ostringstream out;
  out << "task                            algorithm    seeds  return(mean+/-sem)    "
         "normalized(mean+/-sem)  notes\n";
  for (const auto& [key, entries] : groups) {
    for (const auto& e : entries) {
      if (e.group_hash != entries.front().group_hash) {
        throw ExperimentError("runs grouped under task '" + key.first + "', algorithm '" +
                              key.second + "' were produced by different configurations");
      }
    }
    std::vector<double> returns, norms;
    for (const auto& e : entries) {
      returns.push_back(e.mean_return);
      norms.push_back(e.normalized);
    }
    double rm = 0.0, rs = 0.0, nm = 0.0, ns = 0.0;
    mean_sem(returns, rm, rs);
    mean_sem(norms, nm, ns);

    char line[256];
    std::snprintf(line, sizeof(line), "%-31s %-12s %5zu  %8s +/- %-8s  %8s +/- %-8s  %s\n",
                  key.first.c_str(), key.second.c_str(), entries.size(),
                  format_fixed(rm).c_str(), format_fixed(rs).c_str(), format_fixed(nm).c_str(),
                  format_fixed(ns).c_str(), entries.size() == 1 ? "single-seed" : "");
    out << line;
  }
  return out.str();
}

}  // namespace moma::harness
