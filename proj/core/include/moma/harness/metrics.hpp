#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace moma::harness {

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Append-only CSV training log. The column set is fixed at construction and
/// written as the header row; every append must supply one value per column
/// and a step strictly greater than the previous row's. Values are printed
/// with round-trip precision and no timestamps, so identical runs produce
/// byte-identical files.
class MetricsLog {
 public:
  MetricsLog(const std::string& path, std::vector<std::string> columns);

  void append(std::int64_t step, const std::vector<double>& values);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::vector<std::string> columns_;
  std::ofstream out_;
  std::int64_t last_step_ = -1;
};

}  // namespace moma::harness
