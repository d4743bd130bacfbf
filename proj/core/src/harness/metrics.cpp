#include "moma/harness/metrics.hpp"

#include "moma/data/io.hpp"

namespace moma::harness {

MetricsLog::MetricsLog(const std::string& path, std::vector<std::string> columns)
    : path_(path), columns_(std::move(columns)) {
  if (columns_.empty()) throw MetricsError("metrics log needs at least one column");
  out_.open(path_, std::ios::out | std::ios::trunc);
  if (!out_) throw MetricsError("cannot open metrics file for writing: " + path_);
  out_ << "step";
  for (const auto& c : columns_) out_ << "," << c;
  out_ << "\n";
  out_.flush();
}

void MetricsLog::append(std::int64_t step, const std::vector<double>& values) {
  if (values.size() != columns_.size()) {
    throw MetricsError("metrics row has " + std::to_string(values.size()) + " values, expected " +
                       std::to_string(columns_.size()));
  }
  if (step <= last_step_) {
    throw MetricsError("metrics steps must increase: got " + std::to_string(step) + " after " +
                       std::to_string(last_step_));
  }
  out_ << step;
  for (double v : values) out_ << "," << data::format_double(v);
  out_ << "\n";
  out_.flush();
  if (!out_) throw MetricsError("write to metrics file failed: " + path_);
  last_step_ = step;
}

}  // namespace moma::harness
