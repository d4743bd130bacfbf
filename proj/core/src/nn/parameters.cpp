#include "moma/nn/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace moma::nn {

int ParameterSet::add_matrix(std::string name, std::size_t rows, std::size_t cols) {
  if (frozen_) throw std::logic_error("ParameterSet: add after freeze: " + name);
  if (rows == 0 || cols == 0) throw std::invalid_argument("ParameterSet: empty block: " + name);
  for (const auto& b : blocks_) {
    if (b.name == name) throw std::invalid_argument("ParameterSet: duplicate block: " + name);
  }
  Block b;
  b.name = std::move(name);
  b.offset = total_;
  b.rows = rows;
  b.cols = cols;
  total_ += b.size();
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

void ParameterSet::freeze() {
  if (frozen_) return;
  values_.assign(total_, 0.0);
  grads_.assign(total_, 0.0);
  frozen_ = true;
}

void ParameterSet::ensure_frozen() const {
  if (!frozen_) const_cast<ParameterSet*>(this)->freeze();
}

int ParameterSet::block_id(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return static_cast<int>(i);
  }
  throw std::invalid_argument("ParameterSet: unknown block: " + std::string(name));
}

std::span<double> ParameterSet::values() {
  ensure_frozen();
  return values_;
}
std::span<const double> ParameterSet::values() const {
  ensure_frozen();
  return values_;
}
std::span<double> ParameterSet::grads() {
  ensure_frozen();
  return grads_;
}
std::span<const double> ParameterSet::grads() const {
  ensure_frozen();
  return grads_;
}
std::span<double> ParameterSet::values(int id) {
  ensure_frozen();
  const Block& b = block(id);
  return {values_.data() + b.offset, b.size()};
}
std::span<const double> ParameterSet::values(int id) const {
  ensure_frozen();
  const Block& b = block(id);
  return {values_.data() + b.offset, b.size()};
}
std::span<double> ParameterSet::grads(int id) {
  ensure_frozen();
  const Block& b = block(id);
  return {grads_.data() + b.offset, b.size()};
}
std::span<const double> ParameterSet::grads(int id) const {
  ensure_frozen();
  const Block& b = block(id);
  return {grads_.data() + b.offset, b.size()};
}

void ParameterSet::zero_grad() {
  ensure_frozen();
  std::fill(grads_.begin(), grads_.end(), 0.0);
}

bool ParameterSet::values_finite() const {
  ensure_frozen();
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool ParameterSet::grads_finite() const {
  ensure_frozen();
  return std::all_of(grads_.begin(), grads_.end(), [](double v) { return std::isfinite(v); });
}

void ParameterSet::init_linear(int w_id, int b_id, Rng& rng) {
  const Block& w = block(w_id);
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols));
  for (double& v : values(w_id)) v = rng.uniform(-bound, bound);
  if (b_id >= 0) {
    for (double& v : values(b_id)) v = rng.uniform(-bound, bound);
  }
}

void ParameterSet::init_normal(int id, Rng& rng, double stddev) {
  for (double& v : values(id)) v = stddev * rng.normal();
}

void ParameterSet::fill(int id, double v) {
  for (double& x : values(id)) x = v;
}

}  // namespace moma::nn
