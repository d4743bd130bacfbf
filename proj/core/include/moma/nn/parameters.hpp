#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moma/nn/random.hpp"

namespace moma::nn {

/// Named flat storage for weights/biases plus a gradient buffer of the same
/// shape. Blocks are registered once (construction phase) and addressed by id
/// afterwards; the backing arrays never move after `freeze()`.
class ParameterSet {
 public:
  struct Block {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;  // 1 for vectors
    std::size_t size() const { return rows * cols; }
  };

  int add_matrix(std::string name, std::size_t rows, std::size_t cols);
  int add_vector(std::string name, std::size_t n) { return add_matrix(std::move(name), n, 1); }

  /// Called implicitly on first data access; afterwards add_* throws.
  void freeze();
  bool frozen() const { return frozen_; }

  int block_id(std::string_view name) const;  // throws if unknown
  const Block& block(int id) const { return blocks_.at(static_cast<std::size_t>(id)); }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  std::size_t size() const { return total_; }

  std::span<double> values();
  std::span<const double> values() const;
  std::span<double> grads();
  std::span<const double> grads() const;
  std::span<double> values(int id);
  std::span<const double> values(int id) const;
  std::span<double> grads(int id);
  std::span<const double> grads(int id) const;

  void zero_grad();
  bool values_finite() const;
  bool grads_finite() const;

  /// torch-style Linear init: W and b uniform in +-1/sqrt(fan_in).
  void init_linear(int w_id, int b_id, Rng& rng);
  void init_normal(int id, Rng& rng, double stddev = 1.0);
  void fill(int id, double v);

 private:
  void ensure_frozen() const;
  std::vector<Block> blocks_;
  std::vector<double> values_, grads_;
  std::size_t total_ = 0;
  bool frozen_ = false;
};

}  // namespace moma::nn
