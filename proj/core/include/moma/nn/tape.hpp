#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "moma/nn/parameters.hpp"

namespace moma::nn {

using NodeId = int;

/// Reverse-mode accumulation over a fixed operator set. Nodes hold vector
/// values in a flat arena; operands always precede their results, so a
/// single reverse sweep propagates gradients. Parameter gradients accumulate
/// directly into the owning ParameterSet, which lets one tape combine many
/// parameter sets (policies, value heads, mixers) in a single loss.
///
/// Forward values are computed eagerly at op creation. Building a graph and
/// never calling backward() is the supported "inference" path; both paths
/// therefore produce bit-identical forward values.
class Tape {
 public:
  Tape() = default;

  // ---- leaves ----
  NodeId constant(std::span<const double> v);
  NodeId constant(std::initializer_list<double> v) { return constant(std::span<const double>(v.begin(), v.size())); }
  NodeId scalar(double v) { return constant({v}); }
  /// Snapshot of a parameter block; backward accumulates into the block grads.
  NodeId param(ParameterSet& ps, int block_id);

  // ---- parameterized ops ----
  /// y = W x + b with W row-major (out x in); pass bias_id = -1 for biasless.
  NodeId affine(ParameterSet& ps, int weight_id, int bias_id, NodeId x);
  /// y = gain * (x - mean) / sqrt(var + eps) + bias
  NodeId layer_norm(ParameterSet& ps, int gain_id, int bias_id, NodeId x, double eps = 1e-5);

  // ---- unary elementwise ----
  NodeId relu(NodeId x);
  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId exp(NodeId x);
  NodeId log(NodeId x);
  NodeId abs(NodeId x);
  NodeId neg(NodeId x);
  NodeId clamp(NodeId x, double lo, double hi);
  NodeId add_scalar(NodeId x, double c);
  NodeId scale(NodeId x, double c);

  // ---- binary elementwise (equal sizes) ----
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId min2(NodeId a, NodeId b);
  NodeId max2(NodeId a, NodeId b);

  // ---- structure ----
  NodeId concat(std::span<const NodeId> parts);
  NodeId concat(std::initializer_list<NodeId> parts) { return concat(std::span<const NodeId>(parts.begin(), parts.size())); }
  NodeId slice(NodeId x, int offset, int len);

  // ---- reductions ----
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId dot(NodeId a, NodeId b);

  // ---- distributions / attention pieces ----
  NodeId softmax(NodeId x);
  NodeId log_softmax(NodeId x);
  /// y = sum_l weights[l] * vectors[l], all vectors of equal length.
  NodeId axpy_combine(NodeId weights, std::span<const NodeId> vectors);

  // ---- access ----
  int size(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].n; }
  std::span<const double> values(NodeId id) const;
  double value(NodeId id) const;  // scalar nodes only
  std::span<const double> grad(NodeId id) const;

  /// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. Root must be
  /// scalar. Parameter grads are *added*; call ParameterSet::zero_grad()
  /// between independent losses.
  void backward(NodeId root);

  /// Drops all nodes but keeps arena capacity.
  void reset();

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kConst, kParam, kAffine, kLayerNorm,
    kRelu, kTanh, kSigmoid, kExp, kLog, kAbs, kNeg, kClamp, kAddScalar, kScale,
    kAdd, kSub, kMul, kMin2, kMax2,
    kConcat, kSlice, kSum, kMean, kDot, kSoftmax, kLogSoftmax, kAxpy,
  };

  struct Node {
    Op op;
    int off = 0;   // into value/grad arenas
    int n = 0;     // payload length
    NodeId a = -1, b = -1;
    int ext_off = 0, ext_n = 0;  // operand list (concat/axpy)
    ParameterSet* ps = nullptr;
    int blk0 = -1, blk1 = -1;
    double c0 = 0.0, c1 = 0.0;
  };

  NodeId push(Op op, int n);
  double* vals(const Node& nd) { return vals_.data() + nd.off; }
  const double* vals(const Node& nd) const { return vals_.data() + nd.off; }
  double* grads(const Node& nd) { return grads_.data() + nd.off; }
  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void check_same_size(NodeId a, NodeId b, const char* what) const;

  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> grads_;
  std::vector<NodeId> ext_;
};

}  // namespace moma::nn
