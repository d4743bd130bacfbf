#include "moma/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace moma::nn {

NodeId Tape::push(Op op, int n) {
  Node nd;
  nd.op = op;
  nd.off = static_cast<int>(vals_.size());
  nd.n = n;
  vals_.resize(vals_.size() + static_cast<std::size_t>(n), 0.0);
  nodes_.push_back(nd);
  return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::check_same_size(NodeId a, NodeId b, const char* what) const {
  if (node(a).n != node(b).n) {
    throw std::invalid_argument(std::string("Tape: size mismatch in ") + what);
  }
}

std::span<const double> Tape::values(NodeId id) const {
  const Node& nd = node(id);
  return {vals_.data() + nd.off, static_cast<std::size_t>(nd.n)};
}

double Tape::value(NodeId id) const {
  const Node& nd = node(id);
  if (nd.n != 1) throw std::logic_error("Tape::value: node is not scalar");
  return vals_[static_cast<std::size_t>(nd.off)];
}

std::span<const double> Tape::grad(NodeId id) const {
  const Node& nd = node(id);
  if (grads_.size() != vals_.size()) throw std::logic_error("Tape::grad before backward");
  return {grads_.data() + nd.off, static_cast<std::size_t>(nd.n)};
}

NodeId Tape::constant(std::span<const double> v) {
  NodeId id = push(Op::kConst, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), vals(nodes_.back()));
  return id;
}

NodeId Tape::param(ParameterSet& ps, int block_id) {
  const auto src = ps.values(block_id);
  NodeId id = push(Op::kParam, static_cast<int>(src.size()));
  Node& nd = nodes_.back();
  nd.ps = &ps;
  nd.blk0 = block_id;
  std::copy(src.begin(), src.end(), vals(nd));
  return id;
}

NodeId Tape::affine(ParameterSet& ps, int weight_id, int bias_id, NodeId x) {
  const auto& wb = ps.block(weight_id);
  const Node& xn = node(x);
  if (static_cast<int>(wb.cols) != xn.n) {
    throw std::invalid_argument("Tape::affine: weight cols != input length (" + wb.name + ")");
  }
  const int out = static_cast<int>(wb.rows);
  const int in = xn.n;
  NodeId id = push(Op::kAffine, out);
  Node& nd = nodes_.back();
  nd.a = x;
  nd.ps = &ps;
  nd.blk0 = weight_id;
  nd.blk1 = bias_id;
  const double* w = ps.values(weight_id).data();
  const double* xi = vals_.data() + node(x).off;
  double* y = vals(nd);
  for (int i = 0; i < out; ++i) {
    double acc = 0.0;
    const double* row = w + static_cast<std::size_t>(i) * in;
    for (int j = 0; j < in; ++j) acc += row[j] * xi[j];
    y[i] = acc;
  }
  if (bias_id >= 0) {
    const double* b = ps.values(bias_id).data();
    for (int i = 0; i < out; ++i) y[i] += b[i];
  }
  return id;
}

NodeId Tape::layer_norm(ParameterSet& ps, int gain_id, int bias_id, NodeId x, double eps) {
  const Node& xn = node(x);
  const int n = xn.n;
  if (static_cast<int>(ps.block(gain_id).size()) != n || static_cast<int>(ps.block(bias_id).size()) != n) {
    throw std::invalid_argument("Tape::layer_norm: gain/bias size mismatch");
  }
  NodeId id = push(Op::kLayerNorm, n);
  Node& nd = nodes_.back();
  nd.a = x;
  nd.ps = &ps;
  nd.blk0 = gain_id;
  nd.blk1 = bias_id;
  nd.c0 = eps;
  const double* xi = vals_.data() + node(x).off;
  double mu = 0.0;
  for (int i = 0; i < n; ++i) mu += xi[i];
  mu /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) var += (xi[i] - mu) * (xi[i] - mu);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  const double* g = ps.values(gain_id).data();
  const double* b = ps.values(bias_id).data();
  double* y = vals(nd);
  for (int i = 0; i < n; ++i) y[i] = g[i] * (xi[i] - mu) * inv + b[i];
  return id;
}

#define MOMA_UNARY(NAME, OPK, EXPR)                       \
  NodeId Tape::NAME(NodeId x) {                           \
    const int n = node(x).n;                              \
    NodeId id = push(Op::OPK, n);                         \
    Node& nd = nodes_.back();                             \
    nd.a = x;                                             \
    const double* xi = vals_.data() + node(x).off;        \
    double* y = vals(nd);                                 \
    for (int i = 0; i < n; ++i) y[i] = (EXPR);            \
    return id;                                            \
  }

MOMA_UNARY(relu, kRelu, xi[i] > 0.0 ? xi[i] : 0.0)
MOMA_UNARY(tanh, kTanh, std::tanh(xi[i]))
MOMA_UNARY(sigmoid, kSigmoid, 1.0 / (1.0 + std::exp(-xi[i])))
MOMA_UNARY(exp, kExp, std::exp(xi[i]))
MOMA_UNARY(log, kLog, std::log(xi[i]))
MOMA_UNARY(abs, kAbs, std::fabs(xi[i]))
MOMA_UNARY(neg, kNeg, -xi[i])
#undef MOMA_UNARY

NodeId Tape::clamp(NodeId x, double lo, double hi) {
  const int n = node(x).n;
  NodeId id = push(Op::kClamp, n);
  Node& nd = nodes_.back();
  nd.a = x;
  nd.c0 = lo;
  nd.c1 = hi;
  const double* xi = vals_.data() + node(x).off;
  double* y = vals(nd);
  for (int i = 0; i < n; ++i) y[i] = std::min(std::max(xi[i], lo), hi);
  return id;
}

NodeId Tape::add_scalar(NodeId x, double c) {
  const int n = node(x).n;
  NodeId id = push(Op::kAddScalar, n);
  Node& nd = nodes_.back();
  nd.a = x;
  nd.c0 = c;
  const double* xi = vals_.data() + node(x).off;
  double* y = vals(nd);
  for (int i = 0; i < n; ++i) y[i] = xi[i] + c;
  return id;
}

NodeId Tape::scale(NodeId x, double c) {
  const int n = node(x).n;
  NodeId id = push(Op::kScale, n);
  Node& nd = nodes_.back();
  nd.a = x;
  nd.c0 = c;
  const double* xi = vals_.data() + node(x).off;
  double* y = vals(nd);
  for (int i = 0; i < n; ++i) y[i] = c * xi[i];
  return id;
}

#define MOMA_BINARY(NAME, OPK, EXPR)                      \
  NodeId Tape::NAME(NodeId a, NodeId b) {                 \
    check_same_size(a, b, #NAME);                         \
    const int n = node(a).n;                              \
    NodeId id = push(Op::OPK, n);                         \
    Node& nd = nodes_.back();                             \
    nd.a = a;                                             \
    nd.b = b;                                             \
    const double* xa = vals_.data() + node(a).off;        \
    const double* xb = vals_.data() + node(b).off;        \
    double* y = vals(nd);                                 \
    for (int i = 0; i < n; ++i) y[i] = (EXPR);            \
    return id;                                            \
  }

MOMA_BINARY(add, kAdd, xa[i] + xb[i])
MOMA_BINARY(sub, kSub, xa[i] - xb[i])
MOMA_BINARY(mul, kMul, xa[i] * xb[i])
MOMA_BINARY(min2, kMin2, xa[i] <= xb[i] ? xa[i] : xb[i])
MOMA_BINARY(max2, kMax2, xa[i] >= xb[i] ? xa[i] : xb[i])
#undef MOMA_BINARY

NodeId Tape::concat(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("Tape::concat: no parts");
  int n = 0;
  for (NodeId p : parts) n += node(p).n;
  NodeId id = push(Op::kConcat, n);
  Node& nd = nodes_.back();
  nd.ext_off = static_cast<int>(ext_.size());
  nd.ext_n = static_cast<int>(parts.size());
  ext_.insert(ext_.end(), parts.begin(), parts.end());
  double* y = vals(nd);
  for (NodeId p : parts) {
    const Node& pn = node(p);
    std::memcpy(y, vals_.data() + pn.off, static_cast<std::size_t>(pn.n) * sizeof(double));
    y += pn.n;
  }
  return id;
}

NodeId Tape::slice(NodeId x, int offset, int len) {
  const Node& xn = node(x);
  if (offset < 0 || len < 1 || offset + len > xn.n) {
    throw std::invalid_argument("Tape::slice: out of range");
  }
  NodeId id = push(Op::kSlice, len);
  Node& nd = nodes_.back();
  nd.a = x;
  nd.c0 = offset;
  const double* xi = vals_.data() + node(x).off;
  std::memcpy(vals(nd), xi + offset, static_cast<std::size_t>(len) * sizeof(double));
  return id;
}

NodeId Tape::sum(NodeId x) {
  NodeId id = push(Op::kSum, 1);
  Node& nd = nodes_.back();
  nd.a = x;
  const Node& xn = node(x);
  const double* xi = vals_.data() + xn.off;
  double acc = 0.0;
  for (int i = 0; i < xn.n; ++i) acc += xi[i];
  *vals(nd) = acc;
  return id;
}

NodeId Tape::mean(NodeId x) {
  NodeId id = push(Op::kMean, 1);
  Node& nd = nodes_.back();
  nd.a = x;
  const Node& xn = node(x);
  const double* xi = vals_.data() + xn.off;
  double acc = 0.0;
  for (int i = 0; i < xn.n; ++i) acc += xi[i];
  *vals(nd) = acc / xn.n;
  return id;
}

NodeId Tape::dot(NodeId a, NodeId b) {
  check_same_size(a, b, "dot");
  NodeId id = push(Op::kDot, 1);
  Node& nd = nodes_.back();
  nd.a = a;
  nd.b = b;
  const Node& an = node(a);
  const double* xa = vals_.data() + an.off;
  const double* xb = vals_.data() + node(b).off;
  double acc = 0.0;
  for (int i = 0; i < an.n; ++i) acc += xa[i] * xb[i];
  *vals(nd) = acc;
  return id;
}

NodeId Tape::softmax(NodeId x) {
  const int n = node(x).n;
  NodeId id = push(Op::kSoftmax, n);
  Node& nd = nodes_.back();
  nd.a = x;
  const double* xi = vals_.data() + node(x).off;
  double* y = vals(nd);
  double mx = xi[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, xi[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    y[i] = std::exp(xi[i] - mx);
    z += y[i];
  }
  for (int i = 0; i < n; ++i) y[i] /= z;
  return id;
}

NodeId Tape::log_softmax(NodeId x) {
  const int n = node(x).n;
  NodeId id = push(Op::kLogSoftmax, n);
  Node& nd = nodes_.back();
  nd.a = x;
  const double* xi = vals_.data() + node(x).off;
  double* y = vals(nd);
  double mx = xi[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, xi[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(xi[i] - mx);
  const double lse = mx + std::log(z);
  for (int i = 0; i < n; ++i) y[i] = xi[i] - lse;
  return id;
}

NodeId Tape::axpy_combine(NodeId weights, std::span<const NodeId> vectors) {
  const Node& wn = node(weights);
  if (wn.n != static_cast<int>(vectors.size())) {
    throw std::invalid_argument("Tape::axpy_combine: weights/vectors count mismatch");
  }
  const int d = node(vectors[0]).n;
  for (NodeId v : vectors) {
    if (node(v).n != d) throw std::invalid_argument("Tape::axpy_combine: ragged vectors");
  }
  NodeId id = push(Op::kAxpy, d);
  Node& nd = nodes_.back();
  nd.a = weights;
  nd.ext_off = static_cast<int>(ext_.size());
  nd.ext_n = static_cast<int>(vectors.size());
  ext_.insert(ext_.end(), vectors.begin(), vectors.end());
  const double* w = vals_.data() + node(weights).off;
  double* y = vals(nd);
  std::fill(y, y + d, 0.0);
  for (int l = 0; l < nd.ext_n; ++l) {
    const double* v = vals_.data() + node(ext_[static_cast<std::size_t>(nd.ext_off) + l]).off;
    const double wl = w[l];
    for (int i = 0; i < d; ++i) y[i] += wl * v[i];
  }
  return id;
}

void Tape::backward(NodeId root) {
  const Node& rn = node(root);
  if (rn.n != 1) throw std::invalid_argument("Tape::backward: root must be scalar");
  grads_.assign(vals_.size(), 0.0);
  grads_[static_cast<std::size_t>(rn.off)] = 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& nd = *it;
    const double* g = grads_.data() + nd.off;
    switch (nd.op) {
      case Op::kConst:
        break;
      case Op::kParam: {
        auto pg = nd.ps->grads(nd.blk0);
        for (int i = 0; i < nd.n; ++i) pg[i] += g[i];
        break;
      }
      case Op::kAffine: {
        const Node& xn = node(nd.a);
        const int in = xn.n;
        const int out = nd.n;
        const double* xi = vals_.data() + xn.off;
        double* xg = grads_.data() + xn.off;
        const double* w = nd.ps->values(nd.blk0).data();
        double* wg = nd.ps->grads(nd.blk0).data();
        for (int i = 0; i < out; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const double* row = w + static_cast<std::size_t>(i) * in;
          double* grow = wg + static_cast<std::size_t>(i) * in;
          for (int j = 0; j < in; ++j) {
            grow[j] += gi * xi[j];
            xg[j] += gi * row[j];
          }
        }
        if (nd.blk1 >= 0) {
          double* bg = nd.ps->grads(nd.blk1).data();
          for (int i = 0; i < out; ++i) bg[i] += g[i];
        }
        break;
      }
      case Op::kLayerNorm: {
        const Node& xn = node(nd.a);
        const int n = nd.n;
        const double* xi = vals_.data() + xn.off;
        double* xg = grads_.data() + xn.off;
        const double* gain = nd.ps->values(nd.blk0).data();
        double* gain_g = nd.ps->grads(nd.blk0).data();
        double* bias_g = nd.ps->grads(nd.blk1).data();
        double mu = 0.0;
        for (int i = 0; i < n; ++i) mu += xi[i];
        mu /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) var += (xi[i] - mu) * (xi[i] - mu);
        var /= n;
        const double inv = 1.0 / std::sqrt(var + nd.c0);
        // ghat = dL/dxhat; dx = inv * (ghat - mean(ghat) - xhat * mean(ghat*xhat))
        double mean_gh = 0.0, mean_ghx = 0.0;
        for (int i = 0; i < n; ++i) {
          const double xhat = (xi[i] - mu) * inv;
          const double gh = g[i] * gain[i];
          gain_g[i] += g[i] * xhat;
          bias_g[i] += g[i];
          mean_gh += gh;
          mean_ghx += gh * xhat;
        }
        mean_gh /= n;
        mean_ghx /= n;
        for (int i = 0; i < n; ++i) {
          const double xhat = (xi[i] - mu) * inv;
          const double gh = g[i] * gain[i];
          xg[i] += inv * (gh - mean_gh - xhat * mean_ghx);
        }
        break;
      }
      case Op::kRelu: {
        const Node& xn = node(nd.a);
        const double* xi = vals_.data() + xn.off;
        double* xg = grads_.data() + xn.off;
        for (int i = 0; i < nd.n; ++i) xg[i] += xi[i] > 0.0 ? g[i] : 0.0;
        break;
      }
      case Op::kTanh: {
        const double* y = vals(nd);
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) xg[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kSigmoid: {
        const double* y = vals(nd);
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) xg[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::kExp: {
        const double* y = vals(nd);
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) xg[i] += g[i] * y[i];
        break;
      }
      case Op::kLog: {
        const double* xi = vals_.data() + node(nd.a).off;
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) xg[i] += g[i] / xi[i];
        break;
      }
      case Op::kAbs: {
        const double* xi = vals_.data() + node(nd.a).off;
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) {
          if (xi[i] > 0.0) xg[i] += g[i];
          else if (xi[i] < 0.0) xg[i] -= g[i];
        }
        break;
      }
      case Op::kNeg: {
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) xg[i] -= g[i];
        break;
      }
      case Op::kClamp: {
        const double* xi = vals_.data() + node(nd.a).off;
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) {
          if (xi[i] > nd.c0 && xi[i] < nd.c1) xg[i] += g[i];
        }
        break;
      }
      case Op::kAddScalar: {
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) xg[i] += g[i];
        break;
      }
      case Op::kScale: {
        double* xg = grads_.data() + node(nd.a).off;
        for (int i = 0; i < nd.n; ++i) xg[i] += nd.c0 * g[i];
        break;
      }
      case Op::kAdd: {
        double* ag = grads_.data() + node(nd.a).off;
        double* bg = grads_.data() + node(nd.b).off;
        for (int i = 0; i < nd.n; ++i) {
          ag[i] += g[i];
          bg[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        double* ag = grads_.data() + node(nd.a).off;
        double* bg = grads_.data() + node(nd.b).off;
        for (int i = 0; i < nd.n; ++i) {
          ag[i] += g[i];
          bg[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        const double* xa = vals_.data() + node(nd.a).off;
        const double* xb = vals_.data() + node(nd.b).off;
        double* ag = grads_.data() + node(nd.a).off;
        double* bg = grads_.data() + node(nd.b).off;
        for (int i = 0; i < nd.n; ++i) {
          ag[i] += g[i] * xb[i];
          bg[i] += g[i] * xa[i];
        }
        break;
      }
      case Op::kMin2:
      case Op::kMax2: {
        const double* xa = vals_.data() + node(nd.a).off;
        const double* xb = vals_.data() + node(nd.b).off;
        double* ag = grads_.data() + node(nd.a).off;
        double* bg = grads_.data() + node(nd.b).off;
        const bool is_min = nd.op == Op::kMin2;
        for (int i = 0; i < nd.n; ++i) {
          // ties route to the first operand
          const bool pick_a = is_min ? xa[i] <= xb[i] : xa[i] >= xb[i];
          (pick_a ? ag : bg)[i] += g[i];
        }
        break;
      }
      case Op::kConcat: {
        const double* gp = g;
        for (int l = 0; l < nd.ext_n; ++l) {
          const Node& pn = node(ext_[static_cast<std::size_t>(nd.ext_off) + l]);
          double* pg = grads_.data() + pn.off;
          for (int i = 0; i < pn.n; ++i) pg[i] += gp[i];
          gp += pn.n;
        }
        break;
      }
      case Op::kSlice: {
        double* xg = grads_.data() + node(nd.a).off + static_cast<int>(nd.c0);
        for (int i = 0; i < nd.n; ++i) xg[i] += g[i];
        break;
      }
      case Op::kSum: {
        const Node& xn = node(nd.a);
        double* xg = grads_.data() + xn.off;
        for (int i = 0; i < xn.n; ++i) xg[i] += g[0];
        break;
      }
      case Op::kMean: {
        const Node& xn = node(nd.a);
        double* xg = grads_.data() + xn.off;
        const double gi = g[0] / xn.n;
        for (int i = 0; i < xn.n; ++i) xg[i] += gi;
        break;
      }
      case Op::kDot: {
        const Node& an = node(nd.a);
        const double* xa = vals_.data() + an.off;
        const double* xb = vals_.data() + node(nd.b).off;
        double* ag = grads_.data() + an.off;
        double* bg = grads_.data() + node(nd.b).off;
        for (int i = 0; i < an.n; ++i) {
          ag[i] += g[0] * xb[i];
          bg[i] += g[0] * xa[i];
        }
        break;
      }
      case Op::kSoftmax: {
        const double* y = vals(nd);
        double* xg = grads_.data() + node(nd.a).off;
        double gy = 0.0;
        for (int i = 0; i < nd.n; ++i) gy += g[i] * y[i];
        for (int i = 0; i < nd.n; ++i) xg[i] += y[i] * (g[i] - gy);
        break;
      }
      case Op::kLogSoftmax: {
        const double* y = vals(nd);
        double* xg = grads_.data() + node(nd.a).off;
        double gs = 0.0;
        for (int i = 0; i < nd.n; ++i) gs += g[i];
        for (int i = 0; i < nd.n; ++i) xg[i] += g[i] - std::exp(y[i]) * gs;
        break;
      }
      case Op::kAxpy: {
        const Node& wn = node(nd.a);
        const double* w = vals_.data() + wn.off;
        double* wg = grads_.data() + wn.off;
        for (int l = 0; l < nd.ext_n; ++l) {
          const Node& vn = node(ext_[static_cast<std::size_t>(nd.ext_off) + l]);
          const double* v = vals_.data() + vn.off;
          double* vg = grads_.data() + vn.off;
          double acc = 0.0;
          const double wl = w[l];
          for (int i = 0; i < nd.n; ++i) {
            acc += g[i] * v[i];
            vg[i] += wl * g[i];
          }
          wg[l] += acc;
        }
        break;
      }
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  vals_.clear();
  grads_.clear();
  ext_.clear();
}

}  // namespace moma::nn
