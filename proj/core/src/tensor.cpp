// SPDX-License-Identifier: Apache-2.0

#include "awe/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace awe {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace awe

namespace awe::ad {

namespace {

[[noreturn]] void fail(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

void require_same_tape(const char* op, Tensor a, Tensor b) {
  if (a.tape() == nullptr || b.tape() == nullptr) fail(op, "unbound tensor handle");
  if (a.tape() != b.tape()) fail(op, "tensors belong to different tapes");
}

void require_same_shape(const char* op, Tensor a, Tensor b) {
  if (a.shape() != b.shape())
    fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor handle

Shape Tensor::shape() const {
  const auto& n = tape_->nodes_[node_];
  return Tape::from_nshape(n.shape);
}

std::size_t Tensor::size() const { return tape_->nodes_[node_].shape.numel(); }

std::span<const double> Tensor::value() const {
  const auto& n = tape_->nodes_[node_];
  return {n.value, n.shape.numel()};
}

std::span<const double> Tensor::grad() const {
  const auto& n = tape_->nodes_[node_];
  if (n.grad == nullptr)
    throw std::logic_error("Tensor::grad: tensor does not require gradients");
  return {n.grad, n.shape.numel()};
}

bool Tensor::requires_grad() const { return tape_->nodes_[node_].requires_grad; }

Array Tensor::to_array() const {
  auto v = value();
  return Array(shape(), std::vector<double>(v.begin(), v.end()));
}

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("Tensor::item: tensor is not a scalar");
  return value()[0];
}

// ---------------------------------------------------------------------------
// Tape

Tape::NShape Tape::to_nshape(const Shape& s, const char* op_name) {
  if (s.size() > 4) fail(op_name, "rank " + std::to_string(s.size()) + " exceeds supported rank 4");
  NShape out;
  out.rank = static_cast<std::uint8_t>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == 0) fail(op_name, "zero extent in shape " + shape_str(s));
    out.d[i] = static_cast<std::uint32_t>(s[i]);
  }
  return out;
}

Shape Tape::from_nshape(const NShape& s) {
  Shape out(s.rank);
  for (int i = 0; i < s.rank; ++i) out[i] = s.d[i];
  return out;
}

double* Tape::arena_alloc(std::size_t n) {
  if (n > kChunkDoubles) {
    // Oversized request gets its own chunk; the active chunk keeps its space.
    chunks_.push_back(std::make_unique<double[]>(n));
    return chunks_.back().get();
  }
  if (left_ < n) {
    chunks_.push_back(std::make_unique<double[]>(kChunkDoubles));
    cur_ = chunks_.back().get();
    left_ = kChunkDoubles;
  }
  double* p = cur_;
  cur_ += n;
  left_ -= n;
  return p;
}

Tensor Tape::emplace(Op op, NShape shape, bool requires_grad, std::uint32_t in0,
                     std::uint32_t in1) {
  Node n;
  n.shape = shape;
  const std::size_t count = shape.numel();
  n.value = arena_alloc(count);
  // make_unique value-initializes chunks, and arenas are append-only, so a
  // fresh gradient buffer is already zero.
  n.grad = requires_grad ? arena_alloc(count) : nullptr;
  n.op = requires_grad ? op : Op::kLeaf;
  n.requires_grad = requires_grad;
  n.in0 = in0;
  n.in1 = in1;
  nodes_.push_back(n);
  return Tensor(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor Tape::leaf(const Array& a, bool requires_grad) {
  return leaf(a.shape, a.data, requires_grad);
}

Tensor Tape::leaf(const Shape& shape, std::span<const double> values,
                  bool requires_grad) {
  if (numel(shape) != values.size())
    fail("leaf", "shape " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  Tensor t = emplace(Op::kLeaf, to_nshape(shape, "leaf"), requires_grad, 0, 0);
  std::memcpy(nodes_[t.node_].value, values.data(), values.size() * sizeof(double));
  return t;
}

Tensor Tape::constant(double v) {
  Tensor t = emplace(Op::kLeaf, to_nshape({1}, "constant"), false, 0, 0);
  nodes_[t.node_].value[0] = v;
  return t;
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

bool any_grad(Tensor a) { return a.requires_grad(); }
bool any_grad(Tensor a, Tensor b) { return a.requires_grad() || b.requires_grad(); }

}  // namespace

#define AWE_BINARY_ELEMENTWISE(NAME, OPK, EXPR)                               \
  Tensor NAME(Tensor a, Tensor b) {                                          \
    require_same_tape(#NAME, a, b);                                          \
    require_same_shape(#NAME, a, b);                                         \
    Tape& tp = *a.tape();                                                    \
    Tensor out = tp.emplace(OPK, tp.nodes_[a.index()].shape, any_grad(a, b),   \
                            a.index(), b.index());                               \
    const double* av = tp.nodes_[a.index()].value;                             \
    const double* bv = tp.nodes_[b.index()].value;                             \
    double* ov = tp.nodes_[out.index()].value;                                 \
    const std::size_t n = out.size();                                        \
    for (std::size_t i = 0; i < n; ++i) ov[i] = (EXPR);                      \
    return out;                                                              \
  }

AWE_BINARY_ELEMENTWISE(add, Op::kAdd, av[i] + bv[i])
AWE_BINARY_ELEMENTWISE(sub, Op::kSub, av[i] - bv[i])
AWE_BINARY_ELEMENTWISE(mul, Op::kMul, av[i] * bv[i])
AWE_BINARY_ELEMENTWISE(divide, Op::kDiv, av[i] / bv[i])

#undef AWE_BINARY_ELEMENTWISE

#define AWE_UNARY_ELEMENTWISE(NAME, OPK, EXPR)                                 \
  Tensor NAME(Tensor x) {                                                     \
    if (x.tape() == nullptr) fail(#NAME, "unbound tensor handle");             \
    Tape& tp = *x.tape();                                                      \
    Tensor out =                                                               \
        tp.emplace(OPK, tp.nodes_[x.index()].shape, any_grad(x), x.index(), 0);    \
    const double* xv = tp.nodes_[x.index()].value;                               \
    double* ov = tp.nodes_[out.index()].value;                                   \
    const std::size_t n = out.size();                                          \
    for (std::size_t i = 0; i < n; ++i) ov[i] = (EXPR);                        \
    return out;                                                                \
  }

AWE_UNARY_ELEMENTWISE(sigmoid, Op::kSigmoid, 1.0 / (1.0 + std::exp(-xv[i])))
AWE_UNARY_ELEMENTWISE(tanh, Op::kTanh, std::tanh(xv[i]))
AWE_UNARY_ELEMENTWISE(exp, Op::kExp, std::exp(xv[i]))
AWE_UNARY_ELEMENTWISE(log, Op::kLog, std::log(xv[i]))
AWE_UNARY_ELEMENTWISE(square, Op::kSquare, xv[i] * xv[i])
AWE_UNARY_ELEMENTWISE(sqrt, Op::kSqrt, std::sqrt(xv[i]))

#undef AWE_UNARY_ELEMENTWISE

Tensor matmul(Tensor a, Tensor b) {
  require_same_tape("matmul", a, b);
  Tape& tp = *a.tape();
  const auto& na = tp.nodes_[a.index()];
  const auto& nb = tp.nodes_[b.index()];
  if (na.shape.rank != 2 || nb.shape.rank != 2)
    fail("matmul", "expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
  if (na.shape.d[1] != nb.shape.d[0])
    fail("matmul", "inner dimensions disagree " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  const std::size_t m = na.shape.d[0], k = na.shape.d[1], ncol = nb.shape.d[1];
  Tape::NShape os;
  os.rank = 2;
  os.d[0] = static_cast<std::uint32_t>(m);
  os.d[1] = static_cast<std::uint32_t>(ncol);
  Tensor out = tp.emplace(Op::kMatmul, os, any_grad(a, b), a.index(), b.index());
  const double* av = tp.nodes_[a.index()].value;
  const double* bv = tp.nodes_[b.index()].value;
  double* ov = tp.nodes_[out.index()].value;
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = ov + i * ncol;
    for (std::size_t j = 0; j < ncol; ++j) orow[j] = 0.0;
    const double* arow = av + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double apv = arow[p];
      const double* brow = bv + p * ncol;
      for (std::size_t j = 0; j < ncol; ++j) orow[j] += apv * brow[j];
    }
  }
  return out;
}

Tensor sum_all(Tensor x) {
  Tape& tp = *x.tape();
  Tensor out = tp.emplace(Op::kSumAll, Tape::to_nshape({1}, "sum_all"), any_grad(x),
                          x.index(), 0);
  const double* xv = tp.nodes_[x.index()].value;
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += xv[i];
  tp.nodes_[out.index()].value[0] = s;
  return out;
}

Tensor sum_axis(Tensor x, std::size_t axis) {
  Tape& tp = *x.tape();
  const auto& nx = tp.nodes_[x.index()];
  if (nx.shape.rank != 2)
    fail("sum_axis", "expects a rank-2 operand, got " + shape_str(x.shape()));
  if (axis > 1) fail("sum_axis", "axis " + std::to_string(axis) + " out of range");
  const std::size_t rows = nx.shape.d[0], cols = nx.shape.d[1];
  Shape out_shape = axis == 0 ? Shape{cols} : Shape{rows};
  Tensor out = tp.emplace(Op::kSumAxis, Tape::to_nshape(out_shape, "sum_axis"),
                          any_grad(x), x.index(), 0);
  tp.nodes_[out.index()].aux0 = static_cast<std::uint32_t>(axis);
  const double* xv = tp.nodes_[x.index()].value;
  double* ov = tp.nodes_[out.index()].value;
  if (axis == 0) {
    for (std::size_t j = 0; j < cols; ++j) ov[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = xv + i * cols;
      for (std::size_t j = 0; j < cols; ++j) ov[j] += row[j];
    }
  } else {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = xv + i * cols;
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += row[j];
      ov[i] = s;
    }
  }
  return out;
}

Tensor mean_all(Tensor x) {
  Tape& tp = *x.tape();
  Tensor out = tp.emplace(Op::kMeanAll, Tape::to_nshape({1}, "mean_all"),
                          any_grad(x), x.index(), 0);
  const double* xv = tp.nodes_[x.index()].value;
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += xv[i];
  tp.nodes_[out.index()].value[0] = s / static_cast<double>(n);
  return out;
}

Tensor max_all(Tensor x) {
  Tape& tp = *x.tape();
  Tensor out =
      tp.emplace(Op::kMaxAll, Tape::to_nshape({1}, "max_all"), any_grad(x), x.index(), 0);
  const double* xv = tp.nodes_[x.index()].value;
  const std::size_t n = x.size();
  std::size_t arg = 0;
  double best = xv[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (xv[i] > best) {  // strict: ties keep the first index
      best = xv[i];
      arg = i;
    }
  }
  tp.nodes_[out.index()].value[0] = best;
  tp.nodes_[out.index()].aux0 = static_cast<std::uint32_t>(arg);
  return out;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) fail("concat", "no inputs");
  Tape& tp = *parts[0].tape();
  // Copied, not referenced: emplace below may reallocate nodes_.
  const Tape::NShape first_shape = tp.nodes_[parts[0].index()].shape;
  const std::uint8_t rank = first_shape.rank;
  if (rank != 1 && rank != 2)
    fail("concat", "expects rank 1 or 2 operands, got " + shape_str(parts[0].shape()));
  if (axis >= rank) fail("concat", "axis " + std::to_string(axis) + " out of range");
  bool grad = false;
  std::size_t along = 0;
  for (const Tensor& t : parts) {
    require_same_tape("concat", parts[0], t);
    const Tape::NShape tshape = tp.nodes_[t.index()].shape;
    if (tshape.rank != rank)
      fail("concat", "rank mismatch " + shape_str(parts[0].shape()) + " vs " +
                         shape_str(t.shape()));
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && tshape.d[d] != first_shape.d[d])
        fail("concat", "shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(t.shape()));
    }
    along += tshape.d[axis];
    grad = grad || t.requires_grad();
  }
  Tape::NShape os = first_shape;
  os.d[axis] = static_cast<std::uint32_t>(along);
  Tensor out = tp.emplace(Op::kConcat, os, grad, 0, 0);
  auto& on = tp.nodes_[out.index()];
  on.aux0 = static_cast<std::uint32_t>(axis);
  on.extra_begin = static_cast<std::uint32_t>(tp.input_pool_.size());
  on.extra_count = static_cast<std::uint32_t>(parts.size());
  for (const Tensor& t : parts) tp.input_pool_.push_back(t.index());

  double* ov = on.value;
  if (rank == 1 || axis == 0) {
    std::size_t off = 0;
    for (const Tensor& t : parts) {
      auto v = t.value();
      std::memcpy(ov + off, v.data(), v.size() * sizeof(double));
      off += v.size();
    }
  } else {  // rank 2, axis 1
    const std::size_t rows = first_shape.d[0];
    const std::size_t out_cols = along;
    std::size_t col_off = 0;
    for (const Tensor& t : parts) {
      const auto& n = tp.nodes_[t.index()];
      const std::size_t cols = n.shape.d[1];
      for (std::size_t i = 0; i < rows; ++i)
        std::memcpy(ov + i * out_cols + col_off, n.value + i * cols,
                    cols * sizeof(double));
      col_off += cols;
    }
  }
  return out;
}

Tensor slice(Tensor x, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& tp = *x.tape();
  // Copy what we need out of the node: emplace below may reallocate nodes_.
  const Tape::NShape in_shape = tp.nodes_[x.index()].shape;
  if (in_shape.rank != 1 && in_shape.rank != 2)
    fail("slice", "expects rank 1 or 2, got " + shape_str(x.shape()));
  if (axis >= in_shape.rank) fail("slice", "axis " + std::to_string(axis) + " out of range");
  if (begin >= end || end > in_shape.d[axis])
    fail("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                      ") invalid for " + shape_str(x.shape()));
  Tape::NShape os = in_shape;
  os.d[axis] = static_cast<std::uint32_t>(end - begin);
  Tensor out = tp.emplace(Op::kSlice, os, any_grad(x), x.index(), 0);
  auto& on = tp.nodes_[out.index()];
  on.aux0 = static_cast<std::uint32_t>(begin);
  on.aux1 = static_cast<std::uint32_t>(axis);
  const double* xv = tp.nodes_[x.index()].value;
  double* ov = on.value;
  if (in_shape.rank == 1 || axis == 0) {
    const std::size_t width = in_shape.rank == 2 ? in_shape.d[1] : 1;
    std::memcpy(ov, xv + begin * width, (end - begin) * width * sizeof(double));
  } else {
    const std::size_t rows = in_shape.d[0], cols = in_shape.d[1];
    const std::size_t w = end - begin;
    for (std::size_t i = 0; i < rows; ++i)
      std::memcpy(ov + i * w, xv + i * cols + begin, w * sizeof(double));
  }
  return out;
}

Tensor broadcast_rows(Tensor v, std::size_t rows) {
  Tape& tp = *v.tape();
  const auto& nv = tp.nodes_[v.index()];
  std::size_t dim = 0;
  if (nv.shape.rank == 1) {
    dim = nv.shape.d[0];
  } else if (nv.shape.rank == 2 && nv.shape.d[0] == 1) {
    dim = nv.shape.d[1];
  } else {
    fail("broadcast_rows", "expects {D} or {1,D}, got " + shape_str(v.shape()));
  }
  if (rows == 0) fail("broadcast_rows", "row count must be positive");
  Tape::NShape os;
  os.rank = 2;
  os.d[0] = static_cast<std::uint32_t>(rows);
  os.d[1] = static_cast<std::uint32_t>(dim);
  Tensor out = tp.emplace(Op::kBroadcastRows, os, any_grad(v), v.index(), 0);
  const double* vv = tp.nodes_[v.index()].value;
  double* ov = tp.nodes_[out.index()].value;
  for (std::size_t i = 0; i < rows; ++i)
    std::memcpy(ov + i * dim, vv, dim * sizeof(double));
  return out;
}

Tensor scale(Tensor x, double c) {
  Tape& tp = *x.tape();
  Tensor out = tp.emplace(Op::kScale, tp.nodes_[x.index()].shape, any_grad(x), x.index(), 0);
  tp.nodes_[out.index()].c = c;
  const double* xv = tp.nodes_[x.index()].value;
  double* ov = tp.nodes_[out.index()].value;
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) ov[i] = c * xv[i];
  return out;
}

Tensor add_scalar(Tensor x, double c) {
  Tape& tp = *x.tape();
  Tensor out =
      tp.emplace(Op::kAddScalar, tp.nodes_[x.index()].shape, any_grad(x), x.index(), 0);
  tp.nodes_[out.index()].c = c;
  const double* xv = tp.nodes_[x.index()].value;
  double* ov = tp.nodes_[out.index()].value;
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) ov[i] = xv[i] + c;
  return out;
}

// ---------------------------------------------------------------------------
// Backward sweep

void Tape::backward(Tensor root) {
  if (root.tape() != this) throw std::invalid_argument("backward: root from another tape");
  if (backward_done_)
    throw std::logic_error("backward: tape already differentiated; build a fresh tape");
  Node& rn = nodes_[root.node_];
  if (rn.shape.numel() != 1)
    throw std::invalid_argument("backward: root must be a scalar, got shape " +
                                shape_str(root.shape()));
  backward_done_ = true;
  if (!rn.requires_grad) return;  // nothing reachable requires gradients
  rn.grad[0] += 1.0;
  rn.touched = true;
  for (std::uint32_t i = root.node_ + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.touched || n.op == Op::kLeaf) continue;
    backward_node(i);
  }
}

void Tape::backward_node(std::uint32_t idx) {
  Node& n = nodes_[idx];
  const double* g = n.grad;
  const std::size_t count = n.shape.numel();

  auto sink = [&](std::uint32_t in) -> Node* {
    Node& m = nodes_[in];
    if (!m.requires_grad) return nullptr;
    m.touched = true;
    return &m;
  };

  switch (n.op) {
    case Op::kAdd: {
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i];
      if (Node* b = sink(n.in1))
        for (std::size_t i = 0; i < count; ++i) b->grad[i] += g[i];
      break;
    }
    case Op::kSub: {
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i];
      if (Node* b = sink(n.in1))
        for (std::size_t i = 0; i < count; ++i) b->grad[i] -= g[i];
      break;
    }
    case Op::kMul: {
      const double* av = nodes_[n.in0].value;
      const double* bv = nodes_[n.in1].value;
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i] * bv[i];
      if (Node* b = sink(n.in1))
        for (std::size_t i = 0; i < count; ++i) b->grad[i] += g[i] * av[i];
      break;
    }
    case Op::kDiv: {
      const double* av = nodes_[n.in0].value;
      const double* bv = nodes_[n.in1].value;
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i] / bv[i];
      if (Node* b = sink(n.in1))
        for (std::size_t i = 0; i < count; ++i)
          b->grad[i] -= g[i] * av[i] / (bv[i] * bv[i]);
      break;
    }
    case Op::kMatmul: {
      const Node& na = nodes_[n.in0];
      const Node& nb = nodes_[n.in1];
      const std::size_t m = na.shape.d[0], k = na.shape.d[1], ncol = nb.shape.d[1];
      if (Node* a = sink(n.in0)) {
        // dA = dC * B^T, as row-by-row dot products over contiguous memory.
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g + i * ncol;
          double* arow = a->grad + i * k;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = nb.value + p * ncol;
            double s = 0.0;
            for (std::size_t j = 0; j < ncol; ++j) s += grow[j] * brow[j];
            arow[p] += s;
          }
        }
      }
      if (Node* b = sink(n.in1)) {
        // dB = A^T * dC
        for (std::size_t i = 0; i < m; ++i) {
          const double* arow = na.value + i * k;
          const double* grow = g + i * ncol;
          for (std::size_t p = 0; p < k; ++p) {
            const double apv = arow[p];
            double* brow = b->grad + p * ncol;
            for (std::size_t j = 0; j < ncol; ++j) brow[j] += apv * grow[j];
          }
        }
      }
      break;
    }
    case Op::kSigmoid: {
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i)
          a->grad[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    }
    case Op::kTanh: {
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i)
          a->grad[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case Op::kExp: {
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i] * n.value[i];
      break;
    }
    case Op::kLog: {
      const double* xv = nodes_[n.in0].value;
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i] / xv[i];
      break;
    }
    case Op::kSquare: {
      const double* xv = nodes_[n.in0].value;
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += 2.0 * g[i] * xv[i];
      break;
    }
    case Op::kSqrt: {
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i)
          a->grad[i] += g[i] * 0.5 / n.value[i];
      break;
    }
    case Op::kSumAll: {
      if (Node* a = sink(n.in0)) {
        const std::size_t m = a->shape.numel();
        const double gv = g[0];
        for (std::size_t i = 0; i < m; ++i) a->grad[i] += gv;
      }
      break;
    }
    case Op::kSumAxis: {
      if (Node* a = sink(n.in0)) {
        const std::size_t rows = a->shape.d[0], cols = a->shape.d[1];
        if (n.aux0 == 0) {
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) a->grad[i * cols + j] += g[j];
        } else {
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) a->grad[i * cols + j] += g[i];
        }
      }
      break;
    }
    case Op::kMeanAll: {
      if (Node* a = sink(n.in0)) {
        const std::size_t m = a->shape.numel();
        const double gv = g[0] / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) a->grad[i] += gv;
      }
      break;
    }
    case Op::kMaxAll: {
      if (Node* a = sink(n.in0)) a->grad[n.aux0] += g[0];
      break;
    }
    case Op::kConcat: {
      const std::size_t axis = n.aux0;
      if (n.shape.rank == 1 || axis == 0) {
        std::size_t off = 0;
        for (std::uint32_t e = 0; e < n.extra_count; ++e) {
          const std::uint32_t in = input_pool_[n.extra_begin + e];
          const std::size_t sz = nodes_[in].shape.numel();
          if (Node* a = sink(in))
            for (std::size_t i = 0; i < sz; ++i) a->grad[i] += g[off + i];
          off += sz;
        }
      } else {
        const std::size_t rows = n.shape.d[0], out_cols = n.shape.d[1];
        std::size_t col_off = 0;
        for (std::uint32_t e = 0; e < n.extra_count; ++e) {
          const std::uint32_t in = input_pool_[n.extra_begin + e];
          const std::size_t cols = nodes_[in].shape.d[1];
          if (Node* a = sink(in))
            for (std::size_t i = 0; i < rows; ++i)
              for (std::size_t j = 0; j < cols; ++j)
                a->grad[i * cols + j] += g[i * out_cols + col_off + j];
          col_off += cols;
        }
      }
      break;
    }
    case Op::kSlice: {
      if (Node* a = sink(n.in0)) {
        const std::size_t begin = n.aux0, axis = n.aux1;
        if (a->shape.rank == 1 || axis == 0) {
          const std::size_t width = a->shape.rank == 2 ? a->shape.d[1] : 1;
          double* dst = a->grad + begin * width;
          for (std::size_t i = 0; i < count; ++i) dst[i] += g[i];
        } else {
          const std::size_t rows = a->shape.d[0], cols = a->shape.d[1];
          const std::size_t w = n.shape.d[1];
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < w; ++j)
              a->grad[i * cols + begin + j] += g[i * w + j];
        }
      }
      break;
    }
    case Op::kBroadcastRows: {
      if (Node* a = sink(n.in0)) {
        const std::size_t rows = n.shape.d[0], dim = n.shape.d[1];
        for (std::size_t i = 0; i < rows; ++i) {
          const double* grow = g + i * dim;
          for (std::size_t j = 0; j < dim; ++j) a->grad[j] += grow[j];
        }
      }
      break;
    }
    case Op::kScale: {
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += n.c * g[i];
      break;
    }
    case Op::kAddScalar: {
      if (Node* a = sink(n.in0))
        for (std::size_t i = 0; i < count; ++i) a->grad[i] += g[i];
      break;
    }
    case Op::kLeaf:
      break;
  }
}

}  // namespace awe::ad
