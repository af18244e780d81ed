// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense arrays of doubles.
//
// A Tape owns every intermediate of one loss evaluation: values and gradients
// live in append-only arenas and nodes record the primitive that produced
// them. Construction order is topological by construction, so backward() is a
// single reverse sweep with a switch per primitive. Tensors are cheap handles
// (tape pointer + node index) and never outlive their tape.
//
// Tapes are single-owner objects: one worker builds, runs backward once, and
// drops the tape. Nothing here locks.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "awe/array.hpp"

namespace awe::ad {

class Tape;

class Tensor {
 public:
  Tensor() = default;

  Shape shape() const;
  std::size_t size() const;
  std::span<const double> value() const;
  // Gradient after backward(); zero until then. Only requires_grad tensors
  // carry a buffer.
  std::span<const double> grad() const;
  bool requires_grad() const;

  Array to_array() const;
  double item() const;  // value of a single-element tensor

  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return node_; }

 private:
  friend class Tape;
  Tensor(Tape* t, std::uint32_t n) : tape_(t), node_(n) {}

  Tape* tape_ = nullptr;
  std::uint32_t node_ = 0;
};

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMatmul,
  kSigmoid,
  kTanh,
  kExp,
  kLog,
  kSquare,
  kSqrt,
  kSumAll,
  kSumAxis,
  kMeanAll,
  kMaxAll,
  kConcat,
  kSlice,
  kBroadcastRows,
  kScale,
  kAddScalar,
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(const Array& a, bool requires_grad = false);
  Tensor leaf(const Shape& shape, std::span<const double> values,
              bool requires_grad = false);
  Tensor constant(double v);  // shape {1}

  // Seeds d(root)/d(root) = 1 and propagates down the tape. Gradients of
  // every requires_grad tensor reachable from root accumulate (sum) across
  // uses; max routes its gradient to the first argmax element.
  void backward(Tensor root);

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  friend class Tensor;

  // Fixed-capacity shape so nodes stay flat. Nothing in this library needs
  // rank above 2; 4 leaves headroom.
  struct NShape {
    std::uint8_t rank = 0;
    std::uint32_t d[4] = {1, 1, 1, 1};
    std::size_t numel() const {
      std::size_t n = 1;
      for (int i = 0; i < rank; ++i) n *= d[i];
      return n;
    }
    bool operator==(const NShape& o) const {
      if (rank != o.rank) return false;
      for (int i = 0; i < rank; ++i)
        if (d[i] != o.d[i]) return false;
      return true;
    }
  };

  struct Node {
    NShape shape;
    double* value = nullptr;
    double* grad = nullptr;  // null unless requires_grad
    Op op = Op::kLeaf;
    bool requires_grad = false;
    bool touched = false;  // backward wrote a nonzero-able gradient here
    std::uint32_t in0 = 0;
    std::uint32_t in1 = 0;
    std::uint32_t extra_begin = 0;  // concat: extra input range in input_pool_
    std::uint32_t extra_count = 0;
    std::uint32_t aux0 = 0;  // axis / argmax index / slice begin / row count
    std::uint32_t aux1 = 0;  // slice end
    double c = 0.0;          // scale factor / added constant
  };

  static NShape to_nshape(const Shape& s, const char* op_name);
  static Shape from_nshape(const NShape& s);

  double* arena_alloc(std::size_t n);
  Tensor emplace(Op op, NShape shape, bool requires_grad, std::uint32_t in0,
                 std::uint32_t in1);

  void backward_node(std::uint32_t idx);

  static constexpr std::size_t kChunkDoubles = std::size_t{1} << 16;
  std::vector<std::unique_ptr<double[]>> chunks_;
  double* cur_ = nullptr;
  std::size_t left_ = 0;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> input_pool_;
  bool backward_done_ = false;

  // Primitive constructors reach into the tape directly.
  friend Tensor add(Tensor, Tensor);
  friend Tensor sub(Tensor, Tensor);
  friend Tensor mul(Tensor, Tensor);
  friend Tensor divide(Tensor, Tensor);
  friend Tensor matmul(Tensor, Tensor);
  friend Tensor sigmoid(Tensor);
  friend Tensor tanh(Tensor);
  friend Tensor exp(Tensor);
  friend Tensor log(Tensor);
  friend Tensor square(Tensor);
  friend Tensor sqrt(Tensor);
  friend Tensor sum_all(Tensor);
  friend Tensor sum_axis(Tensor, std::size_t);
  friend Tensor mean_all(Tensor);
  friend Tensor max_all(Tensor);
  friend Tensor concat(std::span<const Tensor>, std::size_t);
  friend Tensor slice(Tensor, std::size_t, std::size_t, std::size_t);
  friend Tensor broadcast_rows(Tensor, std::size_t);
  friend Tensor scale(Tensor, double);
  friend Tensor add_scalar(Tensor, double);
};

// Elementwise; shapes must match exactly (no implicit broadcasting).
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor divide(Tensor a, Tensor b);

// {M,K} x {K,N} -> {M,N}
Tensor matmul(Tensor a, Tensor b);

Tensor sigmoid(Tensor x);
Tensor tanh(Tensor x);
Tensor exp(Tensor x);
Tensor log(Tensor x);
Tensor square(Tensor x);
Tensor sqrt(Tensor x);

Tensor sum_all(Tensor x);                     // -> {1}
Tensor sum_axis(Tensor x, std::size_t axis);  // 2-d only; drops the axis
Tensor mean_all(Tensor x);                    // -> {1}
// Max over all elements with argmax capture; ties resolve to the lowest
// index and the gradient flows only there.
Tensor max_all(Tensor x);  // -> {1}

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
// Half-open [begin, end) along axis; rank 1 or 2.
Tensor slice(Tensor x, std::size_t axis, std::size_t begin, std::size_t end);
// {D} or {1,D} replicated to {rows,D}.
Tensor broadcast_rows(Tensor v, std::size_t rows);

Tensor scale(Tensor x, double c);       // c * x
Tensor add_scalar(Tensor x, double c);  // x + c
inline Tensor neg(Tensor x) { return scale(x, -1.0); }

}  // namespace awe::ad
