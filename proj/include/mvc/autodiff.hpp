#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvc/tensor.hpp"

namespace mvc {

enum class Activation { identity, relu, tanh, softplus };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

enum class OpKind {
  constant,
  parameter,
  matmul,
  matmul_nt,
  add,
  sub,
  mul,
  add_row,
  add_col,
  mul_col,
  scale,
  shift,
  activation,
  exp,
  log,
  square,
  clamp,
  xlogx,
  sum,
  row_sum,
  concat_cols,
  slice_cols,
  softmax_rows,
  log_softmax_rows,
  logsumexp_rows,
  sq_dist,
  normalize_rows,
};

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Parameter id -> d(loss)/d(parameter).
using Gradients = std::map<std::size_t, Tensor>;

// Records forward values of a computation in topological order and replays
// it backwards. Gradients are accumulated when a node has several consumers.
class Tape {
 public:
  struct Node {
    OpKind kind;
    Tensor value;
    std::vector<std::size_t> parents;
    std::function<void(Tape&, const Node&, const Tensor&)> backward;
    std::optional<std::size_t> param_id;
    bool requires_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf without gradient. Values must be finite.
  Var constant(Tensor value);
  // Leaf whose gradient is reported under `param_id`. Registering the same id
  // twice returns the first node.
  Var parameter(std::size_t param_id, const Tensor& value);
  // Registers values[i] under id i.
  std::vector<Var> parameters(std::span<const Tensor> values);

  const Tensor& value(Var v) const;
  const Node& node(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Returns gradients for every registered
  // parameter (zeros for parameters the loss does not reach).
  Gradients backward(Var loss);

  // Adjoint of an arbitrary node after the last backward(); zeros if the node
  // received no gradient.
  Tensor grad(Var v) const;

  // Op construction interface used by the free functions below.
  Var record(OpKind kind, Tensor value, std::vector<Var> parents,
             std::function<void(Tape&, const Node&, const Tensor&)> backward);
  const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
  // Gradient accumulator for node `id`, or nullptr if it needs none.
  Tensor* grad_slot(std::size_t id);

 private:
  void check_owned(Var v) const;

  // Deque keeps node references valid while new nodes are recorded.
  std::deque<Node> nodes_;
  std::vector<Tensor> adjoints_;
  std::map<std::size_t, std::size_t> param_nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Every Var must come from the same tape.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a[n x m] + row[1 x m] broadcast over rows.
Var add_row(Var a, Var row);
// a[n x m] + col[n x 1] broadcast over columns.
Var add_col(Var a, Var col);
// a[n x m] * col[n x 1] broadcast over columns.
Var mul_col(Var a, Var col);
Var scale(Var a, double factor);
Var shift(Var a, double offset);
Var activate(Var a, Activation act);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
// Gradient flows only where lo <= a <= hi.
Var clamp(Var a, double lo, double hi);
// x * ln x with 0 ln 0 = 0; requires x >= 0.
Var xlogx(Var a);
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var logsumexp_rows(Var a);
// out[r, k] = ||a_r - b_k||^2 for a[n x D], b[K x D].
Var sq_dist(Var a, Var b);
// Rows scaled to unit L2 norm; zero rows are rejected.
Var normalize_rows(Var a);
// Copy of the value with no gradient path back.
Var detach(Var a);

// act(input * W + b)
Var dense_forward(Var input, Var weight, Var bias, Activation act);

}  // namespace mvc
