#pragma once

// Define-by-run reverse-mode automatic differentiation over 2-D tensors.
//
// A Tape records every primitive evaluated during one forward pass in creation
// order, which is already a topological order. `Tape::backward` walks it in
// reverse exactly once. Persistent weights live in `Parameter`s outside the
// tape; binding one with `Tape::parameter` makes its gradient accumulate into
// `Parameter::grad`.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "elearn/numerics/tensor.hpp"

namespace elearn {

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value) : name(std::move(name)), value(std::move(value)) {}

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  // Set by backward whenever a gradient reaches this parameter.
  bool has_grad = false;

  void zero_grad();
};

namespace ad {

class Tape;

// Handle to a node recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the tape and the id of the node whose gradient is being pushed to
  // its parents.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& p);

  // Record a primitive. Throws if `value` contains NaN or Inf, naming `op` and
  // the node index.
  Var record(std::string_view op, Tensor value, std::span<const Var> parents, BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
             BackwardFn backward) {
    return record(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  // Propagates d(loss)/d(node) through the tape. Gradients reaching parameters
  // are added to what is already in Parameter::grad.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const std::string& op(std::size_t id) const { return nodes_[id].op; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, allocated (zeroed) on first access.
  Tensor& grad(std::size_t id);
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// --- primitives -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
// a (r x c) + row (1 x c) broadcast over rows.
Var add_row(const Var& a, const Var& row);
// a (r x c) + col (r x 1) broadcast over columns.
Var add_col(const Var& a, const Var& col);
// a (r x c) * row (1 x c) broadcast over rows.
Var mul_row(const Var& a, const Var& row);
// a (r x c) * col (r x 1) broadcast over columns.
Var mul_col(const Var& a, const Var& col);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var square(const Var& a);
// Elementwise max(a, floor); gradient flows only where a > floor.
Var maximum(const Var& a, double floor);
// Elementwise max of two tensors; ties send the gradient to `a`.
Var maximum(const Var& a, const Var& b);

Var sum(const Var& a);
Var mean(const Var& a);
// Sum over columns: r x c -> r x 1.
Var row_sums(const Var& a);
// Sum over rows: r x c -> 1 x c.
Var col_sums(const Var& a);

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
// Softmax over consecutive column blocks of width `block` inside each row.
Var log_softmax_blocks(const Var& a, std::size_t block);
// Softmax of a column vector (n x 1) within groups: entries sharing group id
// are normalised together.
Var segment_softmax(const Var& a, std::span<const std::int64_t> group, std::size_t n_groups);

// out[r] = a[index[r]] (rows).
Var gather_rows(const Var& a, std::span<const std::int64_t> index);
// out (n_out x c), out[index[r]] += a[r].
Var scatter_add_rows(const Var& a, std::span<const std::int64_t> index, std::size_t n_out);
// out[r] = a(r, index[r]) as an r x 1 column.
Var pick(const Var& a, std::span<const std::int64_t> index);

Var transpose(const Var& a);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
Var concat_cols(std::span<const Var> parts);

// Forward value of `value_from`, backward copies the output gradient into
// `grad_to` unchanged. Shapes must match.
Var straight_through(const Var& value_from, const Var& grad_to);
Var stop_gradient(const Var& a);

// --- helpers ---------------------------------------------------------------

// Throws if the shapes differ, naming the primitive.
void check_same_shape(std::string_view op, const Tensor& a, const Tensor& b);

}  // namespace ad
}  // namespace elearn
