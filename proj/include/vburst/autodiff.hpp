#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vburst/tensor.hpp"

namespace vburst {

// Reverse-mode differentiation over an acyclic graph of tensor operations.
// Nodes are created by the op functions below and connected by shared_ptr
// edges from result to operands; the graph is therefore acyclic by
// construction. A backward pass allocates and fills the gradient of every
// reachable node; leaves are plain value nodes created with Var::leaf.

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;
  bool grad_ready = false;
  bool backward_done = false;  // set on a node that served as backward root
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backprop;
  const char* op = "leaf";
};

}  // namespace detail

// Value-semantic handle to a graph node.
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor value);

  const Tensor& value() const { return node_->value; }
  // Gradient of the last backward root with respect to this node's value.
  // Throws if no backward pass has reached this node.
  const Tensor& grad() const;
  bool grad_ready() const { return node_ && node_->grad_ready; }

  // In-place value update; only meaningful on leaves between graph builds
  // (the optimizer's parameter update path).
  std::span<double> mutable_value();

  bool is_leaf() const { return node_ && !node_->backprop; }
  explicit operator bool() const { return node_ != nullptr; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Var make_op(const char* name, Tensor value, std::vector<Var> parents,
                     std::function<void(detail::Node&)> backprop);
};

// Builds an interior node. Exposed so higher layers can add primitives.
Var make_op(const char* name, Tensor value, std::vector<Var> parents,
            std::function<void(detail::Node&)> backprop);

// --- elementwise ---------------------------------------------------------
// Binary ops require identical shapes; the only broadcast is a single-element
// operand against any shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add(const Var& a, double b);
Var sub(double a, const Var& b);
Var mul(const Var& a, double b);

Var sigmoid(const Var& x);
Var tanh(const Var& x);
// log and exp reject non-finite results (domain violations) instead of
// propagating NaN/Inf.
Var log(const Var& x);
Var exp(const Var& x);

// --- reductions ----------------------------------------------------------
enum class ReduceOp { Sum, Mean, Max };

// Reduces along `axis`, dropping that axis (rank-1 input reduces to {1}).
// Max routes the gradient to the first maximal element along the axis.
Var reduce(ReduceOp op, const Var& x, std::size_t axis);
Var reduce_sum(const Var& x, std::size_t axis);
Var reduce_mean(const Var& x, std::size_t axis);
Var reduce_max(const Var& x, std::size_t axis);
// Full reductions to a scalar {1}.
Var sum_all(const Var& x);
Var mean_all(const Var& x);

// --- structured ops ------------------------------------------------------
Var matmul(const Var& a, const Var& b);  // [M,K] x [K,N] -> [M,N]
// x [B,I] * w[O,I]^T (+ bias[O] broadcast over rows) -> [B,O]
Var linear(const Var& x, const Var& w, const Var& bias);
Var linear(const Var& x, const Var& w);

// Numerically stable row softmax on [B,C]; rows sum to 1 within 1e-12.
Var softmax_rows(const Var& x);
// Row-wise log(sum(exp(x))) on [B,C] -> [B], max-subtracted.
Var logsumexp_rows(const Var& x);
// One element per row: out[b] = x[b, index[b]] on [B,C] -> [B].
Var pick_cols(const Var& x, std::span<const std::size_t> index);

Var reshape(const Var& x, Shape shape);
Var slice_cols(const Var& x, std::size_t start, std::size_t len);  // [B,N] -> [B,len]
Var slice_time(const Var& x, std::size_t t);                       // [B,M,K] -> [B,K]
Var stack_time(std::span<const Var> steps);                        // M x [B,K] -> [B,M,K]

// --- backward ------------------------------------------------------------
// Requires a scalar root. Allocates zeroed gradients for every reachable
// node, seeds the root with 1 and runs the reverse sweep. Running backward a
// second time on the same root without reset_gradients is an error.
void backward(const Var& root);
// Clears gradients and backward flags over the graph reachable from root.
void reset_gradients(const Var& root);

// --- finite-difference gradient checking ---------------------------------
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_param = 0;  // index into the params span
  std::size_t worst_entry = 0;  // flat index within that parameter
  double analytic = 0.0;        // analytic gradient at the worst entry
  double numeric = 0.0;         // central-difference gradient at the worst entry
  double tolerance = 1e-4;
  bool passed() const { return max_rel_err < tolerance; }
};

using ScalarGraphBuilder = std::function<Var(std::span<const Var>)>;

// Compares analytic gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h for every entry of every parameter. The error is
// |analytic - numeric| / max(1, |analytic|, |numeric|), so it is relative for
// large gradients and absolute near zero. The builder must be deterministic.
GradCheckReport grad_check(const ScalarGraphBuilder& f, std::span<const Tensor> params,
                           double step = 1e-6, double tolerance = 1e-4);

}  // namespace vburst
