#pragma once

// Tape-based reverse-mode automatic differentiation over rank-1/rank-2
// float64 tensors. A Graph records operations in creation order, which is a
// topological order, so backward is a single reverse sweep over the tape.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "termstory/tensor.hpp"

namespace termstory {

class Rng;
struct Parameter;

namespace ad {

class Graph;

/// Handle to a node on a Graph tape. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  /// With `grad_enabled == false` no backward closures are recorded; used for
  /// inference.
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf that owns its gradient (read it back through Var::grad()).
  Var variable(Tensor value);
  /// Leaf bound to a model parameter; backward adds into `p.grad`.
  Var parameter(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. `loss` must
  /// hold a single element. Returns the number of nodes whose backward ran.
  std::size_t backward(Var loss);

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backward;
    Parameter* param = nullptr;
  };

  /// Appends an op result. `parents` decides whether the node needs a
  /// gradient; `make_backward` is only invoked when it does. Throws
  /// Error(kNonFinite) naming `op` if the value holds NaN/Inf.
  Var push(const char* op, Tensor value, std::initializer_list<Var> parents,
           const std::function<std::function<void()>(std::size_t self)>& make_backward);
  Var push(const char* op, Tensor value, std::span<const Var> parents,
           const std::function<std::function<void()>(std::size_t self)>& make_backward);

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  /// Gradient buffer of `id`, allocated on first use.
  Tensor& grad_of(std::size_t id);

 private:
  bool grad_enabled_;
  std::deque<Node> nodes_;
};

// Dense algebra. Rank-2 unless stated; rank-1 tensors act as a single row.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x[r, c] + bias[c].
Var add_bias(Var x, Var bias);
Var add_constant(Var x, const Tensor& c);
Var scale(Var x, double s);
Var sum(Var x);
Var mean(Var x);

Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
/// tanh approximation of GELU.
Var gelu(Var x);

/// Softmax along the last dimension, max-subtracted.
Var softmax(Var x);
/// Softmax restricted to entries where `allowed[r * cols + c]` is nonzero;
/// disallowed entries get probability exactly 0. Every row needs one allowed entry.
Var masked_softmax(Var x, std::span<const std::uint8_t> allowed);
/// Row-wise (x - mean) / sqrt(var + eps) * gamma + beta.
Var layernorm(Var x, Var gamma, Var beta, double eps);

/// Rows of `table` selected by `ids`.
Var embed(Var table, std::span<const int> ids);
/// sum_r w[r] * -log softmax(logits[r])[targets[r]] / sum_r w[r].
/// Rows with weight 0 contribute nothing. Log-sum-exp stabilised.
Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights);
Var cross_entropy(Var logits, std::span<const int> targets);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);

/// Inverted dropout; identity when `rate == 0`.
Var dropout(Var x, double rate, Rng& rng);

}  // namespace ad
}  // namespace termstory
