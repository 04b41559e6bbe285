#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <deque>
#include <vector>

#include "flowid/tensor.hpp"

namespace flowid {

class ParameterStore;
class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor& value() const;
  /// Gradient accumulated by the last backward pass (zeros if none reached it).
  Tensor grad() const;
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of the fixed model pipeline.
///
/// Nodes are appended in evaluation order, so a reverse sweep over node ids is
/// a valid topological order for back-propagation. Parameter leaves are created
/// once per name and map back onto a ParameterStore.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf that collects a gradient.
  Var variable(Tensor value);
  /// Leaf bound to a named parameter; repeated calls return the same node.
  /// Parameters under a frozen prefix are recorded as constants.
  Var param(const ParameterStore& store, const std::string& name);

  void freeze_prefix(std::string prefix) { frozen_.push_back(std::move(prefix)); }
  const std::vector<std::string>& frozen_prefixes() const noexcept { return frozen_; }
  bool is_frozen(const std::string& name) const;

  /// Appends an op node. `backward` receives the gradient of the node's output
  /// and must route it to the parents through accumulate().
  Var record(Tensor value, const std::vector<std::size_t>& parents, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Adds `g` into the gradient of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor& g);
  /// Zero-initialised gradient buffer for in-place accumulation.
  Tensor& grad_buffer(std::size_t id);
  const Tensor* grad_if_any(std::size_t id) const;

  /// Back-propagates from a single-element node seeded with 1.
  void backward(Var root);
  /// Back-propagates from several outputs with explicit seeds.
  void backward(const std::vector<std::pair<Var, Tensor>>& seeds);

  /// Named parameter leaves recorded on this tape.
  const std::map<std::string, std::size_t>& param_leaves() const noexcept { return params_; }
  /// Adds the gradient of every parameter leaf into the store's gradient slots.
  void write_param_grads(ParameterStore& store) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };

  Var make(Node node);
  void sweep(std::size_t from);

  std::deque<Node> nodes_;  // stable references across appends
  std::map<std::string, std::size_t> params_;
  std::vector<std::string> frozen_;
};

/// Differentiable operations. Every op validates shapes (ShapeError) and records
/// a node on the tape its first operand belongs to.
namespace ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// x (rows×c) + bias (1×c) broadcast over rows.
Var add_bias(Var x, Var bias);
Var matmul(Var a, Var b);
/// a·bᵀ
Var matmul_bt(Var a, Var b);
Var transpose(Var a);

Var relu(Var a);
Var elu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
/// log(a + eps)
Var log(Var a, double eps = 0.0);

Var softmax_rows(Var logits);
Var log_softmax_rows(Var logits);

/// Sum of all entries as a 1×1 node.
Var sum(Var a);
Var mean(Var a);
/// Column means, rows×c -> 1×c.
Var mean_rows(Var a);
/// Sum of the diagonal of a square matrix, 1×1.
Var trace(Var a);
/// Entries a(rows[k], cols[k]) as a k×1 column.
Var gather(Var a, std::vector<std::size_t> rows, std::vector<std::size_t> cols);

Var concat_cols(Var a, Var b);
/// Stacks 1×c rows (possibly from this tape) into an n×c matrix.
Var stack_rows(const std::vector<Var>& rows);

/// Elementwise product with a constant tensor of the same shape (dropout masks).
Var mul_const(Var a, const Tensor& factors);
/// Row r multiplied by weights[r].
Var scale_rows(Var a, std::vector<double> weights);
/// Constant sparse matrix times a dense node.
Var spmm(const CsrMatrix& matrix, Var dense);
/// Each row divided by (its L2 norm + eps). With eps == 0 a zero row throws
/// DegenerateEmbeddingError.
Var row_normalize(Var a, double eps);

/// x: c_in×L, kernel: c_out×c_in×k parameter.
Var conv1d(Var x, Var kernel, std::size_t stride, std::size_t padding);
/// x: c×L, bias: 1×c added to every position of channel c.
Var add_channel_bias(Var x, Var bias);
/// Non-overlapping max pooling along the length axis; trailing remainder dropped.
Var maxpool1d(Var x, std::size_t width);

/// Single-layer LSTM over the rows of x (T×d_in) with zero initial state.
/// Weights use row-vector convention: gates = x_t·w_ih + h_{t-1}·w_hh + b, gate
/// blocks ordered (input, forget, candidate, output). Returns T×hidden.
Var lstm(Var x, Var w_ih, Var w_hh, Var b);

/// alpha·a + (1-alpha)·b with alpha a 1×1 node clamped to [0, 1].
Var interpolate(Var alpha, Var a, Var b);

/// Additive attention pooling of states (T×d): score_t = v·tanh(state_t·w + b),
/// output = softmax(scores)-weighted sum of states (1×d).
/// w: d×a, b: 1×a, v: a×1.
Var attention_pool(Var states, Var w, Var b, Var v);

/// x·w + b
Var linear(Var x, Var w, Var b);

/// Builds one 1×width row per item on private tapes, in fixed-size chunks that
/// may run concurrently, and stacks them into an items×width node on `main`.
/// Gradients reach the parameter leaves of `main`; the summation order depends
/// only on `chunk`, never on the thread count.
Var map_rows(Tape& main, const ParameterStore& store, std::size_t items,
             const std::function<Var(Tape&, std::size_t)>& build, std::size_t chunk = 16);

}  // namespace ad
}  // namespace flowid
