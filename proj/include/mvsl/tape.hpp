#pragma once

// Reverse-mode automatic differentiation on dense matrices.
//
// Every forward operation appends a node to a Tape; creation order is a
// topological order of the expression graph, so the backward sweep is a
// single reverse pass over the node array. Var is a cheap handle (tape
// pointer + node id). Trainable tensors live outside the tape in ParamNode
// objects; mounting one with Tape::param creates a leaf whose gradient is
// accumulated into ParamNode::gradient by Tape::backward.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mvsl/common.hpp"

namespace mvsl {

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Index rows() const;
  Index cols() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// A trainable tensor. The gradient buffer matches the value's shape and is
// owned here so optimizers can update parameters without touching any tape.
struct ParamNode {
  std::string name;
  Matrix value;
  Matrix gradient;

  ParamNode() = default;
  ParamNode(std::string name_, Matrix value_)
      : name(std::move(name_)),
        value(std::move(value_)),
        gradient(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { gradient.setZero(); }
};

class Tape {
 public:
  using BackFn = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf holding a constant value; receives no gradient of its own but
  // still participates in shape checks.
  Var constant(Matrix value);

  // Leaf bound to a parameter. backward() adds the leaf's gradient into
  // p.gradient; mounting the same parameter twice accumulates both paths.
  Var param(ParamNode& p);

  // Appends an interior node. `back` receives the upstream gradient and is
  // expected to route contributions to parents via accum(). Pass nullptr
  // for nodes that block gradient flow.
  Var emplace(Matrix value, BackFn back);

  // Installs the backward function after creation, for ops whose backward
  // closure needs the node's own id (e.g. to reuse the stored output).
  void set_back(int id, BackFn back) {
    nodes_[static_cast<std::size_t>(id)].back = std::move(back);
  }

  // Adds `delta` into the gradient slot of node `id`.
  template <class E>
  void accum(int id, const E& delta) {
    NodeRec& n = nodes_[static_cast<std::size_t>(id)];
    if (n.has_grad) {
      n.grad += delta;
    } else {
      n.grad = delta;
      n.has_grad = true;
    }
  }

  // Reverse sweep from a 1x1 loss node. May be called once per tape.
  void backward(Var loss);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& value(Var v) const { return value(v.id); }

  // Gradient of the loss w.r.t. node `v`; zero matrix if the node is off
  // the differentiated path. Valid only after backward().
  Matrix grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct NodeRec {
    Matrix value;
    Matrix grad;
    BackFn back;
    ParamNode* bound = nullptr;
    bool has_grad = false;
  };

  std::vector<NodeRec> nodes_;
  bool swept_ = false;
};

// ---- elementwise and structural operations ---------------------------------
// All builders validate shapes eagerly and throw ShapeError naming the
// offending operand shapes.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);            // s * a for a compile-time-known scalar
Var mul_scalar(Var a, Var s);          // broadcast multiply by a 1x1 node
Var cmul(Var a, Var b);                // elementwise product
Var matmul(Var a, Var b);
Var transpose(Var a);
Var tanh_map(Var a);                   // outputs strictly inside (-1, 1)
Var sigmoid_map(Var a);                // outputs strictly inside (0, 1)
Var softmax_map(Var a);                // row or column vector, max-shifted
Var softmax_cols(Var a);               // column-wise softmax of a matrix
Var clamp(Var a, double lo, double hi);  // gradient is zero where clamping bit
Var log_map(Var a);
Var sum_all(Var a);                    // 1x1 sum of entries
Var mean_all(Var a);                   // 1x1 mean of entries
Var squared_frobenius(Var a);          // 1x1 sum of squared entries
Var l1_norm(Var a);                    // 1x1 sum of absolute values
Var add_col_bias(Var a, Var bias);     // bias is m x 1, added to every column
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var gather_rows(Var a, std::vector<int> rows);   // out.row(r) = a.row(rows[r])
Var select_cols(Var a, std::vector<int> cols);
Var stop_gradient(Var a);              // identity value, no gradient flow

// W * x + b (b optional). x columns are samples. Registered on the graph
// like any other operation, so it participates in backward().
Var linear_apply(Var W, Var x, const Var* b = nullptr);

}  // namespace mvsl
