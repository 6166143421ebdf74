#pragma once

// Tape-based reverse-mode differentiation over srl::Tensor.
//
// A Tape owns an append-only list of nodes. Every primitive below evaluates
// eagerly, appends one node holding its value and a closure that maps the
// node's adjoint onto its parents' adjoints, and returns a Var handle.
// Tape::backward walks the nodes once, in strict reverse order of creation.
//
// Broadcasting in the binary ops is limited to what the models need: the
// right operand may match the left exactly, be a single row ({c} or {1,c}),
// a single column ({r,1}) or a scalar.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "srl/tensor.hpp"

namespace srl::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the node's adjoint; accumulates into parents via Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var variable(Tensor value);
  Var constant(Tensor value);

  // Appends a derived node. Throws NumericError naming the node if `value`
  // holds a non-finite entry.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward,
             const char* op);

  // Zeroes every adjoint, seeds d(root)/d(root) = 1 and propagates.
  void backward(Var root);

  void accumulate(std::size_t id, const Tensor& contribution);
  // Adds `scale * contribution` to the adjoint of node `id`.
  void accumulate_scaled(std::size_t id, const Tensor& contribution, double scale);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const;
  const char* op(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "";
  };

  std::vector<Node> nodes_;
};

// ---- primitives ----------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);
// Max over the columns of each row; the subgradient goes to the first argmax.
Var row_max(Var a);
Var dot_rows(Var a, Var b);
// out[i] = a[i, columns[i]].
Var pick(Var a, std::span<const std::size_t> columns);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var concat_rows(Var a, Var b);

inline constexpr double kNormFloor = 1e-12;
// Normalizes every row to unit Euclidean length. Rows with norm below
// `floor` are rejected with NumericError.
Var l2_normalize_rows(Var a, double floor = kNormFloor);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator/(Var a, double s) { return scale(a, 1.0 / s); }

// ---- drivers ---------------------------------------------------------------

using Function = std::function<Var(Tape&, std::span<const Var>)>;

struct ValueAndGrad {
  double value = 0.0;
  std::vector<Tensor> grads;
};

// Evaluates a scalar function of `params` and its gradient with respect to
// each of them. `f` must return a one-element Var.
ValueAndGrad value_and_grad(const Function& f, std::span<const Tensor> params);

// Max over all coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const Function& f, std::span<const Tensor> params, double step = 1e-5);

}  // namespace srl::ad
