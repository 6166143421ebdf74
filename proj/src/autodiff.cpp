#include "srl/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "srl/error.hpp"

namespace srl::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
  return a.tape();
}

std::string shapes(const char* op, const Tensor& a, const Tensor& b) {
  return std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
         b.shape_string();
}

enum class Broadcast { kSame, kRow, kColumn, kScalar };

Broadcast classify(const char* op, const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kColumn;
  throw Error(shapes(op, a, b));
}

double& at(Tensor& b, Broadcast mode, std::size_t r, std::size_t c) {
  switch (mode) {
    case Broadcast::kSame:
      return b(r, c);
    case Broadcast::kRow:
      return b[c];
    case Broadcast::kColumn:
      return b[r];
    case Broadcast::kScalar:
      break;
  }
  return b[0];
}

double at(const Tensor& b, Broadcast mode, std::size_t r, std::size_t c) {
  return at(const_cast<Tensor&>(b), mode, r, c);
}

template <typename Combine>
Tensor combine(const Tensor& a, const Tensor& b, Broadcast mode, Combine f) {
  Tensor out(a.shape());
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = f(a(r, c), at(b, mode, r, c));
  }
  return out;
}

// Sums a full-shape adjoint down to the broadcast operand's shape.
Tensor reduce_to(const Tensor& adjoint, const Tensor& like, Broadcast mode) {
  if (mode == Broadcast::kSame) return adjoint;
  Tensor out(like.shape());
  for (std::size_t r = 0; r < adjoint.rows(); ++r) {
    for (std::size_t c = 0; c < adjoint.cols(); ++c) at(out, mode, r, c) += adjoint(r, c);
  }
  return out;
}

template <typename Forward, typename Derivative>
Var unary(Var a, const char* op, Forward forward, Derivative derivative) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  const std::size_t ia = a.id();
  const std::size_t self = a.tape().size();
  return a.tape().record(
      std::move(out), {ia},
      [ia, self, derivative](Tape& tape, const Tensor& adjoint) {
        const Tensor& xv = tape.value(ia);
        const Tensor& yv = tape.value(self);
        Tensor g(xv.shape());
        for (std::size_t i = 0; i < xv.size(); ++i) g[i] = adjoint[i] * derivative(xv[i], yv[i]);
        tape.accumulate(ia, g);
      },
      op);
}

}  // namespace

// ---- Var / Tape --------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::variable(Tensor value) {
  Var v = record(std::move(value), {}, nullptr, "variable");
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::constant(Tensor value) { return record(std::move(value), {}, nullptr, "constant"); }

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward,
                 const char* op) {
  const std::size_t id = nodes_.size();
  if (!value.all_finite()) {
    std::ostringstream os;
    os << "non-finite value produced at node #" << id << " (" << op << ")";
    throw NumericError(os.str());
  }
  Node node;
  node.value = std::move(value);
  node.op = op;
  for (std::size_t p : parents) {
    if (p >= id) throw Error("tape parents must precede their children");
    node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
  }
  node.parents = std::move(parents);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw Error("backward root belongs to another tape");
  if (root.value().size() != 1) {
    throw Error("backward root must be a scalar, got " + root.value().shape_string());
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      if (n.grad.same_shape(n.value)) {
        n.grad.fill(0.0);
      } else {
        n.grad = Tensor(n.value.shape());
      }
    }
  }
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad.fill(1.0);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

void Tape::accumulate(std::size_t id, const Tensor& contribution) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (contribution.size() != n.grad.size()) {
    throw Error(std::string("adjoint size mismatch at node (") + n.op + ")");
  }
  for (std::size_t i = 0; i < contribution.size(); ++i) n.grad[i] += contribution[i];
}

void Tape::accumulate_scaled(std::size_t id, const Tensor& contribution, double factor) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  for (std::size_t i = 0; i < contribution.size(); ++i) n.grad[i] += factor * contribution[i];
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (!n.requires_grad) throw Error(std::string("no gradient tracked for node (") + n.op + ")");
  return n.grad;
}

// ---- linear algebra ------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) throw Error(shapes("matmul", x, y));
  Tensor out = Tensor::matrix(x.rows(), y.cols());
  as_matrix(out).noalias() = as_matrix(x) * as_matrix(y);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib](Tape& t, const Tensor& adjoint) {
        const Tensor& xv = t.value(ia);
        const Tensor& yv = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor ga(xv.shape());
          as_matrix(ga).noalias() = as_matrix(adjoint) * as_matrix(yv).transpose();
          t.accumulate(ia, ga);
        }
        if (t.requires_grad(ib)) {
          Tensor gb(yv.shape());
          as_matrix(gb).noalias() = as_matrix(xv).transpose() * as_matrix(adjoint);
          t.accumulate(ib, gb);
        }
      },
      "matmul");
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  Tensor out = Tensor::matrix(x.cols(), x.rows());
  as_matrix(out) = as_matrix(x).transpose();
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia](Tape& t, const Tensor& adjoint) {
        Tensor g(t.value(ia).shape());
        as_matrix(g) = as_matrix(adjoint).transpose();
        t.accumulate(ia, g);
      },
      "transpose");
}

// ---- elementwise binary ----------------------------------------------------------

Var add(Var a, Var b) {
  if (b.value().size() > a.value().size()) std::swap(a, b);
  Tape& tape = same_tape(a, b);
  const Broadcast mode = classify("add", a.value(), b.value());
  Tensor out = combine(a.value(), b.value(), mode, [](double x, double y) { return x + y; });
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, mode](Tape& t, const Tensor& adjoint) {
        t.accumulate(ia, adjoint);
        if (t.requires_grad(ib)) t.accumulate(ib, reduce_to(adjoint, t.value(ib), mode));
      },
      "add");
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Broadcast mode = classify("sub", a.value(), b.value());
  Tensor out = combine(a.value(), b.value(), mode, [](double x, double y) { return x - y; });
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, mode](Tape& t, const Tensor& adjoint) {
        t.accumulate(ia, adjoint);
        if (t.requires_grad(ib)) {
          t.accumulate_scaled(ib, reduce_to(adjoint, t.value(ib), mode), -1.0);
        }
      },
      "sub");
}

Var mul(Var a, Var b) {
  if (b.value().size() > a.value().size()) std::swap(a, b);
  Tape& tape = same_tape(a, b);
  const Broadcast mode = classify("mul", a.value(), b.value());
  Tensor out = combine(a.value(), b.value(), mode, [](double x, double y) { return x * y; });
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, mode](Tape& t, const Tensor& adjoint) {
        const Tensor& x = t.value(ia);
        const Tensor& y = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor ga(x.shape());
          for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t c = 0; c < x.cols(); ++c) ga(r, c) = adjoint(r, c) * at(y, mode, r, c);
          }
          t.accumulate(ia, ga);
        }
        if (t.requires_grad(ib)) {
          Tensor full(x.shape());
          for (std::size_t i = 0; i < x.size(); ++i) full[i] = adjoint[i] * x[i];
          t.accumulate(ib, reduce_to(full, y, mode));
        }
      },
      "mul");
}

Var div(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Broadcast mode = classify("div", a.value(), b.value());
  Tensor out = combine(a.value(), b.value(), mode, [](double x, double y) { return x / y; });
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib, mode](Tape& t, const Tensor& adjoint) {
        const Tensor& x = t.value(ia);
        const Tensor& y = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor ga(x.shape());
          for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t c = 0; c < x.cols(); ++c) ga(r, c) = adjoint(r, c) / at(y, mode, r, c);
          }
          t.accumulate(ia, ga);
        }
        if (t.requires_grad(ib)) {
          Tensor full(x.shape());
          for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t c = 0; c < x.cols(); ++c) {
              const double d = at(y, mode, r, c);
              full(r, c) = -adjoint(r, c) * x(r, c) / (d * d);
            }
          }
          t.accumulate(ib, reduce_to(full, y, mode));
        }
      },
      "div");
}

Var scale(Var a, double factor) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, factor](Tape& t, const Tensor& adjoint) { t.accumulate_scaled(ia, adjoint, factor); },
      "scale");
}

// ---- elementwise unary -------------------------------------------------------------

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---- reductions ----------------------------------------------------------------------

Var sum(Var a) {
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.values()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record(
      Tensor::scalar(total), {ia},
      [ia](Tape& t, const Tensor& adjoint) {
        Tensor g(t.value(ia).shape(), adjoint[0]);
        t.accumulate(ia, g);
      },
      "sum");
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  const Tensor& x = a.value();
  Tensor out = Tensor::matrix(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v;
    out[r] = s;
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia](Tape& t, const Tensor& adjoint) {
        Tensor g(t.value(ia).shape());
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (double& v : g.row(r)) v = adjoint[r];
        }
        t.accumulate(ia, g);
      },
      "row_sum");
}

Var row_max(Var a) {
  const Tensor& x = a.value();
  Tensor out = Tensor::matrix(x.rows(), 1);
  std::vector<std::size_t> argmax(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    // max_element keeps the first of equal maxima.
    const auto it = std::max_element(row.begin(), row.end());
    argmax[r] = static_cast<std::size_t>(it - row.begin());
    out[r] = *it;
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, argmax = std::move(argmax)](Tape& t, const Tensor& adjoint) {
        Tensor g(t.value(ia).shape());
        for (std::size_t r = 0; r < argmax.size(); ++r) g(r, argmax[r]) = adjoint[r];
        t.accumulate(ia, g);
      },
      "row_max");
}

Var dot_rows(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) throw Error(shapes("dot_rows", x, y));
  Tensor out = Tensor::matrix(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = dot(x.row(r), y.row(r));
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib](Tape& t, const Tensor& adjoint) {
        const Tensor& xv = t.value(ia);
        const Tensor& yv = t.value(ib);
        Tensor ga(xv.shape());
        Tensor gb(yv.shape());
        for (std::size_t r = 0; r < xv.rows(); ++r) {
          for (std::size_t c = 0; c < xv.cols(); ++c) {
            ga(r, c) = adjoint[r] * yv(r, c);
            gb(r, c) = adjoint[r] * xv(r, c);
          }
        }
        t.accumulate(ia, ga);
        t.accumulate(ib, gb);
      },
      "dot_rows");
}

// ---- indexing --------------------------------------------------------------------------

Var pick(Var a, std::span<const std::size_t> columns) {
  const Tensor& x = a.value();
  if (columns.size() != x.rows()) throw Error("pick: one column index per row required");
  Tensor out = Tensor::matrix(x.rows(), 1);
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (cols[r] >= x.cols()) throw Error("pick: column index out of range");
    out[r] = x(r, cols[r]);
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, cols = std::move(cols)](Tape& t, const Tensor& adjoint) {
        Tensor g(t.value(ia).shape());
        for (std::size_t r = 0; r < cols.size(); ++r) g(r, cols[r]) = adjoint[r];
        t.accumulate(ia, g);
      },
      "pick");
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& x = a.value();
  if (rows.empty()) throw Error("gather_rows: empty index list");
  std::vector<std::size_t> index(rows.begin(), rows.end());
  Tensor out = Tensor::matrix(index.size(), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.rows()) throw Error("gather_rows: row index out of range");
    std::copy(x.row(index[i]).begin(), x.row(index[i]).end(), out.row(i).begin());
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {ia},
      [ia, index = std::move(index)](Tape& t, const Tensor& adjoint) {
        Tensor g(t.value(ia).shape());
        for (std::size_t i = 0; i < index.size(); ++i) {
          auto dst = g.row(index[i]);
          auto src = adjoint.row(i);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
        t.accumulate(ia, g);
      },
      "gather_rows");
}

Var concat_rows(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.cols()) throw Error(shapes("concat_rows", x, y));
  Tensor out = Tensor::matrix(x.rows() + y.rows(), x.cols());
  std::copy(x.values().begin(), x.values().end(), out.values().begin());
  std::copy(y.values().begin(), y.values().end(), out.values().begin() + x.size());
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(
      std::move(out), {ia, ib},
      [ia, ib](Tape& t, const Tensor& adjoint) {
        const std::size_t split = t.value(ia).size();
        Tensor ga(t.value(ia).shape());
        Tensor gb(t.value(ib).shape());
        std::copy(adjoint.values().begin(), adjoint.values().begin() + split,
                  ga.values().begin());
        std::copy(adjoint.values().begin() + split, adjoint.values().end(), gb.values().begin());
        t.accumulate(ia, ga);
        t.accumulate(ib, gb);
      },
      "concat_rows");
}

// ---- normalization -------------------------------------------------------------------------

Var l2_normalize_rows(Var a, double floor) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  std::vector<double> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double n = norm(x.row(r));
    if (!(n >= floor)) {
      std::ostringstream os;
      os << "l2_normalize_rows: row " << r << " has norm " << n << " below floor " << floor
         << " (degenerate representation)";
      throw NumericError(os.str());
    }
    norms[r] = n;
    auto src = x.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / n;
  }
  const std::size_t ia = a.id();
  const std::size_t self = a.tape().size();
  return a.tape().record(
      std::move(out), {ia},
      [ia, self, norms = std::move(norms)](Tape& t, const Tensor& adjoint) {
        // d/dv (v/|v|) applied to g is (g - zhat (zhat . g)) / |v|.
        const Tensor& z = t.value(self);
        Tensor g(z.shape());
        for (std::size_t r = 0; r < z.rows(); ++r) {
          auto zr = z.row(r);
          auto ar = adjoint.row(r);
          const double proj = dot(zr, ar);
          auto gr = g.row(r);
          for (std::size_t c = 0; c < zr.size(); ++c) gr[c] = (ar[c] - zr[c] * proj) / norms[r];
        }
        t.accumulate(ia, g);
      },
      "l2_normalize_rows");
}

// ---- drivers -----------------------------------------------------------------------------

ValueAndGrad value_and_grad(const Function& f, std::span<const Tensor> params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.variable(p));
  Var out = f(tape, vars);
  if (out.value().size() != 1) throw Error("value_and_grad: function must return a scalar");
  tape.backward(out);
  ValueAndGrad result;
  result.value = out.value().item();
  for (const Var& v : vars) result.grads.push_back(v.grad());
  return result;
}

namespace {

double evaluate(const Function& f, std::span<const Tensor> params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.constant(p));
  return f(tape, vars).value().item();
}

}  // namespace

double grad_check(const Function& f, std::span<const Tensor> params, double step) {
  const ValueAndGrad analytic = value_and_grad(f, params);
  std::vector<Tensor> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double original = probe[p][i];
      probe[p][i] = original + step;
      const double up = evaluate(f, probe);
      probe[p][i] = original - step;
      const double down = evaluate(f, probe);
      probe[p][i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double g = analytic.grads[p][i];
      worst = std::max(worst, std::abs(g - numeric) / std::max(1.0, std::abs(g)));
    }
  }
  return worst;
}

}  // namespace srl::ad
