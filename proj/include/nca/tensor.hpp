#pragma once

// Dense tensors with reverse-mode differentiation on a define-by-run tape.
// Values are flat row-major Eigen arrays; matrix ops go through Eigen maps.
// Scalar type is a template parameter; the rest of the project instantiates
// Real (float). Batch size is 1 throughout, so broadcasting is limited to
// singleton expansion.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nca {

using Real = float;
using Shape = std::vector<int>;

template <typename S>
using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<MatrixRM<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const MatrixRM<S>>;
template <typename S>
using VecMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;
template <typename S>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '{';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << '}';
  return os.str();
}

inline long numel(const Shape& s) {
  long n = 1;
  for (int e : s) n *= e;
  return n;
}

[[noreturn]] inline void fail(const std::string& msg) { throw std::invalid_argument(msg); }

inline void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

namespace detail {

template <typename S>
struct Node {
  Shape shape;
  ArrayX<S> value;
  ArrayX<S> grad;  // empty until touched by backward
  bool param = false;

  bool has_grad() const { return grad.size() == value.size() && value.size() > 0; }
  ArrayX<S>& grad_ref() {
    if (grad.size() != value.size()) grad = ArrayX<S>::Zero(value.size());
    return grad;
  }
};

}  // namespace detail

template <typename S>
class Tape;

template <typename S>
Tape<S>*& active_tape() {
  thread_local Tape<S>* t = nullptr;
  return t;
}

// Handle to a tensor node. Copies share the underlying storage.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    Tensor t(std::move(shape));
    t.n_->value = ArrayX<S>::Zero(numel(t.shape()));
    return t;
  }
  static Tensor full(Shape shape, S v) {
    Tensor t(std::move(shape));
    t.n_->value = ArrayX<S>::Constant(numel(t.shape()), v);
    return t;
  }
  static Tensor scalar(S v) { return full({1}, v); }
  static Tensor from_array(Shape shape, ArrayX<S> data) {
    Tensor t(std::move(shape));
    require(data.size() == numel(t.shape()),
            "tensor data length " + std::to_string(data.size()) + " does not match shape " +
                shape_str(t.shape()));
    t.n_->value = std::move(data);
    return t;
  }
  static Tensor from_vector(Shape shape, const std::vector<S>& data) {
    ArrayX<S> a(data.size());
    for (size_t i = 0; i < data.size(); ++i) a[i] = data[i];
    return from_array(std::move(shape), std::move(a));
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  long size() const { return n_->value.size(); }
  int rank() const { return (int)n_->shape.size(); }
  int dim(int i) const { return n_->shape[i]; }

  ArrayX<S>& value() { return n_->value; }
  const ArrayX<S>& value() const { return n_->value; }
  ArrayX<S>& grad() { return n_->grad_ref(); }
  bool has_grad() const { return n_->has_grad(); }

  S item() const {
    require(size() == 1, "item() on non-scalar tensor of shape " + shape_str(shape()));
    return n_->value[0];
  }
  S operator[](long i) const { return n_->value[i]; }

  Tensor& set_param(bool p = true) {
    n_->param = p;
    return *this;
  }
  bool is_param() const { return n_->param; }

  // Leaf copy of the value with no history attached.
  Tensor detach() const {
    Tensor t(shape());
    t.n_->value = n_->value;
    return t;
  }

  void zero_grad() {
    if (n_->grad.size()) n_->grad.setZero();
  }

  std::shared_ptr<detail::Node<S>> node() const { return n_; }

 private:
  explicit Tensor(Shape shape) : n_(std::make_shared<detail::Node<S>>()) {
    for (int e : shape) require(e > 0, "non-positive extent in shape " + shape_str(shape));
    n_->shape = std::move(shape);
  }
  std::shared_ptr<detail::Node<S>> n_;

  template <typename T>
  friend class Tape;
  template <typename T>
  friend Tensor<T> make_result(Shape);
};

template <typename S>
Tensor<S> make_result(Shape shape) {
  return Tensor<S>(std::move(shape));
}

// Ordered record of primitive ops; replaying backward visits each node after
// all of its consumers. One tape per training window, activated by scope.
template <typename S>
class Tape {
 public:
  Tape() : prev_(active_tape<S>()) { active_tape<S>() = this; }
  ~Tape() { active_tape<S>() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_tape<S>(); }

  void record(std::function<void()> back) { ops_.push_back(std::move(back)); }

  size_t size() const { return ops_.size(); }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  void backward(const Tensor<S>& loss) {
    require(loss.size() == 1, "backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
    loss.node()->grad_ref()[0] += S(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> ops_;
  Tape* prev_;
};

template <typename S>
void record(std::function<void()> back) {
  if (Tape<S>* t = Tape<S>::active()) t->record(std::move(back));
}

template <typename S>
void backward(const Tensor<S>& loss) {
  Tape<S>* t = Tape<S>::active();
  require(t != nullptr, "backward() called with no active tape");
  t->backward(loss);
}

// ---------------------------------------------------------------------------
// elementwise arithmetic (shapes equal, or one side a singleton)

namespace detail {

// broadcasting by leading-singleton expansion: a {1} pairs with anything, and
// a {c} row vector pairs with {r,c} by repetition down the rows
enum class Bcast { None, Left, Right, RowLeft, RowRight };

template <typename S>
Bcast bcast_kind(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::None;
  if (a.size() == 1) return Bcast::Left;
  if (b.size() == 1) return Bcast::Right;
  if (a.rank() == 1 && b.rank() == 2 && a.dim(0) == b.dim(1)) return Bcast::RowLeft;
  if (b.rank() == 1 && a.rank() == 2 && b.dim(0) == a.dim(1)) return Bcast::RowRight;
  fail(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
       shape_str(b.shape()));
}

}  // namespace detail

namespace detail {

// expand either operand to the result shape as a plain array
template <typename S>
ArrayX<S> expand(const ArrayX<S>& v, Bcast k, bool is_left, long n, int cols) {
  const bool bc = (is_left && (k == Bcast::Left || k == Bcast::RowLeft)) ||
                  (!is_left && (k == Bcast::Right || k == Bcast::RowRight));
  if (!bc) return v;
  if (v.size() == 1) return ArrayX<S>::Constant(n, v[0]);
  ArrayX<S> out(n);
  for (long r = 0; r < n / cols; ++r) out.segment(r * cols, cols) = v;
  return out;
}

// reduce a result-shaped gradient back to the operand's shape
template <typename S>
void reduce_into(ArrayX<S>& dst, const ArrayX<S>& g, Bcast k, bool is_left, int cols) {
  const bool bc = (is_left && (k == Bcast::Left || k == Bcast::RowLeft)) ||
                  (!is_left && (k == Bcast::Right || k == Bcast::RowRight));
  if (!bc) {
    dst += g;
    return;
  }
  if (dst.size() == 1) {
    dst[0] += g.sum();
    return;
  }
  for (long r = 0; r < g.size() / cols; ++r) dst += g.segment(r * cols, cols);
}

template <typename S, typename Fwd>
Tensor<S> binary_op(const Tensor<S>& a, const Tensor<S>& b, const char* name, Fwd fwd,
                    void (*bwd)(const ArrayX<S>&, const ArrayX<S>&, const ArrayX<S>&, ArrayX<S>&,
                                ArrayX<S>&)) {
  auto k = bcast_kind(a, b, name);
  const Tensor<S>& shaped = (k == Bcast::Left || k == Bcast::RowLeft) ? b : a;
  auto out = make_result<S>(shaped.shape());
  const int cols = shaped.rank() == 2 ? shaped.dim(1) : (int)shaped.size();
  ArrayX<S> av = expand(a.value(), k, true, shaped.size(), cols);
  ArrayX<S> bv = expand(b.value(), k, false, shaped.size(), cols);
  out.value() = fwd(av, bv);
  record<S>([a, b, out, k, cols, bwd] {
    if (!out.has_grad()) return;
    const auto& g = out.node()->grad;
    const Tensor<S>& shaped = (k == Bcast::Left || k == Bcast::RowLeft) ? b : a;
    ArrayX<S> av = expand(a.value(), k, true, shaped.size(), cols);
    ArrayX<S> bv = expand(b.value(), k, false, shaped.size(), cols);
    ArrayX<S> da = ArrayX<S>::Zero(g.size()), db = ArrayX<S>::Zero(g.size());
    bwd(g, av, bv, da, db);
    reduce_into(a.node()->grad_ref(), da, k, true, cols);
    reduce_into(b.node()->grad_ref(), db, k, false, cols);
  });
  return out;
}

}  // namespace detail

template <typename S>
Tensor<S> operator+(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_op<S>(
      a, b, "add", [](const ArrayX<S>& x, const ArrayX<S>& y) { return (x + y).eval(); },
      +[](const ArrayX<S>& g, const ArrayX<S>&, const ArrayX<S>&, ArrayX<S>& da, ArrayX<S>& db) {
        da = g;
        db = g;
      });
}

template <typename S>
Tensor<S> operator-(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_op<S>(
      a, b, "sub", [](const ArrayX<S>& x, const ArrayX<S>& y) { return (x - y).eval(); },
      +[](const ArrayX<S>& g, const ArrayX<S>&, const ArrayX<S>&, ArrayX<S>& da, ArrayX<S>& db) {
        da = g;
        db = -g;
      });
}

template <typename S>
Tensor<S> operator*(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_op<S>(
      a, b, "mul", [](const ArrayX<S>& x, const ArrayX<S>& y) { return (x * y).eval(); },
      +[](const ArrayX<S>& g, const ArrayX<S>& x, const ArrayX<S>& y, ArrayX<S>& da,
          ArrayX<S>& db) {
        da = g * y;
        db = g * x;
      });
}

// constant (non-differentiated) scalar variants
template <typename S>
Tensor<S> operator*(S c, const Tensor<S>& a) {
  auto out = make_result<S>(a.shape());
  out.value() = c * a.value();
  record<S>([a, out, c] {
    if (out.has_grad()) a.node()->grad_ref() += c * out.node()->grad;
  });
  return out;
}
template <typename S>
Tensor<S> operator*(const Tensor<S>& a, S c) { return c * a; }

template <typename S>
Tensor<S> operator+(const Tensor<S>& a, S c) {
  auto out = make_result<S>(a.shape());
  out.value() = a.value() + c;
  record<S>([a, out] {
    if (out.has_grad()) a.node()->grad_ref() += out.node()->grad;
  });
  return out;
}
template <typename S>
Tensor<S> operator+(S c, const Tensor<S>& a) { return a + c; }

template <typename S>
Tensor<S> operator-(S c, const Tensor<S>& a) {
  auto out = make_result<S>(a.shape());
  out.value() = c - a.value();
  record<S>([a, out] {
    if (out.has_grad()) a.node()->grad_ref() -= out.node()->grad;
  });
  return out;
}
template <typename S>
Tensor<S> operator-(const Tensor<S>& a, S c) { return a + (-c); }

template <typename S>
Tensor<S> operator-(const Tensor<S>& a) { return S(-1) * a; }

// ---------------------------------------------------------------------------
// unary activations

namespace detail {

template <typename S, typename FwdFn, typename BwdFn>
Tensor<S> unary_op(const Tensor<S>& a, FwdFn fwd, BwdFn dydx_from_xy) {
  auto out = make_result<S>(a.shape());
  out.value() = fwd(a.value());
  record<S>([a, out, dydx_from_xy] {
    if (!out.has_grad()) return;
    a.node()->grad_ref() += out.node()->grad * dydx_from_xy(a.value(), out.value());
  });
  return out;
}

}  // namespace detail

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  return detail::unary_op(
      a, [](const ArrayX<S>& x) { return (S(1) / (S(1) + (-x).exp())).eval(); },
      [](const ArrayX<S>&, const ArrayX<S>& y) { return (y * (S(1) - y)).eval(); });
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& a) {
  return detail::unary_op(
      a, [](const ArrayX<S>& x) { return x.tanh().eval(); },
      [](const ArrayX<S>&, const ArrayX<S>& y) { return (S(1) - y * y).eval(); });
}

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  return detail::unary_op(
      a, [](const ArrayX<S>& x) { return x.max(S(0)).eval(); },
      [](const ArrayX<S>& x, const ArrayX<S>&) {
        return (x > S(0)).template cast<S>().eval();
      });
}

template <typename S>
Tensor<S> softplus(const Tensor<S>& a) {
  // log(1 + e^x), computed as max(x,0) + log1p(e^-|x|) for stability
  return detail::unary_op(
      a,
      [](const ArrayX<S>& x) {
        return (x.max(S(0)) + (S(1) + (-x.abs()).exp()).log()).eval();
      },
      [](const ArrayX<S>& x, const ArrayX<S>&) {
        return (S(1) / (S(1) + (-x).exp())).eval();
      });
}

template <typename S>
Tensor<S> exp(const Tensor<S>& a) {
  return detail::unary_op(
      a, [](const ArrayX<S>& x) { return x.exp().eval(); },
      [](const ArrayX<S>&, const ArrayX<S>& y) { return y; });
}

template <typename S>
Tensor<S> log(const Tensor<S>& a) {
  return detail::unary_op(
      a, [](const ArrayX<S>& x) { return x.log().eval(); },
      [](const ArrayX<S>& x, const ArrayX<S>&) { return x.inverse().eval(); });
}

template <typename S>
Tensor<S> square(const Tensor<S>& a) {
  return detail::unary_op(
      a, [](const ArrayX<S>& x) { return x.square().eval(); },
      [](const ArrayX<S>& x, const ArrayX<S>&) { return (S(2) * x).eval(); });
}

// ---------------------------------------------------------------------------
// reductions

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  auto out = make_result<S>(Shape{1});
  out.value() = ArrayX<S>::Constant(1, a.value().sum());
  record<S>([a, out] {
    if (out.has_grad()) a.node()->grad_ref() += out.node()->grad[0];
  });
  return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
  auto out = make_result<S>(Shape{1});
  out.value() = ArrayX<S>::Constant(1, a.value().mean());
  record<S>([a, out, n = (S)a.size()] {
    if (out.has_grad()) a.node()->grad_ref() += out.node()->grad[0] / n;
  });
  return out;
}

template <typename S>
Tensor<S> dot(const Tensor<S>& a, const Tensor<S>& b) {
  require(a.shape() == b.shape(),
          "dot: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto out = make_result<S>(Shape{1});
  out.value() = ArrayX<S>::Constant(1, (a.value() * b.value()).sum());
  record<S>([a, b, out] {
    if (!out.has_grad()) return;
    S g = out.node()->grad[0];
    a.node()->grad_ref() += g * b.value();
    b.node()->grad_ref() += g * a.value();
  });
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  require(numel(shape) == a.size(), "reshape: cannot view " + shape_str(a.shape()) + " as " +
                                        shape_str(shape));
  auto out = make_result<S>(std::move(shape));
  out.value() = a.value();
  record<S>([a, out] {
    if (out.has_grad()) a.node()->grad_ref() += out.node()->grad;
  });
  return out;
}

template <typename S>
Tensor<S> slice(const Tensor<S>& a, long offset, long len) {
  require(a.rank() == 1, "slice: rank-1 tensor expected, got " + shape_str(a.shape()));
  require(offset >= 0 && len > 0 && offset + len <= a.size(),
          "slice: range [" + std::to_string(offset) + "," + std::to_string(offset + len) +
              ") out of bounds for shape " + shape_str(a.shape()));
  auto out = make_result<S>(Shape{(int)len});
  out.value() = a.value().segment(offset, len);
  record<S>([a, out, offset, len] {
    if (out.has_grad()) a.node()->grad_ref().segment(offset, len) += out.node()->grad;
  });
  return out;
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts) {
  require(!parts.empty(), "concat: no operands");
  long n = 0;
  for (const auto& p : parts) {
    require(p.rank() == 1, "concat: rank-1 tensors expected, got " + shape_str(p.shape()));
    n += p.size();
  }
  auto out = make_result<S>(Shape{(int)n});
  long at = 0;
  for (const auto& p : parts) {
    out.value().segment(at, p.size()) = p.value();
    at += p.size();
  }
  record<S>([parts, out] {
    if (!out.has_grad()) return;
    long at = 0;
    for (const auto& p : parts) {
      p.node()->grad_ref() += out.node()->grad.segment(at, p.size());
      at += p.size();
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// linear algebra

// A {m,k} times B {k,n} or {k}; result {m,n} or {m}.
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  require(a.rank() == 2, "matmul: left operand must be rank-2, got " + shape_str(a.shape()));
  require(b.rank() == 1 || b.rank() == 2,
          "matmul: right operand must be rank-1 or rank-2, got " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1);
  const int k2 = b.dim(0);
  const int n = b.rank() == 2 ? b.dim(1) : 1;
  require(k == k2, "matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
  auto out = make_result<S>(b.rank() == 2 ? Shape{m, n} : Shape{m});
  out.value().resize((long)m * n);
  ConstMatMap<S> A(a.value().data(), m, k), B(b.value().data(), k, n);
  MatMap<S>(out.value().data(), m, n).noalias() = A * B;
  record<S>([a, b, out, m, k, n] {
    if (!out.has_grad()) return;
    ConstMatMap<S> A(a.value().data(), m, k), B(b.value().data(), k, n);
    ConstMatMap<S> G(out.node()->grad.data(), m, n);
    MatMap<S>(a.node()->grad_ref().data(), m, k).noalias() += G * B.transpose();
    MatMap<S>(b.node()->grad_ref().data(), k, n).noalias() += A.transpose() * G;
  });
  return out;
}

// A^T x for A {m,k}, x {m}; result {k}.
template <typename S>
Tensor<S> tmatvec(const Tensor<S>& a, const Tensor<S>& x) {
  require(a.rank() == 2 && x.rank() == 1 && a.dim(0) == x.dim(0),
          "tmatvec: need {m,k} and {m}, got " + shape_str(a.shape()) + " and " +
              shape_str(x.shape()));
  const int m = a.dim(0), k = a.dim(1);
  auto out = make_result<S>(Shape{k});
  out.value().resize(k);
  ConstMatMap<S> A(a.value().data(), m, k);
  ConstVecMap<S> X(x.value().data(), m);
  VecMap<S>(out.value().data(), k).noalias() = A.transpose() * X;
  record<S>([a, x, out, m, k] {
    if (!out.has_grad()) return;
    ConstMatMap<S> A(a.value().data(), m, k);
    ConstVecMap<S> X(x.value().data(), m);
    ConstVecMap<S> G(out.node()->grad.data(), k);
    MatMap<S>(a.node()->grad_ref().data(), m, k).noalias() += X * G.transpose();
    VecMap<S>(x.node()->grad_ref().data(), m).noalias() += A * G;
  });
  return out;
}

// u {m} v^T {n} -> {m,n}
template <typename S>
Tensor<S> outer(const Tensor<S>& u, const Tensor<S>& v) {
  require(u.rank() == 1 && v.rank() == 1, "outer: rank-1 operands expected, got " +
                                              shape_str(u.shape()) + " and " +
                                              shape_str(v.shape()));
  const int m = u.dim(0), n = v.dim(0);
  auto out = make_result<S>(Shape{m, n});
  out.value().resize((long)m * n);
  ConstVecMap<S> U(u.value().data(), m), V(v.value().data(), n);
  MatMap<S>(out.value().data(), m, n).noalias() = U * V.transpose();
  record<S>([u, v, out, m, n] {
    if (!out.has_grad()) return;
    ConstMatMap<S> G(out.node()->grad.data(), m, n);
    ConstVecMap<S> U(u.value().data(), m), V(v.value().data(), n);
    VecMap<S>(u.node()->grad_ref().data(), m).noalias() += G * V;
    VecMap<S>(v.node()->grad_ref().data(), n).noalias() += G.transpose() * U;
  });
  return out;
}

// ---------------------------------------------------------------------------
// softmax over an axis (rank-1: axis 0; rank-2: 0 = down columns, 1 = along rows)

template <typename S>
Tensor<S> softmax(const Tensor<S>& a, int axis = -1) {
  if (axis < 0) axis = a.rank() - 1;
  require(axis >= 0 && axis < a.rank(), "softmax: axis out of range for " + shape_str(a.shape()));
  const int rows = a.rank() == 2 ? a.dim(0) : 1;
  const int cols = a.rank() == 2 ? a.dim(1) : a.dim(0);
  const bool along_rows = a.rank() == 1 || axis == 1;
  auto out = make_result<S>(a.shape());
  out.value().resize(a.size());
  ConstMatMap<S> X(a.value().data(), rows, cols);
  MatMap<S> Y(out.value().data(), rows, cols);
  if (along_rows)
    for (int i = 0; i < rows; ++i) {
      ArrayX<S> e = (X.row(i).transpose().array() - X.row(i).maxCoeff()).exp();
      Y.row(i) = (e / e.sum()).matrix().transpose();
    }
  else
    for (int j = 0; j < cols; ++j) {
      ArrayX<S> e = (X.col(j).array() - X.col(j).maxCoeff()).exp();
      Y.col(j) = (e / e.sum()).matrix();
    }
  record<S>([a, out, rows, cols, along_rows] {
    if (!out.has_grad()) return;
    ConstMatMap<S> Y(out.value().data(), rows, cols);
    ConstMatMap<S> G(out.node()->grad.data(), rows, cols);
    MatMap<S> DX(a.node()->grad_ref().data(), rows, cols);
    if (along_rows)
      for (int i = 0; i < rows; ++i) {
        S d = (G.row(i).array() * Y.row(i).array()).sum();
        DX.row(i).array() += (G.row(i).array() - d) * Y.row(i).array();
      }
    else
      for (int j = 0; j < cols; ++j) {
        S d = (G.col(j).array() * Y.col(j).array()).sum();
        DX.col(j).array() += (G.col(j).array() - d) * Y.col(j).array();
      }
  });
  return out;
}

// ---------------------------------------------------------------------------
// cosine similarity between a key and each matrix row, with an epsilon guard
// in the norm product so zero rows/keys read as similarity 0

template <typename S>
Tensor<S> cosine_rows(const Tensor<S>& m, const Tensor<S>& k) {
  require(m.rank() == 2 && k.rank() == 1 && m.dim(1) == k.dim(0),
          "cosine_rows: need {n,w} and {w}, got " + shape_str(m.shape()) + " and " +
              shape_str(k.shape()));
  const int n = m.dim(0), w = m.dim(1);
  const S eps = S(1e-8);
  auto out = make_result<S>(Shape{n});
  out.value().resize(n);
  ConstMatMap<S> M(m.value().data(), n, w);
  ConstVecMap<S> K(k.value().data(), w);
  const S knorm = K.norm();
  for (int i = 0; i < n; ++i) {
    S d = M.row(i).dot(K);
    out.value()[i] = d / (M.row(i).norm() * knorm + eps);
  }
  record<S>([m, k, out, n, w, eps] {
    if (!out.has_grad()) return;
    ConstMatMap<S> M(m.value().data(), n, w);
    ConstVecMap<S> K(k.value().data(), w);
    const auto& g = out.node()->grad;
    const auto& c = out.value();
    MatMap<S> DM(m.node()->grad_ref().data(), n, w);
    VecMap<S> DK(k.node()->grad_ref().data(), w);
    const S knorm = K.norm();
    for (int i = 0; i < n; ++i) {
      S rnorm = M.row(i).norm();
      S denom = rnorm * knorm + eps;
      // d c_i / d M_i = K/denom - c_i * (knorm/denom) * M_i/|M_i|
      DM.row(i) += (g[i] / denom) * K.transpose();
      if (rnorm > eps)
        DM.row(i) -= (g[i] * c[i] * knorm / (denom * rnorm)) * M.row(i);
      DK += (g[i] / denom) * M.row(i).transpose();
      if (knorm > eps) DK -= (g[i] * c[i] * rnorm / (denom * knorm)) * K;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// 2-D convolution, valid padding, arbitrary stride. Layouts:
//   input {C,H,W}, kernel {F,C,kh,kw}, bias {F}, output {F,OH,OW}
// The transposed variant takes the target spatial size so that it inverts the
// (possibly flooring) conv shape arithmetic exactly.

inline int conv_out(int in, int k, int s) { return (in - k) / s + 1; }

namespace detail {

// gather patches of src {C,H,W} into cols {C*kh*kw, oh*ow}
template <typename S>
void im2col(const ArrayX<S>& src, int C, int H, int W, int kh, int kw, int s, int oh, int ow,
            MatrixRM<S>& cols) {
  cols.resize(C * kh * kw, oh * ow);
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        int row = (c * kh + i) * kw + j;
        for (int y = 0; y < oh; ++y) {
          const S* sp = src.data() + ((long)c * H + y * s + i) * W + j;
          S* dp = cols.data() + (long)row * (oh * ow) + (long)y * ow;
          for (int x = 0; x < ow; ++x) dp[x] = sp[(long)x * s];
        }
      }
}

// scatter-add cols back into dst {C,H,W}
template <typename S>
void col2im(const MatrixRM<S>& cols, int C, int H, int W, int kh, int kw, int s, int oh, int ow,
            S* dst) {
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < kh; ++i)
      for (int j = 0; j < kw; ++j) {
        int row = (c * kh + i) * kw + j;
        for (int y = 0; y < oh; ++y) {
          S* dp = dst + ((long)c * H + y * s + i) * W + j;
          const S* sp = cols.data() + (long)row * (oh * ow) + (long)y * ow;
          for (int x = 0; x < ow; ++x) dp[(long)x * s] += sp[x];
        }
      }
}

}  // namespace detail

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int stride) {
  require(x.rank() == 3 && w.rank() == 4, "conv2d: need input {C,H,W} and kernel {F,C,kh,kw}, got " +
                                              shape_str(x.shape()) + " and " + shape_str(w.shape()));
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  require(w.dim(1) == C, "conv2d: kernel channels " + shape_str(w.shape()) +
                             " do not match input " + shape_str(x.shape()));
  require(b.rank() == 1 && b.dim(0) == F, "conv2d: bias must be {F}");
  require(stride >= 1 && H >= kh && W >= kw, "conv2d: kernel larger than input");
  const int oh = conv_out(H, kh, stride), ow = conv_out(W, kw, stride);
  auto out = make_result<S>(Shape{F, oh, ow});
  out.value().resize((long)F * oh * ow);
  MatrixRM<S> cols;
  detail::im2col(x.value(), C, H, W, kh, kw, stride, oh, ow, cols);
  ConstMatMap<S> Wm(w.value().data(), F, C * kh * kw);
  MatMap<S> O(out.value().data(), F, oh * ow);
  O.noalias() = Wm * cols;
  O.colwise() += ConstVecMap<S>(b.value().data(), F);
  record<S>([x, w, b, out, C, H, W, F, kh, kw, stride, oh, ow] {
    if (!out.has_grad()) return;
    ConstMatMap<S> G(out.node()->grad.data(), F, oh * ow);
    ConstMatMap<S> Wm(w.value().data(), F, C * kh * kw);
    MatrixRM<S> cols;
    detail::im2col(x.value(), C, H, W, kh, kw, stride, oh, ow, cols);
    MatMap<S>(w.node()->grad_ref().data(), F, C * kh * kw).noalias() += G * cols.transpose();
    VecMap<S>(b.node()->grad_ref().data(), F).noalias() += G.rowwise().sum();
    MatrixRM<S> dcols = Wm.transpose() * G;
    detail::col2im(dcols, C, H, W, kh, kw, stride, oh, ow, x.node()->grad_ref().data());
  });
  return out;
}

template <typename S>
Tensor<S> conv2d_transpose(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, int stride,
                           int out_h, int out_w) {
  require(x.rank() == 3 && w.rank() == 4,
          "conv2d_transpose: need input {C,H,W} and kernel {C,F,kh,kw}, got " +
              shape_str(x.shape()) + " and " + shape_str(w.shape()));
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int F = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  require(w.dim(0) == C, "conv2d_transpose: kernel channels " + shape_str(w.shape()) +
                             " do not match input " + shape_str(x.shape()));
  require(b.rank() == 1 && b.dim(0) == F, "conv2d_transpose: bias must be {F}");
  require(conv_out(out_h, kh, stride) == H && conv_out(out_w, kw, stride) == W,
          "conv2d_transpose: output size " + std::to_string(out_h) + "x" + std::to_string(out_w) +
              " is not a valid conv preimage of " + shape_str(x.shape()));
  auto out = make_result<S>(Shape{F, out_h, out_w});
  out.value() = ArrayX<S>::Zero((long)F * out_h * out_w);
  ConstMatMap<S> Wm(w.value().data(), C, F * kh * kw);
  ConstMatMap<S> X(x.value().data(), C, H * W);
  MatrixRM<S> cols = Wm.transpose() * X;  // {F*kh*kw, H*W}
  detail::col2im(cols, F, out_h, out_w, kh, kw, stride, H, W, out.value().data());
  for (int f = 0; f < F; ++f)
    out.value().segment((long)f * out_h * out_w, (long)out_h * out_w) += b.value()[f];
  record<S>([x, w, b, out, C, H, W, F, kh, kw, stride, out_h, out_w] {
    if (!out.has_grad()) return;
    MatrixRM<S> gcols;
    detail::im2col(out.node()->grad, F, out_h, out_w, kh, kw, stride, H, W, gcols);
    ConstMatMap<S> Wm(w.value().data(), C, F * kh * kw);
    ConstMatMap<S> X(x.value().data(), C, H * W);
    MatMap<S>(x.node()->grad_ref().data(), C, H * W).noalias() += Wm * gcols;
    MatMap<S>(w.node()->grad_ref().data(), C, F * kh * kw).noalias() += X * gcols.transpose();
    auto& db = b.node()->grad_ref();
    for (int f = 0; f < F; ++f)
      db[f] += out.node()->grad.segment((long)f * out_h * out_w, (long)out_h * out_w).sum();
  });
  return out;
}

// A {m,k} times B^T for B {n,k}; result {m,n}. Lets batched layers reuse
// weight matrices stored {out,in}.
template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
          "matmul_nt: need {m,k} and {n,k}, got " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  auto out = make_result<S>(Shape{m, n});
  out.value().resize((long)m * n);
  ConstMatMap<S> A(a.value().data(), m, k), B(b.value().data(), n, k);
  MatMap<S>(out.value().data(), m, n).noalias() = A * B.transpose();
  record<S>([a, b, out, m, k, n] {
    if (!out.has_grad()) return;
    ConstMatMap<S> A(a.value().data(), m, k), B(b.value().data(), n, k);
    ConstMatMap<S> G(out.node()->grad.data(), m, n);
    MatMap<S>(a.node()->grad_ref().data(), m, k).noalias() += G * B;
    MatMap<S>(b.node()->grad_ref().data(), n, k).noalias() += G.transpose() * A;
  });
  return out;
}

// log softmax along rows of {r,c} (or over a rank-1 vector)
template <typename S>
Tensor<S> log_softmax(const Tensor<S>& a) {
  const int rows = a.rank() == 2 ? a.dim(0) : 1;
  const int cols = a.rank() == 2 ? a.dim(1) : a.dim(0);
  auto out = make_result<S>(a.shape());
  out.value().resize(a.size());
  for (int r = 0; r < rows; ++r) {
    auto x = a.value().segment((long)r * cols, cols);
    S mx = x.maxCoeff();
    S lse = mx + std::log((x - mx).exp().sum());
    out.value().segment((long)r * cols, cols) = x - lse;
  }
  record<S>([a, out, rows, cols] {
    if (!out.has_grad()) return;
    auto& da = a.node()->grad_ref();
    for (int r = 0; r < rows; ++r) {
      auto g = out.node()->grad.segment((long)r * cols, cols);
      auto y = out.value().segment((long)r * cols, cols);
      da.segment((long)r * cols, cols) += g - g.sum() * y.exp();
    }
  });
  return out;
}

// picks x[r, idx[r]] per row; result {r}
template <typename S>
Tensor<S> gather_rows(const Tensor<S>& a, const std::vector<int>& idx) {
  require(a.rank() == 2 && (long)idx.size() == a.dim(0),
          "gather_rows: need {r,c} with one index per row");
  const int rows = a.dim(0), cols = a.dim(1);
  auto out = make_result<S>(Shape{rows});
  out.value().resize(rows);
  for (int r = 0; r < rows; ++r) {
    require(idx[r] >= 0 && idx[r] < cols, "gather_rows: index out of range");
    out.value()[r] = a.value()[(long)r * cols + idx[r]];
  }
  record<S>([a, out, idx, rows, cols] {
    if (!out.has_grad()) return;
    auto& da = a.node()->grad_ref();
    for (int r = 0; r < rows; ++r) da[(long)r * cols + idx[r]] += out.node()->grad[r];
  });
  return out;
}

// per-row sums of {r,c} -> {r}
template <typename S>
Tensor<S> sum_rows(const Tensor<S>& a) {
  require(a.rank() == 2, "sum_rows: rank-2 tensor expected, got " + shape_str(a.shape()));
  const int rows = a.dim(0), cols = a.dim(1);
  auto out = make_result<S>(Shape{rows});
  out.value().resize(rows);
  for (int r = 0; r < rows; ++r) out.value()[r] = a.value().segment((long)r * cols, cols).sum();
  record<S>([a, out, rows, cols] {
    if (!out.has_grad()) return;
    auto& da = a.node()->grad_ref();
    for (int r = 0; r < rows; ++r) da.segment((long)r * cols, cols) += out.node()->grad[r];
  });
  return out;
}

// elementwise minimum; gradient follows the smaller operand (ties go left)
template <typename S>
Tensor<S> minimum(const Tensor<S>& a, const Tensor<S>& b) {
  require(a.shape() == b.shape(), "minimum: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  auto out = make_result<S>(a.shape());
  out.value() = a.value().min(b.value());
  record<S>([a, b, out] {
    if (!out.has_grad()) return;
    const auto& g = out.node()->grad;
    ArrayX<S> left = (a.value() <= b.value()).template cast<S>();
    a.node()->grad_ref() += g * left;
    b.node()->grad_ref() += g * (S(1) - left);
  });
  return out;
}

// clamp to constant bounds; gradient passes only inside the interval
template <typename S>
Tensor<S> clamp(const Tensor<S>& a, S lo, S hi) {
  auto out = make_result<S>(a.shape());
  out.value() = a.value().max(lo).min(hi);
  record<S>([a, out, lo, hi] {
    if (!out.has_grad()) return;
    ArrayX<S> inside = ((a.value() >= lo) && (a.value() <= hi)).template cast<S>();
    a.node()->grad_ref() += out.node()->grad * inside;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Bernoulli negative log-likelihood, mean over elements. Predictions are
// clamped to [1e-7, 1-1e-7]; the target is treated as a constant.

template <typename S>
Tensor<S> bernoulli_nll(const Tensor<S>& recon, const Tensor<S>& target) {
  require(recon.shape() == target.shape(), "bernoulli_nll: shape mismatch " +
                                               shape_str(recon.shape()) + " vs " +
                                               shape_str(target.shape()));
  const S lo = S(1e-7), hi = S(1) - S(1e-7);
  auto out = make_result<S>(Shape{1});
  ArrayX<S> r = recon.value().min(hi).max(lo);
  const auto& t = target.value();
  out.value() = ArrayX<S>::Constant(1, -(t * r.log() + (S(1) - t) * (S(1) - r).log()).mean());
  record<S>([recon, target, out, lo, hi] {
    if (!out.has_grad()) return;
    S g = out.node()->grad[0] / (S)recon.size();
    ArrayX<S> r = recon.value().min(hi).max(lo);
    const auto& t = target.value();
    // zero gradient where the clamp is active
    ArrayX<S> inside = ((recon.value() > lo) && (recon.value() < hi)).template cast<S>();
    recon.node()->grad_ref() += g * inside * (r - t) / (r * (S(1) - r));
  });
  return out;
}

}  // namespace nca
