#pragma once

// Tape-based reverse-mode differentiation over rank-2 tensors.
//
// A Tape records nodes in creation order, so parents always precede
// children and backward is a single reverse sweep. Parameter leaves refer to
// tensors owned by a ParamSet; that ParamSet must outlive the tape.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgn_social/tensor.hpp"

namespace tgn_social {

enum class OpKind {
  kLeaf,
  kMatMul,
  kAdd,
  kAddRow,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kTanh,
  kCos,
  kRelu,
  kConcat,
  kStackRows,
  kSliceCols,
  kTranspose,
  kSoftmaxRows,
  kMeanRows,
  kSum,
  kBceWithLogits,
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  struct Node {
    OpKind op = OpKind::kLeaf;
    std::vector<int> parents;
    Tensor value;
    const Tensor* external = nullptr;  // parameter leaf storage
    std::string param_name;            // non-empty for trainable leaves
    bool requires_grad = false;
    Real scalar = 0.0;               // scale factor
    std::size_t offset = 0;            // slice start column
    std::vector<Real> labels;        // bce targets

    const Tensor& val() const { return external ? *external : value; }
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  /// Leaf bound to a parameter. Trainable leaves receive gradients on backward.
  Var parameter(const ParamSet& params, const std::string& name, bool trainable) {
    Node n;
    n.external = &params.at(name);
    if (trainable) {
      n.param_name = name;
      n.requires_grad = true;
    }
    return push(std::move(n));
  }

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].val(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  Var record(OpKind op, std::vector<int> parents, Tensor value) {
    Node n;
    n.op = op;
    for (int p : parents) n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(p)].requires_grad;
    n.parents = std::move(parents);
    n.value = std::move(value);
    return push(std::move(n));
  }

  Node& last() { return nodes_.back(); }

  /// Accumulates d(loss)/d(param) into `grads` for every trainable leaf whose
  /// name exists in `grads`. The tape is left unchanged, so calling this twice
  /// accumulates twice.
  void backward(Var loss, ParamSet& grads) const;

 private:
  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

namespace detail {

inline void require_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || !a.valid()) throw std::invalid_argument("vars belong to different tapes");
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

inline Real sigmoid(Real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

// c (m x n) += a (m x k) * b (k x n)
inline void gemm_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  Real* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = pa[i * k + p];
      if (av == 0.0) continue;
      const Real* brow = pb + p * n;
      Real* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c (m x k) += g (m x n) * b^T   where b is (k x n)
inline void gemm_acc_bt(const Tensor& g, const Tensor& b, Tensor& c) {
  const std::size_t m = g.rows(), n = g.cols(), k = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* grow = g.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real* brow = b.data().data() + p * n;
      Real s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
      c(i, p) += s;
    }
  }
}

// c (k x n) += a^T * g   where a is (m x k), g is (m x n)
inline void gemm_acc_at(const Tensor& a, const Tensor& g, Tensor& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = g.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const Real* grow = g.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = a(i, p);
      if (av == 0.0) continue;
      Real* crow = c.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

template <typename F>
Var unary(OpKind op, const Var& a, F f) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.tape()->record(op, {a.id()}, std::move(out));
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  detail::require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ, " + x.shape().str() + " * " + y.shape().str());
  }
  Tensor out(x.rows(), y.cols());
  detail::gemm_acc(x, y, out);
  return a.tape()->record(OpKind::kMatMul, {a.id(), b.id()}, std::move(out));
}

/// Elementwise sum. A 1 x n `b` is also accepted against an m x n `a`
/// (bias added to every row); no other broadcasting.
inline Var add(const Var& a, const Var& b) {
  detail::require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() == y.shape()) {
    Tensor out = x;
    out += y;
    return a.tape()->record(OpKind::kAdd, {a.id(), b.id()}, std::move(out));
  }
  if (y.rows() == 1 && y.cols() == x.cols()) {
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) += y[c];
    return a.tape()->record(OpKind::kAddRow, {a.id(), b.id()}, std::move(out));
  }
  throw std::invalid_argument("add: shape mismatch " + x.shape().str() + " vs " + y.shape().str());
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_same_shape("sub", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.tape()->record(OpKind::kSub, {a.id(), b.id()}, std::move(out));
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_same_shape("mul", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.tape()->record(OpKind::kMul, {a.id(), b.id()}, std::move(out));
}

inline Var scale(const Var& a, Real factor) {
  Var out = detail::unary(OpKind::kScale, a, [factor](Real v) { return v * factor; });
  out.tape()->last().scalar = factor;
  return out;
}

inline Var sigmoid(const Var& a) { return detail::unary(OpKind::kSigmoid, a, detail::sigmoid); }
inline Var tanh(const Var& a) { return detail::unary(OpKind::kTanh, a, [](Real v) { return std::tanh(v); }); }
inline Var cos(const Var& a) { return detail::unary(OpKind::kCos, a, [](Real v) { return std::cos(v); }); }
inline Var relu(const Var& a) { return detail::unary(OpKind::kRelu, a, [](Real v) { return v > 0.0 ? v : 0.0; }); }

/// Column-wise concatenation of tensors with equal row counts. For 1 x n
/// rows this is plain vector concatenation.
inline Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: empty list");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    detail::require_same_tape(parts[0], p);
    if (p.value().rows() != rows) {
      throw std::invalid_argument("concat: row count mismatch " + parts[0].shape().str() + " vs " + p.shape().str());
    }
    cols += p.value().cols();
    ids.push_back(p.id());
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, off + c) = v(r, c);
    off += v.cols();
  }
  return parts[0].tape()->record(OpKind::kConcat, std::move(ids), std::move(out));
}

inline Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

/// Stacks 1 x n rows into an m x n matrix.
inline Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty list");
  const std::size_t cols = rows[0].value().cols();
  Tensor out(rows.size(), cols);
  std::vector<int> ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    detail::require_same_tape(rows[0], rows[r]);
    const Tensor& v = rows[r].value();
    if (v.rows() != 1 || v.cols() != cols) {
      throw std::invalid_argument("stack_rows: expected 1x" + std::to_string(cols) + ", got " + v.shape().str());
    }
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * cols));
    ids.push_back(rows[r].id());
  }
  return rows[0].tape()->record(OpKind::kStackRows, std::move(ids), std::move(out));
}

inline Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  const Tensor& x = a.value();
  if (count == 0 || begin + count > x.cols()) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") outside " + x.shape().str());
  }
  Tensor out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = x(r, begin + c);
  Var v = a.tape()->record(OpKind::kSliceCols, {a.id()}, std::move(out));
  a.tape()->last().offset = begin;
  return v;
}

inline Var transpose(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(c, r) = x(r, c);
  return a.tape()->record(OpKind::kTranspose, {a.id()}, std::move(out));
}

/// Row-wise softmax, stabilised by subtracting each row's maximum.
inline Var softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t c = 0; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    Real total = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      out(r, c) = std::exp(x(r, c) - mx);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) /= total;
  }
  return a.tape()->record(OpKind::kSoftmaxRows, {a.id()}, std::move(out));
}

/// m x n -> 1 x n column means.
inline Var mean_rows(const Var& a) {
  const Tensor& x = a.value();
  Tensor out(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x(r, c);
  for (std::size_t c = 0; c < x.cols(); ++c) out[c] /= static_cast<Real>(x.rows());
  return a.tape()->record(OpKind::kMeanRows, {a.id()}, std::move(out));
}

inline Var sum(const Var& a) {
  Real s = 0.0;
  for (Real v : a.value().data()) s += v;
  return a.tape()->record(OpKind::kSum, {a.id()}, Tensor::scalar(s));
}

/// Mean binary cross-entropy of an m x 1 (or 1 x 1) logit column against
/// 0/1 labels, in the overflow-free form max(x,0) - x*y + log(1 + e^-|x|).
inline Var bce_with_logits(const Var& logits, std::span<const double> labels) {
  const Tensor& x = logits.value();
  if (x.cols() != 1 || x.rows() != labels.size()) {
    throw std::invalid_argument("bce_with_logits: expected " + std::to_string(labels.size()) +
                                "x1 logits, got " + x.shape().str());
  }
  Real total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("bce_with_logits: labels must be 0 or 1");
    const Real v = x[i];
    total += std::max<Real>(v, 0.0) - v * y + std::log1p(std::exp(-std::abs(v)));
  }
  Var out = logits.tape()->record(OpKind::kBceWithLogits, {logits.id()},
                                  Tensor::scalar(total / static_cast<Real>(labels.size())));
  out.tape()->last().labels.assign(labels.begin(), labels.end());
  return out;
}

inline Var bce_with_logits(const Var& logit, double label) {
  return bce_with_logits(logit, std::span<const double>(&label, 1));
}

inline void Tape::backward(Var loss, ParamSet& grads) const {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  const Tensor& lv = value(loss.id());
  if (lv.size() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + lv.shape().str());

  const std::size_t root = static_cast<std::size_t>(loss.id());
  std::vector<Tensor> g(root + 1);
  g[root] = Tensor::scalar(1.0);

  auto grad_of = [&](int id) -> Tensor& {
    Tensor& t = g[static_cast<std::size_t>(id)];
    if (t.empty()) {
      const Tensor& v = value(id);
      t = Tensor(v.rows(), v.cols());
    }
    return t;
  };

  for (std::size_t idx = root + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (!n.requires_grad || g[idx].empty()) continue;
    const Tensor& dy = g[idx];
    const Tensor& y = n.val();
    auto wants = [&](std::size_t k) { return nodes_[static_cast<std::size_t>(n.parents[k])].requires_grad; };
    auto pval = [&](std::size_t k) -> const Tensor& { return value(n.parents[k]); };

    switch (n.op) {
      case OpKind::kLeaf: {
        if (Tensor* target = grads.find(n.param_name)) *target += dy;
        break;
      }
      case OpKind::kMatMul: {
        if (wants(0)) detail::gemm_acc_bt(dy, pval(1), grad_of(n.parents[0]));
        if (wants(1)) detail::gemm_acc_at(pval(0), dy, grad_of(n.parents[1]));
        break;
      }
      case OpKind::kAdd: {
        if (wants(0)) grad_of(n.parents[0]) += dy;
        if (wants(1)) grad_of(n.parents[1]) += dy;
        break;
      }
      case OpKind::kAddRow: {
        if (wants(0)) grad_of(n.parents[0]) += dy;
        if (wants(1)) {
          Tensor& gb = grad_of(n.parents[1]);
          for (std::size_t r = 0; r < dy.rows(); ++r)
            for (std::size_t c = 0; c < dy.cols(); ++c) gb[c] += dy(r, c);
        }
        break;
      }
      case OpKind::kSub: {
        if (wants(0)) grad_of(n.parents[0]) += dy;
        if (wants(1)) {
          Tensor& gb = grad_of(n.parents[1]);
          for (std::size_t i = 0; i < dy.size(); ++i) gb[i] -= dy[i];
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = pval(0);
        const Tensor& b = pval(1);
        if (wants(0)) {
          Tensor& ga = grad_of(n.parents[0]);
          for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * b[i];
        }
        if (wants(1)) {
          Tensor& gb = grad_of(n.parents[1]);
          for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += dy[i] * a[i];
        }
        break;
      }
      case OpKind::kScale: {
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * n.scalar;
        break;
      }
      case OpKind::kSigmoid: {
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case OpKind::kTanh: {
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case OpKind::kCos: {
        const Tensor& x = pval(0);
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) ga[i] -= dy[i] * std::sin(x[i]);
        break;
      }
      case OpKind::kRelu: {
        const Tensor& x = pval(0);
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          if (x[i] > 0.0) ga[i] += dy[i];
        }
        break;
      }
      case OpKind::kConcat: {
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          const std::size_t w = pval(k).cols();
          if (wants(k)) {
            Tensor& gp = grad_of(n.parents[k]);
            for (std::size_t r = 0; r < dy.rows(); ++r)
              for (std::size_t c = 0; c < w; ++c) gp(r, c) += dy(r, off + c);
          }
          off += w;
        }
        break;
      }
      case OpKind::kStackRows: {
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          if (!wants(k)) continue;
          Tensor& gp = grad_of(n.parents[k]);
          for (std::size_t c = 0; c < dy.cols(); ++c) gp[c] += dy(k, c);
        }
        break;
      }
      case OpKind::kSliceCols: {
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t r = 0; r < dy.rows(); ++r)
          for (std::size_t c = 0; c < dy.cols(); ++c) ga(r, n.offset + c) += dy(r, c);
        break;
      }
      case OpKind::kTranspose: {
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t r = 0; r < dy.rows(); ++r)
          for (std::size_t c = 0; c < dy.cols(); ++c) ga(c, r) += dy(r, c);
        break;
      }
      case OpKind::kSoftmaxRows: {
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t r = 0; r < dy.rows(); ++r) {
          Real dot = 0.0;
          for (std::size_t c = 0; c < dy.cols(); ++c) dot += dy(r, c) * y(r, c);
          for (std::size_t c = 0; c < dy.cols(); ++c) ga(r, c) += y(r, c) * (dy(r, c) - dot);
        }
        break;
      }
      case OpKind::kMeanRows: {
        Tensor& ga = grad_of(n.parents[0]);
        const Real inv = 1.0 / static_cast<Real>(ga.rows());
        for (std::size_t r = 0; r < ga.rows(); ++r)
          for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += dy[c] * inv;
        break;
      }
      case OpKind::kSum: {
        Tensor& ga = grad_of(n.parents[0]);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += dy[0];
        break;
      }
      case OpKind::kBceWithLogits: {
        const Tensor& x = pval(0);
        Tensor& ga = grad_of(n.parents[0]);
        const Real inv = 1.0 / static_cast<Real>(n.labels.size());
        for (std::size_t i = 0; i < n.labels.size(); ++i) {
          ga[i] += dy[0] * (detail::sigmoid(x[i]) - n.labels[i]) * inv;
        }
        break;
      }
    }
  }
}

struct GradCheckReport {
  Real max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  Real worst_analytic = 0.0;
  Real worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Builds a scalar loss on the given tape from the given parameters.
using LossBuilder = std::function<Var(Tape&, const ParamSet&)>;

/// Compares backward() against central differences (L(p+e) - L(p-e)) / 2e
/// for every entry of every parameter. Relative error per entry is
/// |a - n| / max(1e-8, |a| + |n|).
inline GradCheckReport grad_check(const LossBuilder& loss_fn, const ParamSet& params, Real epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-4)) {
    throw std::invalid_argument("grad_check: epsilon must lie in [1e-6, 1e-4]");
  }
  ParamSet grads = params.zeros_like();
  {
    Tape tape;
    Var loss = loss_fn(tape, params);
    tape.backward(loss, grads);
  }

  ParamSet probe = params;
  auto eval = [&]() {
    Tape tape;
    return loss_fn(tape, probe).value().item();
  };

  GradCheckReport report;
  for (auto& [name, tensor] : probe) {
    const Tensor& analytic = grads.at(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const Real saved = tensor[i];
      tensor[i] = saved + epsilon;
      const Real up = eval();
      tensor[i] = saved - epsilon;
      const Real down = eval();
      tensor[i] = saved;
      const Real numeric = (up - down) / (2.0 * epsilon);
      const Real a = analytic[i];
      const Real err = std::abs(a - numeric) / std::max<Real>(1e-8, std::abs(a) + std::abs(numeric));
      ++report.entries_checked;
      if (err > report.max_relative_error || report.worst_param.empty()) {
        if (err >= report.max_relative_error) {
          report.max_relative_error = err;
          report.worst_param = name;
          report.worst_index = i;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace tgn_social
