#pragma once

#include <cstdint>
#include <cstring>
#include <deque>
#include <vector>

#include "tseq/common.hpp"
#include "tseq/mat.hpp"
#include "tseq/numerics.hpp"
#include "tseq/params.hpp"

namespace tseq {

// Eager reverse-mode tape over batched row-major matrices (rows = batch
// lanes). Forward values are computed as ops are recorded; backward walks
// the nodes in reverse and accumulates gradients into node buffers and the
// bound ParamStore. reset() recycles node buffers, so per-window graphs of
// identical shape reuse their allocations.
template <class T>
class Tape {
  enum class Op : std::uint8_t {
    kInput,
    kParamMatmul,
    kParamBias,
    kEmbedRows,
    kAdd,
    kMul,
    kScale,
    kSigmoid,
    kTanh,
    kRelu,
    kSoftplus,
    kLog,
    kExp,
    kSoftmaxRows,
    kConcatCols,
    kSliceCols,
    kPickNll,
    kXentLogits,
    kSqErr,
    kReduceSum,
  };

  struct Node {
    Op op = Op::kInput;
    int a = -1, b = -1;   // input node ids
    int param = -1;       // ParamStore entry id
    int i0 = 0;           // aux int (slice offset)
    T scalar = T(0);
    Mat<T> val;
    Mat<T> grad;
    Mat<T> aux;            // cached softmax for kPickNll / kXentLogits
    std::vector<int> idx;  // row / target indices
  };

 public:
  explicit Tape(ParamStore<T>& params) : params_(params) {}

  void reset() { used_ = 0; }
  std::size_t size() const { return used_; }

  const Mat<T>& val(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  const Mat<T>& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // Scalar value of a 1x1 node.
  T scalar_value(int id) const { return val(id)(0, 0); }

  int input(const Mat<T>& v) {
    Node& n = alloc(Op::kInput, v.rows(), v.cols());
    std::memcpy(n.val.data(), v.data(), sizeof(T) * v.size());
    return last_;
  }

  int input_col(const std::vector<T>& v) {
    Node& n = alloc(Op::kInput, v.size(), 1);
    std::memcpy(n.val.data(), v.data(), sizeof(T) * v.size());
    return last_;
  }

  int param_matmul(int x, int param) {
    const auto& w = params_.at(param).value;
    const Mat<T>& xv = val(x);
    if (xv.cols() != w.rows())
      throw DimensionError("tape matmul: " + shape_str(xv.rows(), xv.cols()) + " * " +
                           shape_str(w.rows(), w.cols()));
    Node& n = alloc(Op::kParamMatmul, xv.rows(), w.cols());
    n.a = x;
    n.param = param;
    kern::matmul(xv.data(), w.data(), n.val.data(), xv.rows(), xv.cols(), w.cols());
    return last_;
  }

  int param_bias(int x, int param) {
    const auto& b = params_.at(param).value;
    const Mat<T>& xv = val(x);
    if (b.size() != xv.cols()) throw DimensionError("tape bias: width mismatch");
    Node& n = alloc(Op::kParamBias, xv.rows(), xv.cols());
    n.a = x;
    n.param = param;
    std::memcpy(n.val.data(), xv.data(), sizeof(T) * xv.size());
    kern::add_bias(n.val.data(), b.data(), xv.rows(), xv.cols());
    return last_;
  }

  int embed_rows(int param, const std::vector<int>& rows) {
    const auto& e = params_.at(param).value;
    Node& n = alloc(Op::kEmbedRows, rows.size(), e.cols());
    n.param = param;
    n.idx = rows;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= e.rows())
        throw DimensionError("embed_rows: index out of range");
      std::memcpy(n.val.row(r), e.row(static_cast<std::size_t>(rows[r])), sizeof(T) * e.cols());
    }
    return last_;
  }

  int add(int a, int b) { return binary(Op::kAdd, a, b); }
  int mul(int a, int b) { return binary(Op::kMul, a, b); }

  int scale(int a, T c) {
    const Mat<T>& av = val(a);
    Node& n = alloc(Op::kScale, av.rows(), av.cols());
    n.a = a;
    n.scalar = c;
    for (std::size_t i = 0; i < av.size(); ++i) n.val.data()[i] = av.data()[i] * c;
    return last_;
  }

  int sigmoid(int a) { return unary(Op::kSigmoid, a); }
  int tanh_(int a) { return unary(Op::kTanh, a); }
  int relu(int a) { return unary(Op::kRelu, a); }
  int softplus(int a) { return unary(Op::kSoftplus, a); }
  int log_(int a) { return unary(Op::kLog, a); }
  int exp_(int a) { return unary(Op::kExp, a); }

  int softmax_rows(int a) {
    const Mat<T>& av = val(a);
    Node& n = alloc(Op::kSoftmaxRows, av.rows(), av.cols());
    n.a = a;
    kern::softmax_rows(av.data(), n.val.data(), av.rows(), av.cols());
    return last_;
  }

  int concat_cols(int a, int b) {
    const Mat<T>& av = val(a);
    const Mat<T>& bv = val(b);
    if (av.rows() != bv.rows()) throw DimensionError("concat_cols: row mismatch");
    Node& n = alloc(Op::kConcatCols, av.rows(), av.cols() + bv.cols());
    n.a = a;
    n.b = b;
    for (std::size_t r = 0; r < av.rows(); ++r) {
      std::memcpy(n.val.row(r), av.row(r), sizeof(T) * av.cols());
      std::memcpy(n.val.row(r) + av.cols(), bv.row(r), sizeof(T) * bv.cols());
    }
    return last_;
  }

  int slice_cols(int a, std::size_t off, std::size_t len) {
    const Mat<T>& av = val(a);
    if (off + len > av.cols()) throw DimensionError("slice_cols: out of range");
    Node& n = alloc(Op::kSliceCols, av.rows(), len);
    n.a = a;
    n.i0 = static_cast<int>(off);
    for (std::size_t r = 0; r < av.rows(); ++r)
      std::memcpy(n.val.row(r), av.row(r) + off, sizeof(T) * len);
    return last_;
  }

  // Per-row -log softmax(logits)[target]; output [B,1].
  int pick_nll(int logits, const std::vector<int>& targets) {
    const Mat<T>& lv = val(logits);
    if (targets.size() != lv.rows()) throw DimensionError("pick_nll: target count");
    Node& n = alloc(Op::kPickNll, lv.rows(), 1);
    n.a = logits;
    n.idx = targets;
    n.aux.reset_shape(lv.rows(), lv.cols());
    kern::softmax_rows(lv.data(), n.aux.data(), lv.rows(), lv.cols());
    for (std::size_t r = 0; r < lv.rows(); ++r) {
      const int t = targets[r];
      if (t < 0 || static_cast<std::size_t>(t) >= lv.cols())
        throw DimensionError("pick_nll: target out of range");
      const double p = std::max(static_cast<double>(n.aux(r, static_cast<std::size_t>(t))), kLogFloor);
      n.val(r, 0) = static_cast<T>(-std::log(p));
    }
    return last_;
  }

  // Per-row -sum target * log softmax(logits); target is a node treated as
  // a constant (no gradient flows into it). Output [B,1].
  int xent_logits(int target, int logits) {
    const Mat<T>& tv = val(target);
    const Mat<T>& lv = val(logits);
    if (!tv.same_shape(lv)) throw DimensionError("xent_logits: shape mismatch");
    Node& n = alloc(Op::kXentLogits, lv.rows(), 1);
    n.a = target;
    n.b = logits;
    n.aux.reset_shape(lv.rows(), lv.cols());
    kern::softmax_rows(lv.data(), n.aux.data(), lv.rows(), lv.cols());
    for (std::size_t r = 0; r < lv.rows(); ++r) {
      double loss = 0;
      for (std::size_t c = 0; c < lv.cols(); ++c) {
        const double p = std::max(static_cast<double>(n.aux(r, c)), kLogFloor);
        loss -= static_cast<double>(tv(r, c)) * std::log(p);
      }
      n.val(r, 0) = static_cast<T>(loss);
    }
    return last_;
  }

  int sq_err(int a, int b) {
    const Mat<T>& av = val(a);
    const Mat<T>& bv = val(b);
    if (!av.same_shape(bv)) throw DimensionError("sq_err: shape mismatch");
    Node& n = alloc(Op::kSqErr, av.rows(), av.cols());
    n.a = a;
    n.b = b;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T d = av.data()[i] - bv.data()[i];
      n.val.data()[i] = d * d;
    }
    return last_;
  }

  int reduce_sum(int a) {
    const Mat<T>& av = val(a);
    Node& n = alloc(Op::kReduceSum, 1, 1);
    n.a = a;
    double s = 0;
    for (std::size_t i = 0; i < av.size(); ++i) s += static_cast<double>(av.data()[i]);
    n.val(0, 0) = static_cast<T>(s);
    return last_;
  }

  // Seeds d(root)=1 and accumulates gradients into node buffers and the
  // bound ParamStore. root must be 1x1.
  void backward(int root) {
    Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.val.size() != 1) throw DimensionError("backward: root must be scalar");
    r.grad(0, 0) = T(1);
    for (int i = root; i >= 0; --i) step_back(nodes_[static_cast<std::size_t>(i)]);
  }

 private:
  Node& alloc(Op op, std::size_t rows, std::size_t cols) {
    if (used_ == nodes_.size()) nodes_.emplace_back();
    Node& n = nodes_[used_];
    last_ = static_cast<int>(used_);
    ++used_;
    n.op = op;
    n.a = n.b = -1;
    n.param = -1;
    n.i0 = 0;
    n.val.reset_shape(rows, cols);
    n.grad.reset_shape(rows, cols);
    n.grad.fill(T(0));
    return n;
  }

  int binary(Op op, int a, int b) {
    const Mat<T>& av = val(a);
    const Mat<T>& bv = val(b);
    if (!av.same_shape(bv)) throw DimensionError("tape binary op: shape mismatch");
    Node& n = alloc(op, av.rows(), av.cols());
    n.a = a;
    n.b = b;
    if (op == Op::kAdd)
      for (std::size_t i = 0; i < av.size(); ++i) n.val.data()[i] = av.data()[i] + bv.data()[i];
    else
      for (std::size_t i = 0; i < av.size(); ++i) n.val.data()[i] = av.data()[i] * bv.data()[i];
    return last_;
  }

  int unary(Op op, int a) {
    const Mat<T>& av = val(a);
    Node& n = alloc(op, av.rows(), av.cols());
    n.a = a;
    T* y = n.val.data();
    const T* x = av.data();
    switch (op) {
      case Op::kSigmoid:
        for (std::size_t i = 0; i < av.size(); ++i) y[i] = kern::sigmoid1(x[i]);
        break;
      case Op::kTanh:
        for (std::size_t i = 0; i < av.size(); ++i) y[i] = std::tanh(x[i]);
        break;
      case Op::kRelu:
        for (std::size_t i = 0; i < av.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        break;
      case Op::kSoftplus:
        for (std::size_t i = 0; i < av.size(); ++i) y[i] = kern::softplus1(x[i]);
        break;
      case Op::kLog:
        for (std::size_t i = 0; i < av.size(); ++i)
          y[i] = std::log(std::max(static_cast<double>(x[i]), kLogFloor));
        break;
      case Op::kExp:
        for (std::size_t i = 0; i < av.size(); ++i) y[i] = std::exp(x[i]);
        break;
      default:
        throw Error("bad unary op");
    }
    return last_;
  }

  Mat<T>& g(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Mat<T>& v(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }

  void step_back(Node& n) {
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kParamMatmul: {
        const Mat<T>& x = v(n.a);
        auto& p = params_.at(n.param);
        kern::matmul_acc_dx(n.grad.data(), p.value.data(), g(n.a).data(), x.rows(), x.cols(),
                            p.value.cols());
        kern::matmul_acc_dw(x.data(), n.grad.data(), p.grad.data(), x.rows(), x.cols(),
                            p.value.cols());
        break;
      }
      case Op::kParamBias: {
        Mat<T>& dx = g(n.a);
        auto& p = params_.at(n.param);
        for (std::size_t i = 0; i < n.grad.size(); ++i) dx.data()[i] += n.grad.data()[i];
        T* db = p.grad.data();
        for (std::size_t r = 0; r < n.grad.rows(); ++r) {
          const T* gr = n.grad.row(r);
          for (std::size_t c = 0; c < n.grad.cols(); ++c) db[c] += gr[c];
        }
        break;
      }
      case Op::kEmbedRows: {
        auto& p = params_.at(n.param);
        for (std::size_t r = 0; r < n.idx.size(); ++r) {
          T* dst = p.grad.row(static_cast<std::size_t>(n.idx[r]));
          const T* src = n.grad.row(r);
          for (std::size_t c = 0; c < n.grad.cols(); ++c) dst[c] += src[c];
        }
        break;
      }
      case Op::kAdd: {
        Mat<T>& da = g(n.a);
        Mat<T>& db = g(n.b);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          da.data()[i] += n.grad.data()[i];
          db.data()[i] += n.grad.data()[i];
        }
        break;
      }
      case Op::kMul: {
        Mat<T>& da = g(n.a);
        Mat<T>& db = g(n.b);
        const Mat<T>& av = v(n.a);
        const Mat<T>& bv = v(n.b);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          da.data()[i] += n.grad.data()[i] * bv.data()[i];
          db.data()[i] += n.grad.data()[i] * av.data()[i];
        }
        break;
      }
      case Op::kScale: {
        Mat<T>& da = g(n.a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) da.data()[i] += n.grad.data()[i] * n.scalar;
        break;
      }
      case Op::kSigmoid: {
        Mat<T>& da = g(n.a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const T y = n.val.data()[i];
          da.data()[i] += n.grad.data()[i] * y * (T(1) - y);
        }
        break;
      }
      case Op::kTanh: {
        Mat<T>& da = g(n.a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const T y = n.val.data()[i];
          da.data()[i] += n.grad.data()[i] * (T(1) - y * y);
        }
        break;
      }
      case Op::kRelu: {
        Mat<T>& da = g(n.a);
        const Mat<T>& av = v(n.a);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          if (av.data()[i] > T(0)) da.data()[i] += n.grad.data()[i];
        break;
      }
      case Op::kSoftplus: {
        Mat<T>& da = g(n.a);
        const Mat<T>& av = v(n.a);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          da.data()[i] += n.grad.data()[i] * kern::sigmoid1(av.data()[i]);
        break;
      }
      case Op::kLog: {
        Mat<T>& da = g(n.a);
        const Mat<T>& av = v(n.a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const double x = static_cast<double>(av.data()[i]);
          if (x > kLogFloor) da.data()[i] += n.grad.data()[i] / static_cast<T>(x);
        }
        break;
      }
      case Op::kExp: {
        Mat<T>& da = g(n.a);
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          da.data()[i] += n.grad.data()[i] * n.val.data()[i];
        break;
      }
      case Op::kSoftmaxRows: {
        Mat<T>& da = g(n.a);
        for (std::size_t r = 0; r < n.val.rows(); ++r) {
          const T* y = n.val.row(r);
          const T* dy = n.grad.row(r);
          T dot = T(0);
          for (std::size_t c = 0; c < n.val.cols(); ++c) dot += dy[c] * y[c];
          T* dar = da.row(r);
          for (std::size_t c = 0; c < n.val.cols(); ++c) dar[c] += (dy[c] - dot) * y[c];
        }
        break;
      }
      case Op::kConcatCols: {
        Mat<T>& da = g(n.a);
        Mat<T>& db = g(n.b);
        for (std::size_t r = 0; r < n.grad.rows(); ++r) {
          const T* gr = n.grad.row(r);
          T* dar = da.row(r);
          T* dbr = db.row(r);
          for (std::size_t c = 0; c < da.cols(); ++c) dar[c] += gr[c];
          for (std::size_t c = 0; c < db.cols(); ++c) dbr[c] += gr[da.cols() + c];
        }
        break;
      }
      case Op::kSliceCols: {
        Mat<T>& da = g(n.a);
        const std::size_t off = static_cast<std::size_t>(n.i0);
        for (std::size_t r = 0; r < n.grad.rows(); ++r) {
          const T* gr = n.grad.row(r);
          T* dar = da.row(r) + off;
          for (std::size_t c = 0; c < n.grad.cols(); ++c) dar[c] += gr[c];
        }
        break;
      }
      case Op::kPickNll: {
        Mat<T>& da = g(n.a);
        for (std::size_t r = 0; r < n.aux.rows(); ++r) {
          const T gy = n.grad(r, 0);
          if (gy == T(0)) continue;
          const T* s = n.aux.row(r);
          T* dar = da.row(r);
          for (std::size_t c = 0; c < n.aux.cols(); ++c) dar[c] += gy * s[c];
          dar[static_cast<std::size_t>(n.idx[r])] -= gy;
        }
        break;
      }
      case Op::kXentLogits: {
        // Gradient flows into logits only; target side is a constant.
        Mat<T>& db = g(n.b);
        const Mat<T>& tv = v(n.a);
        for (std::size_t r = 0; r < n.aux.rows(); ++r) {
          const T gy = n.grad(r, 0);
          if (gy == T(0)) continue;
          const T* s = n.aux.row(r);
          const T* t = tv.row(r);
          T tsum = T(0);
          for (std::size_t c = 0; c < n.aux.cols(); ++c) tsum += t[c];
          T* dbr = db.row(r);
          for (std::size_t c = 0; c < n.aux.cols(); ++c) dbr[c] += gy * (tsum * s[c] - t[c]);
        }
        break;
      }
      case Op::kSqErr: {
        Mat<T>& da = g(n.a);
        Mat<T>& db = g(n.b);
        const Mat<T>& av = v(n.a);
        const Mat<T>& bv = v(n.b);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          const T d = T(2) * (av.data()[i] - bv.data()[i]) * n.grad.data()[i];
          da.data()[i] += d;
          db.data()[i] -= d;
        }
        break;
      }
      case Op::kReduceSum: {
        Mat<T>& da = g(n.a);
        const T gy = n.grad(0, 0);
        for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] += gy;
        break;
      }
    }
  }

  ParamStore<T>& params_;
  // deque: growth must not invalidate Mat references held across alloc().
  std::deque<Node> nodes_;
  std::size_t used_ = 0;
  int last_ = -1;
};

}  // namespace tseq
