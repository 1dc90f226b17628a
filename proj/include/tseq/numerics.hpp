#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "tseq/common.hpp"
#include "tseq/mat.hpp"

namespace tseq {

// Floor for log arguments and cross-entropy probabilities.
inline constexpr double kLogFloor = 1e-12;

namespace kern {

// y = x W, shapes x[B,N] W[N,M] y[B,M]. Plain ikj loops; every matrix
// product in the library funnels through here so the forward math is
// identical between the tape and the plain model paths.
template <class T>
void matmul(const T* x, const T* w, T* y, std::size_t B, std::size_t N, std::size_t M) {
  std::fill(y, y + B * M, T(0));
  for (std::size_t b = 0; b < B; ++b) {
    const T* xr = x + b * N;
    T* yr = y + b * M;
    for (std::size_t n = 0; n < N; ++n) {
      const T xv = xr[n];
      if (xv == T(0)) continue;
      const T* wr = w + n * M;
      for (std::size_t m = 0; m < M; ++m) yr[m] += xv * wr[m];
    }
  }
}

// dx += dy W^T
template <class T>
void matmul_acc_dx(const T* dy, const T* w, T* dx, std::size_t B, std::size_t N, std::size_t M) {
  for (std::size_t b = 0; b < B; ++b) {
    const T* dyr = dy + b * M;
    T* dxr = dx + b * N;
    for (std::size_t n = 0; n < N; ++n) {
      const T* wr = w + n * M;
      T acc = T(0);
      for (std::size_t m = 0; m < M; ++m) acc += dyr[m] * wr[m];
      dxr[n] += acc;
    }
  }
}

// dW += x^T dy
template <class T>
void matmul_acc_dw(const T* x, const T* dy, T* dw, std::size_t B, std::size_t N, std::size_t M) {
  for (std::size_t b = 0; b < B; ++b) {
    const T* xr = x + b * N;
    const T* dyr = dy + b * M;
    for (std::size_t n = 0; n < N; ++n) {
      const T xv = xr[n];
      if (xv == T(0)) continue;
      T* dwr = dw + n * M;
      for (std::size_t m = 0; m < M; ++m) dwr[m] += xv * dyr[m];
    }
  }
}

template <class T>
void add_bias(T* y, const T* b, std::size_t B, std::size_t M) {
  for (std::size_t r = 0; r < B; ++r) {
    T* yr = y + r * M;
    for (std::size_t m = 0; m < M; ++m) yr[m] += b[m];
  }
}

template <class T>
T sigmoid1(T v) {
  // Split on sign so exp never overflows.
  if (v >= T(0)) {
    const T e = std::exp(-v);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <class T>
T softplus1(T v) {
  // log(1+exp(v)) = max(v,0) + log1p(exp(-|v|))
  const T m = v > T(0) ? v : T(0);
  return m + std::log1p(std::exp(-std::abs(v)));
}

// Row-wise softmax with max subtraction.
template <class T>
void softmax_rows(const T* x, T* y, std::size_t B, std::size_t M) {
  for (std::size_t b = 0; b < B; ++b) {
    const T* xr = x + b * M;
    T* yr = y + b * M;
    T mx = xr[0];
    for (std::size_t m = 1; m < M; ++m) mx = std::max(mx, xr[m]);
    T sum = T(0);
    for (std::size_t m = 0; m < M; ++m) {
      yr[m] = std::exp(xr[m] - mx);
      sum += yr[m];
    }
    const T inv = T(1) / sum;
    for (std::size_t m = 0; m < M; ++m) yr[m] *= inv;
  }
}

}  // namespace kern

// ---- Spec-surface vector operations ----

template <class T>
Vec<T> affine(const Vec<T>& x, const Mat<T>& w, const Vec<T>& b) {
  if (x.size() != w.rows() || b.size() != w.cols())
    throw DimensionError("affine: x[" + std::to_string(x.size()) + "] W[" +
                         shape_str(w.rows(), w.cols()) + "] b[" + std::to_string(b.size()) + "]");
  Vec<T> y(b.begin(), b.end());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const T xv = x[n];
    if (xv == T(0)) continue;
    const T* wr = w.row(n);
    for (std::size_t m = 0; m < y.size(); ++m) y[m] += xv * wr[m];
  }
  return y;
}

template <class T>
Vec<T> softmax(const Vec<T>& v) {
  if (v.empty()) throw DimensionError("softmax: empty input");
  Vec<T> y(v.size());
  kern::softmax_rows(v.data(), y.data(), 1, v.size());
  return y;
}

template <class T>
Vec<T> sigmoid(const Vec<T>& v) {
  Vec<T> y(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) y[i] = kern::sigmoid1(v[i]);
  return y;
}

template <class T>
Vec<T> relu(const Vec<T>& v) {
  Vec<T> y(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) y[i] = v[i] > T(0) ? v[i] : T(0);
  return y;
}

template <class T>
Vec<T> tanh_vec(const Vec<T>& v) {
  Vec<T> y(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) y[i] = std::tanh(v[i]);
  return y;
}

template <class T>
T softplus(T v) {
  return kern::softplus1(v);
}

// -sum target_k log(pred_k), with pred floored at kLogFloor. Both inputs
// must be probability distributions.
template <class T>
T cross_entropy(const Vec<T>& target, const Vec<T>& pred) {
  if (target.size() != pred.size() || target.empty())
    throw DimensionError("cross_entropy: size mismatch");
  auto check = [](const Vec<T>& p, const char* name) {
    T sum = T(0);
    for (T v : p) {
      if (v < T(0)) throw DomainError(std::string("cross_entropy: negative entry in ") + name);
      sum += v;
    }
    if (std::abs(static_cast<double>(sum) - 1.0) > 1e-6)
      throw DomainError(std::string("cross_entropy: ") + name + " does not sum to 1");
  };
  check(target, "target");
  check(pred, "pred");
  double loss = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::max(static_cast<double>(pred[i]), kLogFloor);
    loss -= static_cast<double>(target[i]) * std::log(p);
  }
  return static_cast<T>(loss);
}

template <class T>
T l2_norm_sq(const Vec<T>& v) {
  T s = T(0);
  for (T x : v) s += x * x;
  return s;
}

}  // namespace tseq
