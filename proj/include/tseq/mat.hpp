#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "tseq/common.hpp"

namespace tseq {

template <class T>
using Vec = std::vector<T>;

// Dense row-major matrix. The shape is fixed at construction; assignment
// replaces the whole object. Rows double as batch lanes throughout the
// library, so a Vec is the rows==1 special case.
template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Mat(std::initializer_list<std::initializer_list<T>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw DimensionError("ragged Mat initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Mat from_row(const Vec<T>& v) {
    Mat m(1, v.size());
    m.data_.assign(v.begin(), v.end());
    return m;
  }

  static Mat from_col(const Vec<T>& v) {
    Mat m(v.size(), 1);
    m.data_.assign(v.begin(), v.end());
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* row(std::size_t r) { return data_.data() + r * cols_; }
  const T* row(std::size_t r) const { return data_.data() + r * cols_; }

  Vec<T> row_vec(std::size_t r) const {
    return Vec<T>(row(r), row(r) + cols_);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Reshape-in-place used by the tape arena to recycle buffers between
  // windows; not part of the public shape contract.
  void reset_shape(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    data_.resize(rows * cols);
  }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace tseq
