#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "winoq/errors.hpp"

namespace winoq {

// Small dense row-major FP64 matrix. Sized for transform construction
// (n <= 8), not for bulk compute.
class Mat {
 public:
  Mat() = default;
  Mat(size_t rows, size_t cols, double v = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, v) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double& operator()(size_t i, size_t j) { return data_[i * cols_ + j]; }
  double operator()(size_t i, size_t j) const { return data_[i * cols_ + j]; }
  const std::vector<double>& data() const { return data_; }

  static Mat identity(size_t n) {
    Mat m(n, n);
    for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  Mat transposed() const {
    Mat t(cols_, rows_);
    for (size_t i = 0; i < rows_; ++i)
      for (size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Mat operator*(const Mat& o) const {
    if (cols_ != o.rows_) throw InvalidShape("Mat multiply: inner dims differ");
    Mat out(rows_, o.cols_);
    for (size_t i = 0; i < rows_; ++i)
      for (size_t k = 0; k < cols_; ++k) {
        const double a = (*this)(i, k);
        if (a == 0.0) continue;
        for (size_t j = 0; j < o.cols_; ++j) out(i, j) += a * o(k, j);
      }
    return out;
  }

  Mat operator-(const Mat& o) const {
    Mat out(rows_, cols_);
    for (size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] - o.data_[i];
    return out;
  }

  // Scale row i by s[i].
  Mat row_scaled(const std::vector<double>& s) const {
    Mat out = *this;
    for (size_t i = 0; i < rows_; ++i)
      for (size_t j = 0; j < cols_; ++j) out(i, j) *= s[i];
    return out;
  }

  // Scale column j by s[j].
  Mat col_scaled(const std::vector<double>& s) const {
    Mat out = *this;
    for (size_t i = 0; i < rows_; ++i)
      for (size_t j = 0; j < cols_; ++j) out(i, j) *= s[j];
    return out;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
  }

  // Inverse via partial-pivot Gauss-Jordan. Throws SingularTransform.
  Mat inverted() const {
    if (rows_ != cols_) throw InvalidShape("Mat invert: not square");
    const size_t n = rows_;
    Mat a = *this;
    Mat inv = identity(n);
    for (size_t col = 0; col < n; ++col) {
      size_t pivot = col;
      for (size_t r = col + 1; r < n; ++r)
        if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
      if (std::fabs(a(pivot, col)) < 1e-12)
        throw SingularTransform("Mat invert: singular matrix");
      if (pivot != col) {
        for (size_t j = 0; j < n; ++j) {
          std::swap(a(col, j), a(pivot, j));
          std::swap(inv(col, j), inv(pivot, j));
        }
      }
      const double d = a(col, col);
      for (size_t j = 0; j < n; ++j) {
        a(col, j) /= d;
        inv(col, j) /= d;
      }
      for (size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        const double f = a(r, col);
        if (f == 0.0) continue;
        for (size_t j = 0; j < n; ++j) {
          a(r, j) -= f * a(col, j);
          inv(r, j) -= f * inv(col, j);
        }
      }
    }
    return inv;
  }

 private:
  size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

}  // namespace winoq
