#pragma once

#include <cassert>
#include <cstddef>
#include <utility>
#include <vector>

namespace cpt {

// Dense row-major matrix. All kernels below traverse in a fixed order so that
// repeated runs produce bit-identical floating point results.
template <typename T>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat from_data(std::size_t rows, std::size_t cols, std::vector<T> data) {
    assert(data.size() == rows * cols);
    Mat m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(data);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  T* row(std::size_t i) { return data_.data() + i * cols_; }
  const T* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Mat& a, const Mat& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = Mat<double>;
using MatrixF = Mat<float>;

// C = A * B. i-k-j loop order: the inner loop walks contiguous rows of B and C.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// C = A^T * B without materializing the transpose.
template <typename TA>
inline Matrix matmul_at_b(const Mat<TA>& a, const Matrix& b) {
  assert(a.rows() == b.rows());
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const TA* ak = a.row(k);
    const double* bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = static_cast<double>(ak[i]);
      if (aki == 0.0) continue;
      double* ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

// C = A * B^T.
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.cols());
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
  return c;
}

// X * W where X carries a narrower scalar type (e.g. float features).
template <typename TX>
inline Matrix matmul_promote(const Mat<TX>& x, const Matrix& w) {
  assert(x.cols() == w.rows());
  Matrix c(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const TX* xi = x.row(i);
    double* ci = c.row(i);
    for (std::size_t k = 0; k < x.cols(); ++k) {
      const double xik = static_cast<double>(xi[k]);
      if (xik == 0.0) continue;
      const double* wk = w.row(k);
      for (std::size_t j = 0; j < w.cols(); ++j) ci[j] += xik * wk[j];
    }
  }
  return c;
}

inline void add_scaled(Matrix& x, const Matrix& y, double s) {
  assert(x.rows() == y.rows() && x.cols() == y.cols());
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += s * y.data()[i];
}

inline void scale(Matrix& x, double s) {
  for (double& v : x.data()) v *= s;
}

}  // namespace cpt
