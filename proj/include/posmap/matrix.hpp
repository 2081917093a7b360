#ifndef POSMAP_MATRIX_HPP
#define POSMAP_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace posmap {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotHermitianError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Absolute tolerances shared by every numerical predicate in the library.
/// `psd_slack` bounds how negative an eigenvalue may be and still count as
/// nonnegative; `eq_atol` is the entrywise slack for matrix equalities.
struct Tolerance {
  double psd_slack = 1e-9;
  double eq_atol = 1e-10;

  void validate() const {
    if (!std::isfinite(psd_slack) || !std::isfinite(eq_atol) || psd_slack < 0.0 ||
        eq_atol < 0.0) {
      throw std::invalid_argument("tolerances must be finite and nonnegative");
    }
  }
};

/// Dense complex matrix, row-major.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;

  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, Complex{0.0, 0.0}) {}

  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("entry count " + std::to_string(data_.size()) + " does not match " +
                           std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) throw DimensionError("ragged initializer list");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static ComplexMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(std::span<const Complex> diag) {
    ComplexMatrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }

  static ComplexMatrix diagonal(std::initializer_list<double> diag) {
    std::vector<Complex> d(diag.begin(), diag.end());
    return diagonal(std::span<const Complex>(d));
  }

  /// Outer product |u><v|.
  static ComplexMatrix outer(std::span<const Complex> u, std::span<const Complex> v) {
    ComplexMatrix m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * std::conj(v[j]);
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Complex> data() noexcept { return data_; }
  std::span<const Complex> data() const noexcept { return data_; }

  std::span<Complex> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Complex> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  ComplexVector column(std::size_t c) const {
    ComplexVector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
  }

  ComplexMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionError("block out of range");
    ComplexMatrix b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
    return b;
  }

  void set_block(std::size_t r0, std::size_t c0, const ComplexMatrix& b) {
    if (r0 + b.rows_ > rows_ || c0 + b.cols_ > cols_) throw DimensionError("block out of range");
    for (std::size_t i = 0; i < b.rows_; ++i)
      for (std::size_t j = 0; j < b.cols_; ++j) (*this)(r0 + i, c0 + j) = b(i, j);
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }

  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }

  ComplexMatrix& operator*=(Complex s) {
    for (auto& x : data_) x *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator-(ComplexMatrix a) { return a *= -1.0; }
  friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
  friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
  friend ComplexMatrix operator*(ComplexMatrix a, double s) { return a *= Complex{s, 0.0}; }
  friend ComplexMatrix operator*(double s, ComplexMatrix a) { return a *= Complex{s, 0.0}; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_) {
      throw DimensionError("matmul: " + a.shape() + " * " + b.shape());
    }
    ComplexMatrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const Complex aik = a(i, k);
        if (aik == Complex{}) continue;
        const Complex* brow = b.data_.data() + k * b.cols_;
        Complex* crow = c.data_.data() + i * c.cols_;
        for (std::size_t j = 0; j < b.cols_; ++j) crow[j] += aik * brow[j];
      }
    }
    return c;
  }

  std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

 private:
  void require_same_shape(const ComplexMatrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
      throw DimensionError(std::string(op) + ": " + shape() + " vs " + o.shape());
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

inline ComplexVector operator*(const ComplexMatrix& a, std::span<const Complex> x) {
  if (a.cols() != x.size()) throw DimensionError("matvec: " + a.shape() + " * vector");
  ComplexVector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Complex acc{};
    const auto row = a.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

inline ComplexVector operator*(const ComplexMatrix& a, const ComplexVector& x) {
  return a * std::span<const Complex>(x);
}

/// d x d matrix unit with a single 1 at (i, j); indices are zero-based.
inline ComplexMatrix matrix_unit(std::size_t d, std::size_t i, std::size_t j) {
  if (i >= d || j >= d) {
    throw std::out_of_range("matrix_unit index (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range for d=" + std::to_string(d));
  }
  ComplexMatrix e(d, d);
  e(i, j) = 1.0;
  return e;
}

inline ComplexVector basis_vector(std::size_t d, std::size_t k) {
  if (k >= d) throw std::out_of_range("basis_vector index out of range");
  ComplexVector e(d);
  e[k] = 1.0;
  return e;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const Complex aij = a(i, j);
      if (aij == Complex{}) continue;
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          c(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return c;
}

inline ComplexVector kron(std::span<const Complex> a, std::span<const Complex> b) {
  ComplexVector c(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k) c[i * b.size() + k] = a[i] * b[k];
  return c;
}

inline ComplexMatrix transpose(const ComplexMatrix& a) {
  ComplexMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline ComplexMatrix conjugate(const ComplexMatrix& a) {
  ComplexMatrix c = a;
  for (auto& x : c.data()) x = std::conj(x);
  return c;
}

inline ComplexMatrix dagger(const ComplexMatrix& a) {
  ComplexMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = std::conj(a(i, j));
  return t;
}

inline ComplexVector conjugate(std::span<const Complex> v) {
  ComplexVector c(v.begin(), v.end());
  for (auto& x : c) x = std::conj(x);
  return c;
}

inline Complex trace(const ComplexMatrix& a) {
  if (!a.is_square()) throw DimensionError("trace of non-square " + a.shape());
  Complex t{};
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

/// Tr(A B) without forming the product.
inline Complex trace_of_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows() || a.rows() != b.cols()) {
    throw DimensionError("trace_of_product: " + a.shape() + " vs " + b.shape());
  }
  Complex t{};
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) t += a(i, k) * b(k, i);
  return t;
}

inline Complex inner(std::span<const Complex> u, std::span<const Complex> v) {
  if (u.size() != v.size()) throw DimensionError("inner product length mismatch");
  Complex s{};
  for (std::size_t i = 0; i < u.size(); ++i) s += std::conj(u[i]) * v[i];
  return s;
}

inline double norm(std::span<const Complex> v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

/// <u|A|v>
inline Complex sandwich(std::span<const Complex> u, const ComplexMatrix& a,
                        std::span<const Complex> v) {
  if (a.rows() != u.size() || a.cols() != v.size()) throw DimensionError("sandwich dimensions");
  Complex s{};
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (u[i] == Complex{}) continue;
    Complex row{};
    for (std::size_t j = 0; j < a.cols(); ++j) row += a(i, j) * v[j];
    s += std::conj(u[i]) * row;
  }
  return s;
}

inline double max_abs(const ComplexMatrix& a) {
  double m = 0.0;
  for (const auto& x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("max_abs_diff: " + a.shape() + " vs " + b.shape());
  }
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

inline bool approx_equal(const ComplexMatrix& a, const ComplexMatrix& b, double atol) {
  return a.rows() == b.rows() && a.cols() == b.cols() && max_abs_diff(a, b) <= atol;
}

/// max |H - H^dagger| entrywise.
inline double hermiticity_error(const ComplexMatrix& h) {
  if (!h.is_square()) throw DimensionError("hermiticity of non-square " + h.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = i; j < h.cols(); ++j) m = std::max(m, std::abs(h(i, j) - std::conj(h(j, i))));
  return m;
}

inline void require_hermitian(const ComplexMatrix& h, const Tolerance& tol, const char* what) {
  if (!h.is_square()) throw DimensionError(std::string(what) + ": non-square " + h.shape());
  const double err = hermiticity_error(h);
  if (err > tol.eq_atol) {
    throw NotHermitianError(std::string(what) + ": input is not Hermitian (max |H - H^dagger| = " +
                            std::to_string(err) + ")");
  }
}

}  // namespace posmap

#endif  // POSMAP_MATRIX_HPP
