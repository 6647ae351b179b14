#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "flexknn/errors.hpp"

namespace flexknn {

// Dense row-major matrix. Small and boring on purpose: the library only needs
// square transforms of modest dimension (d <= 100).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> entries) {
    Matrix m(entries.size(), entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
    return m;
  }

  static Matrix diagonal(std::initializer_list<double> entries) {
    return diagonal(std::span<const double>(entries.begin(), entries.size()));
  }

  // Counter-clockwise rotation of the plane by `angle` radians.
  static Matrix rotation2d(double angle) {
    Matrix m(2, 2);
    const double c = std::cos(angle), s = std::sin(angle);
    m(0, 0) = c;
    m(0, 1) = -s;
    m(1, 0) = s;
    m(1, 1) = c;
    return m;
  }

  static Matrix from_rows(std::size_t rows, std::size_t cols, std::span<const double> entries) {
    if (entries.size() != rows * cols) throw DimensionMismatch("matrix entry count does not match shape");
    Matrix m(rows, cols);
    std::copy(entries.begin(), entries.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_ && rows_ > 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix& other) const = default;

  // out = M * v
  void apply_to(std::span<const double> v, std::vector<double>& out) const {
    if (v.size() != cols_) throw DimensionMismatch("matrix-vector size mismatch");
    out.assign(rows_, 0.0);
    const double* row = data_.data();
    for (std::size_t i = 0; i < rows_; ++i, row += cols_) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) acc += row[j] * v[j];
      out[i] = acc;
    }
  }

  std::vector<double> apply(std::span<const double> v) const {
    std::vector<double> out;
    apply_to(v, out);
    return out;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix operator*(const Matrix& rhs) const {
    if (cols_ != rhs.rows_) throw DimensionMismatch("matrix-matrix size mismatch");
    Matrix out(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        const double a = (*this)(i, k);
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
      }
    return out;
  }

  double frobenius_norm() const {
    double acc = 0.0;
    for (double x : data_) acc += x * x;
    return std::sqrt(acc);
  }

  double max_abs() const {
    double acc = 0.0;
    for (double x : data_) acc = std::max(acc, std::fabs(x));
    return acc;
  }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // column j pairs with values[j]
};

// Classical cyclic Jacobi for symmetric matrices. Terminates when the
// off-diagonal Frobenius norm drops below 1e-12 (relative to the input scale)
// or after 100 sweeps, whichever comes first.
inline EigenDecomposition jacobi_eigen_sym(const Matrix& s) {
  if (!s.square()) throw DimensionMismatch("eigendecomposition needs a square matrix");
  const std::size_t n = s.rows();
  if (n > 100) throw InvalidParameter("jacobi solver is limited to dimension 100");

  Matrix a = s;
  Matrix v = Matrix::identity(n);
  const double scale = std::max(1.0, a.frobenius_norm());
  const double tol = 1e-12 * scale;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    off = std::sqrt(2.0 * off);
    if (off < tol) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= tol / (10.0 * static_cast<double>(n))) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        const double tau = sn / (1.0 + c);

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = aip - sn * (aiq + tau * aip);
          a(p, i) = a(i, p);
          a(i, q) = aiq + sn * (aip - tau * aiq);
          a(q, i) = a(i, q);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = vip - sn * (viq + tau * vip);
          v(i, q) = viq + sn * (vip - tau * viq);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = diag[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

// Singular values of a square matrix: square roots of the eigenvalues of A^T A,
// in descending order. Tiny negative eigenvalues from roundoff clamp to zero.
inline std::vector<double> singular_values(const Matrix& m) {
  if (!m.square()) throw DimensionMismatch("singular values implemented for square matrices");
  EigenDecomposition e = jacobi_eigen_sym(m.transpose() * m);
  std::vector<double> sv(e.values.size());
  for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = std::sqrt(std::max(0.0, e.values[i]));
  return sv;
}

struct Svd {
  Matrix u;
  std::vector<double> sigma;  // descending
  Matrix v;                   // A = U diag(sigma) V^T
};

// Full SVD of a square matrix via the Jacobi eigensolver on A^T A. Columns of
// U belonging to (near-)zero singular values are completed by Gram-Schmidt so
// U is always orthonormal.
inline Svd svd(const Matrix& m) {
  if (!m.square()) throw DimensionMismatch("svd implemented for square matrices");
  const std::size_t n = m.rows();
  EigenDecomposition e = jacobi_eigen_sym(m.transpose() * m);

  Svd out;
  out.v = e.vectors;
  out.sigma.resize(n);
  out.u = Matrix(n, n);
  double smax = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out.sigma[j] = std::sqrt(std::max(0.0, e.values[j]));
    smax = std::max(smax, out.sigma[j]);
  }
  const double tiny = std::max(smax, 1.0) * 1e-13;

  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (out.sigma[j] > tiny) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += m(i, k) * out.v(k, j);
        col[i] = acc / out.sigma[j];
      }
    } else {
      // Null direction of A^T: pick a basis vector and orthogonalize below.
      std::fill(col.begin(), col.end(), 0.0);
      col[j] = 1.0;
    }
    // Modified Gram-Schmidt against the columns already placed.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t prev = 0; prev < j; ++prev) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += col[i] * out.u(i, prev);
        for (std::size_t i = 0; i < n; ++i) col[i] -= dot * out.u(i, prev);
      }
    }
    double norm = 0.0;
    for (double x : col) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      // Degenerate direction; try each basis vector until one survives.
      for (std::size_t b = 0; b < n && norm < 1e-12; ++b) {
        std::fill(col.begin(), col.end(), 0.0);
        col[b] = 1.0;
        for (std::size_t prev = 0; prev < j; ++prev) {
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += col[i] * out.u(i, prev);
          for (std::size_t i = 0; i < n; ++i) col[i] -= dot * out.u(i, prev);
        }
        norm = 0.0;
        for (double x : col) norm += x * x;
        norm = std::sqrt(norm);
      }
    }
    for (std::size_t i = 0; i < n; ++i) out.u(i, j) = col[i] / norm;
  }
  return out;
}

// Max-norm test of Q^T Q = I.
inline bool is_orthogonal(const Matrix& q, double tol = 1e-10) {
  if (!q.square()) return false;
  const std::size_t n = q.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += q(k, i) * q(k, j);
      const double want = i == j ? 1.0 : 0.0;
      if (std::fabs(dot - want) > tol) return false;
    }
  return true;
}

// Invertibility in the numerical sense used throughout: the smallest singular
// value must exceed 1e-10 times the largest.
inline bool is_invertible(const Matrix& m) {
  if (!m.square() || !m.all_finite()) return false;
  std::vector<double> sv = singular_values(m);
  if (sv.front() <= 0.0) return false;
  return sv.back() > 1e-10 * sv.front();
}

// Nearest matrix (in the rotationally invariant sense) whose singular values
// lie in [lo, hi]: clamp the spectrum, keep U and V.
inline Matrix clamp_singular_values(const Matrix& m, double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo)) throw InvalidParameter("singular value bounds must satisfy 0 < lo <= hi");
  Svd s = svd(m);
  bool changed = false;
  for (double& sigma : s.sigma) {
    double clamped = std::clamp(sigma, lo, hi);
    if (clamped != sigma) changed = true;
    sigma = clamped;
  }
  if (!changed) return m;
  const std::size_t n = m.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += s.u(i, k) * s.sigma[k] * s.v(j, k);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace flexknn
