#ifndef MLELAB_LINALG_HPP
#define MLELAB_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mlelab {

using Vec = std::vector<double>;

/// Dense row-major matrix, just enough for the fixed-design setting
/// (d <= a few hundred).
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }

  const std::vector<double>& data() const { return data_; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const double* a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator-(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec operator+(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec operator*(double c, const Vec& a) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
  return r;
}

/// y = M x.
inline Vec matvec(const Matrix& m, const Vec& x) {
  if (x.size() != m.cols()) throw std::invalid_argument("matvec: dimension mismatch");
  Vec y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row_ptr(i), x);
  return y;
}

/// Quadratic form x^T M x for symmetric M.
inline double quad_form(const Matrix& m, const Vec& x) {
  return dot(x, matvec(m, x));
}

struct SymmetricEigen {
  Vec values;       // ascending
  Matrix vectors;   // columns are eigenvectors, vectors(i, k) = v_k[i]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps until the
/// off-diagonal Frobenius norm drops below 1e-12 (absolute, with a
/// machine-precision relative floor for large-norm inputs).
inline SymmetricEigen symmetric_eigen(const Matrix& a_in) {
  const std::size_t n = a_in.rows();
  if (n != a_in.cols()) throw std::invalid_argument("symmetric_eigen: matrix not square");
  Matrix a = a_in;
  Matrix v = Matrix::identity(n);

  double fro = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) fro += a(i, j) * a(i, j);
  fro = std::sqrt(fro);
  const double tol = std::max(1e-12, 1e-15 * fro);

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) < tol) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0)
                             ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                             : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymmetricEigen out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);

  // Sort ascending, permuting eigenvector columns to match.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return out.values[x] < out.values[y]; });
  Vec sorted_vals(n);
  Matrix sorted_vecs(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    sorted_vals[k] = out.values[order[k]];
    for (std::size_t i = 0; i < n; ++i) sorted_vecs(i, k) = v(i, order[k]);
  }
  out.values = std::move(sorted_vals);
  out.vectors = std::move(sorted_vecs);
  return out;
}

/// V f(Lambda) V^T for a symmetric matrix's eigendecomposition.
template <typename F>
inline Matrix eigen_apply(const SymmetricEigen& eig, F&& f) {
  const std::size_t n = eig.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = f(eig.values[k]);
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = eig.vectors(i, k);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += fk * vik * eig.vectors(j, k);
    }
  }
  return out;
}

/// Solve A x = b for symmetric positive definite A via its eigensystem.
/// Throws when the smallest eigenvalue is not safely positive.
inline Vec spd_solve(const Matrix& a, const Vec& b, double min_eig_floor = 1e-12) {
  const SymmetricEigen eig = symmetric_eigen(a);
  if (eig.values.front() <= min_eig_floor)
    throw std::invalid_argument("spd_solve: matrix is (near-)singular");
  const std::size_t n = b.size();
  Vec x(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double coef = 0.0;
    for (std::size_t i = 0; i < n; ++i) coef += eig.vectors(i, k) * b[i];
    coef /= eig.values[k];
    for (std::size_t i = 0; i < n; ++i) x[i] += coef * eig.vectors(i, k);
  }
  return x;
}

}  // namespace mlelab

#endif  // MLELAB_LINALG_HPP
