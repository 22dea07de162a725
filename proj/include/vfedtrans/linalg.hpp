/*
 * Copyright 2026 The VFedTrans Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dense 64-bit linear algebra used by the federated protocols: a row-major
// Matrix, Householder QR, one-sided Jacobi SVD, block-random orthogonal
// matrices and power iteration.

#ifndef VFEDTRANS_LINALG_HPP_
#define VFEDTRANS_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vfedtrans/error.hpp"
#include "vfedtrans/rng.hpp"

namespace vfedtrans {

using Vector = std::vector<double>;

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw NumericError("Matrix: non-finite fill value");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Matrix: " + std::to_string(data_.size()) +
                       " values do not fill " + shape_str(rows_, cols_));
    }
    for (std::size_t k = 0; k < data_.size(); ++k) {
      if (!std::isfinite(data_[k])) {
        throw NumericError("Matrix: non-finite entry at (" +
                           std::to_string(k / std::max<std::size_t>(cols_, 1)) + "," +
                           std::to_string(k % std::max<std::size_t>(cols_, 1)) + ")");
      }
    }
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data_) v = vfedtrans::gaussian(rng);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  Vector col(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  // Rows [r0, r0+nr), columns [c0, c0+nc).
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) {
      throw ShapeError("Matrix::block out of range for " + shape_str(rows_, cols_));
    }
    Matrix b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>((r0 + i) * cols_ + c0), nc,
                  b.data_.begin() + static_cast<std::ptrdiff_t>(i * nc));
    return b;
  }

  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto src = row(idx[k]);
      std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
  }

  Matrix select_cols(std::span<const std::size_t> idx) const {
    Matrix out(rows_, idx.size());
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < idx.size(); ++k) out(i, k) = (*this)(i, idx[k]);
    return out;
  }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  void require_same_shape(const Matrix& o, const char* op) const {
    if (o.rows_ != rows_ || o.cols_ != cols_) {
      throw ShapeError(std::string("Matrix ") + op + ": " + shape_str(rows_, cols_) +
                       " vs " + shape_str(o.rows_, o.cols_));
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) { return matmul(a, b); }

// aᵀ·b without materializing the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + shape_str(a.rows(), a.cols()) + "ᵀ * " +
                     shape_str(b.rows(), b.cols()));
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

inline Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw ShapeError("matvec: " + shape_str(a.rows(), a.cols()) + " * vector of " +
                     std::to_string(x.size()));
  }
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    y[i] = std::inner_product(r.begin(), r.end(), x.begin(), 0.0);
  }
  return y;
}

// aᵀ·x
inline Vector matvec_t(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) {
    throw ShapeError("matvec_t: " + shape_str(a.rows(), a.cols()) + "ᵀ * vector of " +
                     std::to_string(x.size()));
  }
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * x[i];
  }
  return y;
}

inline Matrix outer(std::span<const double> a, std::span<const double> b) {
  Matrix m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
  return m;
}

inline Matrix hstack(std::span<const Matrix> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("hstack: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      auto src = p.row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(off));
      off += p.cols();
    }
  }
  return out;
}

inline Matrix vstack(std::span<const Matrix> parts) {
  if (parts.empty()) return {};
  const std::size_t cols = parts.front().cols();
  std::vector<double> data;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("vstack: column counts differ");
    data.insert(data.end(), p.data().begin(), p.data().end());
    rows += p.rows();
  }
  return Matrix(rows, cols, std::move(data));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double frobenius_norm(const Matrix& m) { return norm2(m.data()); }

inline double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double v : m.data()) r = std::max(r, std::abs(v));
  return r;
}

// max |(QᵀQ - I)_ij|
inline double orthogonality_error(const Matrix& q) {
  Matrix g = matmul_tn(q, q);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return max_abs(g);
}

struct QrResult {
  Matrix q;  // m x n, orthonormal columns
  Matrix r;  // n x n, upper triangular
};

// Thin Householder QR of an m x n matrix with m >= n.
inline QrResult qr(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw ShapeError("qr: needs rows >= cols, got " + shape_str(m, n));
  Matrix r = a;
  std::vector<Vector> reflectors;
  reflectors.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vector v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
    const double alpha = norm2(v);
    if (alpha == 0.0) {
      reflectors.emplace_back();
      continue;
    }
    v[0] += (v[0] >= 0.0 ? alpha : -alpha);
    const double vn = norm2(v);
    for (double& x : v) x /= vn;
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * r(i, j);
      for (std::size_t i = k; i < m; ++i) r(i, j) -= 2.0 * s * v[i - k];
    }
    reflectors.push_back(std::move(v));
  }
  Matrix q(m, n);
  for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
  for (std::size_t kk = n; kk-- > 0;) {
    const Vector& v = reflectors[kk];
    if (v.empty()) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = kk; i < m; ++i) s += v[i - kk] * q(i, j);
      for (std::size_t i = kk; i < m; ++i) q(i, j) -= 2.0 * s * v[i - kk];
    }
  }
  Matrix rr(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) rr(i, j) = r(i, j);
  return {std::move(q), std::move(rr)};
}

struct SvdResult {
  Matrix u;      // m x k
  Vector sigma;  // k, nonincreasing
  Matrix vt;     // k x n
};

namespace detail {

// One-sided Jacobi on the columns of w (n x n here); accumulates rotations in v.
inline void jacobi_orthogonalize(Matrix& w, Matrix& v, std::size_t max_sweeps) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const double tol = static_cast<double>(std::max<std::size_t>(m, 1)) * 2.220446049250313e-16;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          alpha += wp * wp;
          beta += wq * wq;
          gamma += wp * wq;
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < v.rows(); ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
  throw ConvergenceError("svd: one-sided Jacobi did not converge", max_sweeps);
}

// Replace the columns of u flagged in `fill` by unit vectors orthogonal to all
// other columns (modified Gram-Schmidt against the standard basis).
inline void complete_orthonormal(Matrix& u, const std::vector<bool>& fill) {
  const std::size_t m = u.rows();
  std::size_t basis = 0;
  for (std::size_t j = 0; j < u.cols(); ++j) {
    if (!fill[j]) continue;
    for (; basis < m; ++basis) {
      Vector e(m, 0.0);
      e[basis] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < u.cols(); ++c) {
          if (c == j || (fill[c] && c > j)) continue;
          double s = 0.0;
          for (std::size_t i = 0; i < m; ++i) s += u(i, c) * e[i];
          for (std::size_t i = 0; i < m; ++i) e[i] -= s * u(i, c);
        }
      }
      const double nrm = norm2(e);
      if (nrm > 1e-6) {
        for (std::size_t i = 0; i < m; ++i) u(i, j) = e[i] / nrm;
        ++basis;
        break;
      }
    }
  }
}

}  // namespace detail

inline constexpr std::size_t kSvdMaxSweeps = 80;

// Thin SVD truncated to the leading k singular triples. Householder QR
// reduces the tall side, then one-sided Jacobi diagonalizes R. The largest
// magnitude entry of every left singular vector is made nonnegative.
inline SvdResult svd(const Matrix& m, std::size_t k, std::size_t max_sweeps = kSvdMaxSweeps) {
  const std::size_t rows = m.rows(), cols = m.cols();
  if (k < 1 || k > std::min(rows, cols)) {
    throw ShapeError("svd: rank bound " + std::to_string(k) + " outside [1, " +
                     std::to_string(std::min(rows, cols)) + "]");
  }
  if (rows < cols) {
    SvdResult t = svd(m.transpose(), k, max_sweeps);
    SvdResult out{t.vt.transpose(), std::move(t.sigma), t.u.transpose()};
    // Re-apply the sign convention to the new left vectors.
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t arg = 0;
      for (std::size_t i = 0; i < out.u.rows(); ++i)
        if (std::abs(out.u(i, j)) > std::abs(out.u(arg, j))) arg = i;
      if (out.u(arg, j) < 0.0) {
        for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, j) = -out.u(i, j);
        for (std::size_t c = 0; c < out.vt.cols(); ++c) out.vt(j, c) = -out.vt(j, c);
      }
    }
    return out;
  }

  auto [q, r] = qr(m);
  Matrix w = std::move(r);
  Matrix v = Matrix::identity(cols);
  detail::jacobi_orthogonalize(w, v, max_sweeps);

  Vector sig(cols);
  for (std::size_t j = 0; j < cols; ++j) sig[j] = norm2(w.col(j));
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sig[a] > sig[b]; });

  const double smax = cols ? sig[order[0]] : 0.0;
  const double tiny = std::max(smax, 1.0) * 1e-300;
  Matrix ur(cols, k);
  std::vector<bool> fill(k, false);
  SvdResult out{Matrix(rows, k), Vector(k), Matrix(k, cols)};
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = sig[src];
    if (sig[src] <= tiny) {
      fill[j] = true;
      out.sigma[j] = 0.0;
    } else {
      for (std::size_t i = 0; i < cols; ++i) ur(i, j) = w(i, src) / sig[src];
    }
    for (std::size_t c = 0; c < cols; ++c) out.vt(j, c) = v(c, src);
  }
  if (std::find(fill.begin(), fill.end(), true) != fill.end()) {
    detail::complete_orthonormal(ur, fill);
  }
  out.u = matmul(q, ur);

  for (std::size_t j = 0; j < k; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 0; i < rows; ++i)
      if (std::abs(out.u(i, j)) > std::abs(out.u(arg, j))) arg = i;
    if (out.u(arg, j) < 0.0) {
      for (std::size_t i = 0; i < rows; ++i) out.u(i, j) = -out.u(i, j);
      for (std::size_t c = 0; c < cols; ++c) out.vt(j, c) = -out.vt(j, c);
    }
  }
  return out;
}

inline Matrix reconstruct(const SvdResult& s) {
  Matrix us = s.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s.sigma[j];
  return matmul(us, s.vt);
}

inline constexpr std::size_t kDefaultBlockSize = 100;

// Block-diagonal orthogonal matrix: ceil(n / block_size) blocks, each the
// sign-corrected Q factor of a Gaussian block (Haar distributed per block).
inline Matrix random_orthogonal(std::size_t n, std::size_t block_size, Rng& rng) {
  if (n < 1) throw ShapeError("random_orthogonal: n must be >= 1");
  if (block_size < 1) throw ShapeError("random_orthogonal: block_size must be >= 1");
  Matrix out(n, n);
  for (std::size_t start = 0; start < n; start += block_size) {
    const std::size_t b = std::min(block_size, n - start);
    auto [q, r] = qr(Matrix::gaussian(b, b, rng));
    for (std::size_t j = 0; j < b; ++j) {
      const double sign = r(j, j) < 0.0 ? -1.0 : 1.0;
      for (std::size_t i = 0; i < b; ++i) out(start + i, start + j) = sign * q(i, j);
    }
  }
  return out;
}

inline bool is_symmetric(const Matrix& a, double tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, max_abs(a));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol * scale) return false;
  return true;
}

struct PowerResult {
  Vector vector;          // unit Euclidean norm
  double value = 0.0;     // Rayleigh quotient of `vector`
  Vector rayleigh_trace;  // Rayleigh quotient after every step
};

// Normalized power iteration x <- A x / |A x| for `steps` steps on the
// symmetric operator `apply` (x -> A x) of dimension n. Starts from `start`
// when given (warm start), otherwise from the all-ones direction.
template <typename Apply>
PowerResult power_iteration_op(Apply&& apply, std::size_t n, std::size_t steps,
                               std::optional<Vector> start = std::nullopt) {
  if (steps < 1) throw ShapeError("power_iteration: steps must be >= 1");
  if (n == 0) throw NumericError("power_iteration: no dominant eigenvector (empty operator)");
  Vector x = start ? *start : Vector(n, 1.0);
  if (x.size() != n) throw ShapeError("power_iteration: start vector has wrong length");
  double nx = norm2(x);
  if (nx == 0.0) {
    x.assign(n, 1.0);
    nx = norm2(x);
  }
  for (double& e : x) e /= nx;

  PowerResult res;
  res.rayleigh_trace.reserve(steps);
  for (std::size_t l = 0; l < steps; ++l) {
    Vector y = apply(x);
    double ny = norm2(y);
    // Start vector in the null space: restart from the first basis vector
    // with a nonzero image.
    for (std::size_t j = 0; ny == 0.0 && j < n; ++j) {
      Vector e(n, 0.0);
      e[j] = 1.0;
      y = apply(e);
      ny = norm2(y);
    }
    if (ny == 0.0) throw NumericError("power_iteration: no dominant eigenvector (zero operator)");
    for (double& e : y) e /= ny;
    x = std::move(y);
    res.rayleigh_trace.push_back(dot(x, apply(x)));
  }
  res.value = res.rayleigh_trace.back();
  res.vector = std::move(x);
  return res;
}

inline PowerResult power_iteration(const Matrix& a, std::size_t steps,
                                   std::optional<Vector> start = std::nullopt) {
  if (a.rows() != a.cols()) throw ShapeError("power_iteration: matrix is not square");
  if (!is_symmetric(a)) throw NumericError("power_iteration: matrix is not symmetric");
  if (a.rows() == 0 || max_abs(a) == 0.0) {
    throw NumericError("power_iteration: no dominant eigenvector (zero matrix)");
  }
  return power_iteration_op([&a](const Vector& v) { return matvec(a, v); }, a.rows(), steps,
                            std::move(start));
}

}  // namespace vfedtrans

#endif  // VFEDTRANS_LINALG_HPP_
