#pragma once

// Dense complex matrix kernels for the small systems handled by hyperlq
// (n is the number of PDE components, typically <= 8).

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperlq/error.hpp"

namespace hyperlq {

using cplx = std::complex<double>;

/// Tolerances shared by every kernel. All are relative unless noted.
struct Tolerances {
  double pivot = 1e-13;             // solve_linear pivot floor, times ||A||_F
  double positive_definite = 1e-13; // sqrtm_hpd eigenvalue floor, times ||P||_F
  double hermitian = 1e-12;         // Hermitian check, times (1 + ||M||_F)
  double stability_margin = 1e-10;  // spectral radius must stay below 1 - margin
  double dlyap = 1e-16;             // doubling stops when the increment is below this
  int qr_iterations_per_eigenvalue = 60;
  int jacobi_sweeps = 100;
  int dlyap_max_doublings = 200;
};

inline constexpr Tolerances kTolerances{};

/// Row-major dense complex matrix. Real data is stored with zero imaginary
/// part. Column vectors are n x 1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "entry count " + std::to_string(data_.size()) +
                      " does not match " + std::to_string(rows_) + "x" +
                      std::to_string(cols_));
    }
  }

  static Matrix real(std::size_t rows, std::size_t cols,
                     std::initializer_list<double> values) {
    std::vector<cplx> entries(values.begin(), values.end());
    return Matrix(rows, cols, std::move(entries));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix scalar(cplx value) { return Matrix(1, 1, {value}); }

  static Matrix diagonal(std::span<const cplx> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  cplx& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }
  const cplx& operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }

  std::span<cplx> entries() noexcept { return data_; }
  std::span<const cplx> entries() const noexcept { return data_; }

  Matrix adjoint() const {
    Matrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
  }

  Matrix transpose() const {
    Matrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
  }

  /// Columns [first, first + count).
  Matrix columns(std::size_t first, std::size_t count) const {
    Matrix out(rows_, count);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, first + j);
    return out;
  }

  Matrix column(std::size_t j) const { return columns(j, 1); }

  double frobenius_norm() const {
    double sum = 0.0;
    for (const auto& v : data_) sum += std::norm(v);
    return std::sqrt(sum);
  }

  bool is_real() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& v) { return v.imag() == 0.0; });
  }

  Matrix& operator+=(const Matrix& rhs) {
    require_same_shape(rhs, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& rhs) {
    require_same_shape(rhs, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= rhs.data_[k];
    return *this;
  }
  Matrix& operator*=(cplx s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
  friend Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
  friend Matrix operator-(Matrix m) {
    for (auto& v : m.data_) v = -v;
    return m;
  }
  friend Matrix operator*(Matrix m, cplx s) { return m *= s; }
  friend Matrix operator*(cplx s, Matrix m) { return m *= s; }
  friend Matrix operator*(Matrix m, double s) { return m *= cplx{s, 0.0}; }
  friend Matrix operator*(double s, Matrix m) { return m *= cplx{s, 0.0}; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "product of " + a.shape() + " and " + b.shape());
    }
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx{}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

  std::string shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  void require_same_shape(const Matrix& rhs, const char* op) const {
    if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
      throw Error(ErrorCode::DimensionMismatch,
                  std::string("operator") + op + " on " + shape() + " and " +
                      rhs.shape());
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

inline Matrix hermitian_part(const Matrix& m) {
  return (m + m.adjoint()) * 0.5;
}

inline bool is_hermitian(const Matrix& m, double rel_tol = kTolerances.hermitian) {
  if (!m.is_square()) return false;
  const double bound = rel_tol * (1.0 + m.frobenius_norm());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j)
      if (std::abs(m(i, j) - std::conj(m(j, i))) > bound) return false;
  return true;
}

/// Quadratic form v* M v for a column vector v; returns the real part.
inline double quadratic_form(const Matrix& m, const Matrix& v) {
  return (v.adjoint() * m * v)(0, 0).real();
}

inline double squared_norm(const Matrix& v) {
  double s = 0.0;
  for (const auto& x : v.entries()) s += std::norm(x);
  return s;
}

/// Solves A X = B by Gaussian elimination with partial pivoting.
/// Throws SingularMatrix when a pivot falls below pivot * ||A||_F.
inline Matrix solve_linear(const Matrix& a, const Matrix& b,
                           const Tolerances& tol = kTolerances) {
  if (!a.is_square() || a.rows() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "solve_linear with A " + a.shape() + " and B " + b.shape());
  }
  const std::size_t n = a.rows();
  const double floor = tol.pivot * a.frobenius_norm();
  Matrix lu = a;
  Matrix x = b;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > best) {
        best = std::abs(lu(i, k));
        piv = i;
      }
    }
    if (!(best > floor) || best == 0.0) {
      throw Error(ErrorCode::SingularMatrix,
                  "pivot " + std::to_string(best) + " in column " + std::to_string(k));
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      for (std::size_t j = 0; j < x.cols(); ++j) std::swap(x(k, j), x(piv, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const cplx f = lu(i, k) / lu(k, k);
      if (f == cplx{}) continue;
      lu(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t jj = 0; jj < x.cols(); ++jj) {
    for (std::size_t ii = n; ii-- > 0;) {
      cplx s = x(ii, jj);
      for (std::size_t j = ii + 1; j < n; ++j) s -= lu(ii, j) * x(j, jj);
      x(ii, jj) = s / lu(ii, ii);
    }
  }
  return x;
}

inline Matrix inverse(const Matrix& a, const Tolerances& tol = kTolerances) {
  return solve_linear(a, Matrix::identity(a.rows()), tol);
}

namespace detail {

// Rotation [c s; -conj(s) c] mapping (a, b) to (r, 0).
struct Givens {
  double c = 1.0;
  cplx s{};
};

inline Givens make_givens(cplx a, cplx b) {
  if (b == cplx{}) return {1.0, cplx{}};
  if (a == cplx{}) return {0.0, std::conj(b) / std::abs(b)};
  const double aa = std::abs(a);
  const double norm = std::hypot(aa, std::abs(b));
  return {aa / norm, (a / aa) * std::conj(b) / norm};
}

// Householder reduction to upper Hessenberg form (similarity transform).
inline void to_hessenberg(Matrix& h) {
  const std::size_t n = h.rows();
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha_norm = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha_norm += std::norm(h(i, k));
    alpha_norm = std::sqrt(alpha_norm);
    if (alpha_norm == 0.0) continue;
    std::vector<cplx> v(n - k - 1);
    for (std::size_t i = k + 1; i < n; ++i) v[i - k - 1] = h(i, k);
    const cplx x0 = v[0];
    const cplx phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cplx{1.0, 0.0};
    v[0] += phase * alpha_norm;
    double vnorm2 = 0.0;
    for (const auto& vi : v) vnorm2 += std::norm(vi);
    if (vnorm2 == 0.0) continue;
    // H <- (I - 2 v v*/v*v) H (I - 2 v v*/v*v)
    for (std::size_t j = 0; j < n; ++j) {
      cplx dot{};
      for (std::size_t i = 0; i < v.size(); ++i) dot += std::conj(v[i]) * h(k + 1 + i, j);
      dot *= 2.0 / vnorm2;
      for (std::size_t i = 0; i < v.size(); ++i) h(k + 1 + i, j) -= v[i] * dot;
    }
    for (std::size_t i = 0; i < n; ++i) {
      cplx dot{};
      for (std::size_t j = 0; j < v.size(); ++j) dot += h(i, k + 1 + j) * v[j];
      dot *= 2.0 / vnorm2;
      for (std::size_t j = 0; j < v.size(); ++j) h(i, k + 1 + j) -= dot * std::conj(v[j]);
    }
    for (std::size_t i = k + 2; i < n; ++i) h(i, k) = cplx{};
  }
}

inline std::pair<cplx, cplx> eig2(cplx a, cplx b, cplx c, cplx d) {
  const cplx half_trace = 0.5 * (a + d);
  const cplx disc = std::sqrt(0.25 * (a - d) * (a - d) + b * c);
  return {half_trace + disc, half_trace - disc};
}

}  // namespace detail

/// Eigenvalues of a square matrix. n <= 2 uses closed forms; larger matrices
/// are reduced to Hessenberg form and deflated with Wilkinson-shifted complex
/// QR steps. Throws NoConvergence after
/// qr_iterations_per_eigenvalue * n steps.
inline std::vector<cplx> eigenvalues(const Matrix& a,
                                     const Tolerances& tol = kTolerances) {
  if (!a.is_square()) {
    throw Error(ErrorCode::DimensionMismatch, "eigenvalues of " + a.shape());
  }
  const std::size_t n = a.rows();
  if (n == 0) return {};
  if (n == 1) return {a(0, 0)};
  if (n == 2) {
    auto [l1, l2] = detail::eig2(a(0, 0), a(0, 1), a(1, 0), a(1, 1));
    return {l1, l2};
  }

  Matrix h = a;
  detail::to_hessenberg(h);
  std::vector<cplx> out;
  out.reserve(n);
  constexpr double eps = 2.220446049250313e-16;
  const int budget = tol.qr_iterations_per_eigenvalue * static_cast<int>(n);
  int total = 0;
  int since_deflation = 0;
  std::size_t hi = n - 1;
  while (true) {
    if (hi == 0) {
      out.push_back(h(0, 0));
      break;
    }
    // Find the start of the trailing unreduced block.
    std::size_t lo = hi;
    while (lo > 0) {
      const double scale = std::abs(h(lo, lo)) + std::abs(h(lo - 1, lo - 1));
      if (std::abs(h(lo, lo - 1)) <= eps * (scale > 0.0 ? scale : 1.0)) {
        h(lo, lo - 1) = cplx{};
        break;
      }
      --lo;
    }
    if (lo == hi) {
      out.push_back(h(hi, hi));
      --hi;
      since_deflation = 0;
      continue;
    }
    if (lo + 1 == hi) {
      auto [l1, l2] = detail::eig2(h(lo, lo), h(lo, hi), h(hi, lo), h(hi, hi));
      out.push_back(l1);
      out.push_back(l2);
      if (lo == 0) break;
      hi = lo - 1;
      since_deflation = 0;
      continue;
    }
    if (++total > budget) {
      throw Error(ErrorCode::NoConvergence,
                  "QR iteration exceeded " + std::to_string(budget) + " steps");
    }
    ++since_deflation;

    cplx mu;
    if (since_deflation % 11 == 0) {
      // Exceptional shift breaks rare cycles.
      mu = h(hi, hi) + std::abs(h(hi, hi - 1)) * cplx{0.75, 0.4};
    } else {
      auto [l1, l2] =
          detail::eig2(h(hi - 1, hi - 1), h(hi - 1, hi), h(hi, hi - 1), h(hi, hi));
      mu = std::abs(l1 - h(hi, hi)) < std::abs(l2 - h(hi, hi)) ? l1 : l2;
    }

    const std::size_t m = hi - lo + 1;
    std::vector<detail::Givens> rot(m - 1);
    for (std::size_t k = lo; k <= hi; ++k) h(k, k) -= mu;
    for (std::size_t k = lo; k < hi; ++k) {
      const auto g = detail::make_givens(h(k, k), h(k + 1, k));
      rot[k - lo] = g;
      for (std::size_t j = k; j <= hi; ++j) {
        const cplx x = h(k, j);
        const cplx y = h(k + 1, j);
        h(k, j) = g.c * x + g.s * y;
        h(k + 1, j) = -std::conj(g.s) * x + g.c * y;
      }
    }
    for (std::size_t k = lo; k < hi; ++k) {
      const auto& g = rot[k - lo];
      const std::size_t last = std::min(k + 2, hi);
      for (std::size_t i = lo; i <= last; ++i) {
        const cplx x = h(i, k);
        const cplx y = h(i, k + 1);
        h(i, k) = x * g.c + y * std::conj(g.s);
        h(i, k + 1) = -x * g.s + y * g.c;
      }
    }
    for (std::size_t k = lo; k <= hi; ++k) h(k, k) += mu;
  }
  return out;
}

inline double spectral_radius(const Matrix& a, const Tolerances& tol = kTolerances) {
  double r = 0.0;
  for (const auto& l : eigenvalues(a, tol)) r = std::max(r, std::abs(l));
  return r;
}

struct HermitianEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // unitary, columns are eigenvectors
};

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix. Each (p, q)
/// rotation first removes the phase of the off-diagonal entry, then applies
/// the real symmetric Jacobi rotation.
inline HermitianEigen hermitian_eigen(const Matrix& m,
                                      const Tolerances& tol = kTolerances) {
  if (!m.is_square()) {
    throw Error(ErrorCode::DimensionMismatch, "hermitian_eigen of " + m.shape());
  }
  const std::size_t n = m.rows();
  Matrix a = hermitian_part(m);
  Matrix v = Matrix::identity(n);
  const double scale = a.frobenius_norm();

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  int sweep = 0;
  while (off_norm() > 1e-15 * scale) {
    if (++sweep > tol.jacobi_sweeps) {
      throw Error(ErrorCode::NoConvergence, "Jacobi sweeps exhausted");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double r = std::abs(apq);
        if (r == 0.0) continue;
        const cplx phase = apq / r;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * r);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // G = diag(1, conj(phase)) * [c s; -s c]
        const cplx g00 = c;
        const cplx g01 = s;
        const cplx g10 = -s * std::conj(phase);
        const cplx g11 = c * std::conj(phase);
        for (std::size_t k = 0; k < n; ++k) {
          const cplx x = a(k, p);
          const cplx y = a(k, q);
          a(k, p) = x * g00 + y * g10;
          a(k, q) = x * g01 + y * g11;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const cplx x = a(p, k);
          const cplx y = a(q, k);
          a(p, k) = std::conj(g00) * x + std::conj(g10) * y;
          a(q, k) = std::conj(g01) * x + std::conj(g11) * y;
        }
        a(p, q) = cplx{};
        a(q, p) = cplx{};
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t k = 0; k < n; ++k) {
          const cplx x = v(k, p);
          const cplx y = v(k, q);
          v(k, p) = x * g00 + y * g10;
          v(k, q) = x * g01 + y * g11;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a(i, i).real() < a(j, j).real();
  });
  HermitianEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

inline double min_eigenvalue_hermitian(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  return hermitian_eigen(m).values.front();
}

/// Principal square root of a Hermitian positive-definite matrix.
inline Matrix sqrtm_hpd(const Matrix& p, const Tolerances& tol = kTolerances) {
  if (!is_hermitian(p, tol.hermitian)) {
    throw Error(ErrorCode::NotPositiveDefinite, "matrix is not Hermitian");
  }
  const auto eig = hermitian_eigen(p, tol);
  const double floor = tol.positive_definite * p.frobenius_norm();
  if (!eig.values.empty() && !(eig.values.front() > floor)) {
    throw Error(ErrorCode::NotPositiveDefinite,
                "minimum eigenvalue " + std::to_string(eig.values.front()));
  }
  std::vector<cplx> roots;
  roots.reserve(eig.values.size());
  for (double l : eig.values) roots.emplace_back(std::sqrt(l), 0.0);
  const Matrix s = eig.vectors * Matrix::diagonal(roots) * eig.vectors.adjoint();
  return hermitian_part(s);
}

/// Solves the Stein equation S = A* S A + Q by squaring:
/// S <- S + A_k* S A_k, A_k <- A_k^2, which sums the series
/// sum_k (A*)^k Q A^k in log2 of its length.
inline Matrix solve_dlyap(const Matrix& a, const Matrix& q,
                          const Tolerances& tol = kTolerances) {
  if (!a.is_square() || !q.is_square() || a.rows() != q.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "solve_dlyap with A " + a.shape() + " and Q " + q.shape());
  }
  const double r = spectral_radius(a, tol);
  if (r >= 1.0 - tol.stability_margin) {
    throw Error(ErrorCode::UnstableMatrix, "spectral radius " + std::to_string(r));
  }
  Matrix s = hermitian_part(q);
  Matrix ak = a;
  for (int it = 0; it < tol.dlyap_max_doublings; ++it) {
    const Matrix increment = ak.adjoint() * s * ak;
    s += increment;
    s = hermitian_part(s);
    const double inc = increment.frobenius_norm();
    if (inc <= tol.dlyap * (1.0 + s.frobenius_norm())) return s;
    ak = ak * ak;
    if (ak.frobenius_norm() == 0.0) return s;
  }
  throw Error(ErrorCode::NoConvergence, "Stein doubling did not settle");
}

}  // namespace hyperlq
