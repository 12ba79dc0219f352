#pragma once

// System description for transport PDEs with boundary control,
//
//   dz/dt = -d/dzeta (lambda0 z) + M z,
//   [0; I] u = -K (lambda0 z)(0) - L (lambda0 z)(1),
//   y        = -K_y (lambda0 z)(0) - L_y (lambda0 z)(1),
//
// and its reduction to the discrete quadruple (A_d, B_d, C_d, D_d) that
// relates the boundary fluxes w = lambda0 z at both ends:
//
//   B_d u = w(0) - A_d w(1),   y = C_d w(1) + D_d u.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperlq/error.hpp"
#include "hyperlq/numerics.hpp"

namespace hyperlq {

/// Scalar transport speed lambda0 sampled on 0 = zeta_0 < ... < zeta_N = 1,
/// piecewise linear between samples, together with the cumulative travel
/// time p(zeta) = int_0^zeta 1/lambda0 (composite trapezoid on 1/lambda0).
class SpatialProfile {
 public:
  SpatialProfile(std::vector<double> grid, std::vector<double> speed)
      : grid_(std::move(grid)), speed_(std::move(speed)) {
    if (grid_.size() < 2 || grid_.size() != speed_.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "profile needs matching grid/speed arrays with at least 2 points");
    }
    if (std::abs(grid_.front()) > 1e-12 || std::abs(grid_.back() - 1.0) > 1e-12) {
      throw Error(ErrorCode::OutOfDomain, "profile grid must span [0, 1]");
    }
    grid_.front() = 0.0;
    grid_.back() = 1.0;
    for (std::size_t k = 1; k < grid_.size(); ++k) {
      if (!(grid_[k] > grid_[k - 1])) {
        throw Error(ErrorCode::OutOfDomain, "profile grid must be strictly increasing");
      }
    }
    epsilon_ = *std::min_element(speed_.begin(), speed_.end());
    for (double v : speed_) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::NonPositiveSpeed,
                    "lambda0 sample " + std::to_string(v) + " is not positive");
      }
    }
    cumulative_.assign(grid_.size(), 0.0);
    for (std::size_t k = 1; k < grid_.size(); ++k) {
      const double h = grid_[k] - grid_[k - 1];
      cumulative_[k] = cumulative_[k - 1] + 0.5 * h * (1.0 / speed_[k - 1] + 1.0 / speed_[k]);
    }
  }

  static std::vector<double> uniform_grid(std::size_t points) {
    if (points < 2) {
      throw Error(ErrorCode::DimensionMismatch, "grid needs at least 2 points");
    }
    std::vector<double> g(points);
    for (std::size_t k = 0; k < points; ++k)
      g[k] = static_cast<double>(k) / static_cast<double>(points - 1);
    return g;
  }

  static SpatialProfile constant(double value, std::size_t points = 2001) {
    auto g = uniform_grid(points);
    std::vector<double> v(points, value);
    return SpatialProfile(std::move(g), std::move(v));
  }

  /// lambda0(zeta) = a + b zeta.
  static SpatialProfile affine(double a, double b, std::size_t points = 2001) {
    auto g = uniform_grid(points);
    std::vector<double> v(points);
    for (std::size_t k = 0; k < points; ++k) v[k] = a + b * g[k];
    return SpatialProfile(std::move(g), std::move(v));
  }

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& speed() const noexcept { return speed_; }
  const std::vector<double>& cumulative() const noexcept { return cumulative_; }
  std::size_t points() const noexcept { return grid_.size(); }
  double epsilon() const noexcept { return epsilon_; }
  double total_travel_time() const noexcept { return cumulative_.back(); }

  /// Index k of the cell [zeta_k, zeta_{k+1}] containing zeta.
  std::size_t cell(double zeta) const {
    auto it = std::upper_bound(grid_.begin(), grid_.end(), zeta);
    std::size_t k = static_cast<std::size_t>(it - grid_.begin());
    k = k == 0 ? 0 : k - 1;
    return std::min(k, grid_.size() - 2);
  }

  double speed_at(double zeta) const {
    const std::size_t k = cell(zeta);
    const double t = (zeta - grid_[k]) / (grid_[k + 1] - grid_[k]);
    return speed_[k] + t * (speed_[k + 1] - speed_[k]);
  }

 private:
  std::vector<double> grid_;
  std::vector<double> speed_;
  std::vector<double> cumulative_;
  double epsilon_ = 0.0;
};

/// p(zeta), linear between grid values of the cumulative travel time.
inline double travel_time(const SpatialProfile& profile, double zeta) {
  if (!(zeta >= 0.0 && zeta <= 1.0)) {
    throw Error(ErrorCode::OutOfDomain, "zeta " + std::to_string(zeta) + " outside [0,1]");
  }
  const auto& g = profile.grid();
  const auto& p = profile.cumulative();
  const std::size_t k = profile.cell(zeta);
  const double t = (zeta - g[k]) / (g[k + 1] - g[k]);
  return p[k] + t * (p[k + 1] - p[k]);
}

/// p^{-1}(tau): locates the cell by bisection on the monotone cumulative
/// array, then inverts the linear piece.
inline double travel_time_inverse(const SpatialProfile& profile, double tau) {
  const auto& g = profile.grid();
  const auto& p = profile.cumulative();
  const double total = p.back();
  constexpr double slack = 1e-12;
  if (!(tau >= -slack && tau <= total + slack)) {
    throw Error(ErrorCode::OutOfDomain,
                "tau " + std::to_string(tau) + " outside [0, p(1)]");
  }
  tau = std::clamp(tau, 0.0, total);
  std::size_t lo = 0;
  std::size_t hi = p.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (p[mid] <= tau) lo = mid; else hi = mid;
  }
  const double t = (tau - p[lo]) / (p[hi] - p[lo]);
  return g[lo] + t * (g[hi] - g[lo]);
}

/// Composite Simpson rule on a (possibly non-uniform) grid; an odd point
/// count is required for Simpson, otherwise the trapezoid rule is used.
template <typename T>
T integrate_samples(const std::vector<double>& grid, const std::vector<T>& f) {
  if (grid.size() != f.size()) {
    throw Error(ErrorCode::DimensionMismatch, "quadrature grid/value sizes differ");
  }
  T sum{};
  const std::size_t n = grid.size();
  if (n < 2) return sum;
  if (n % 2 == 0) {
    for (std::size_t k = 1; k < n; ++k)
      sum += 0.5 * (grid[k] - grid[k - 1]) * (f[k - 1] + f[k]);
    return sum;
  }
  for (std::size_t k = 0; k + 2 < n; k += 2) {
    const double h0 = grid[k + 1] - grid[k];
    const double h1 = grid[k + 2] - grid[k + 1];
    const double w = (h0 + h1) / 6.0;
    sum += w * ((2.0 - h1 / h0) * f[k] + ((h0 + h1) * (h0 + h1) / (h0 * h1)) * f[k + 1] +
                (2.0 - h0 / h1) * f[k + 2]);
  }
  return sum;
}

/// A C^n-valued function sampled on a grid (z, z0, g, ...). Values are n x 1.
struct StateFunction {
  std::vector<double> grid;
  std::vector<Matrix> values;

  std::size_t dimension() const { return values.empty() ? 0 : values.front().rows(); }

  static StateFunction constant(const std::vector<double>& grid, const Matrix& value) {
    return StateFunction{grid, std::vector<Matrix>(grid.size(), value)};
  }

  static StateFunction sample(const std::vector<double>& grid,
                              const std::function<Matrix(double)>& f) {
    StateFunction out{grid, {}};
    out.values.reserve(grid.size());
    for (double z : grid) out.values.push_back(f(z));
    return out;
  }

  /// Linear interpolation between samples.
  Matrix at(double zeta) const {
    auto it = std::upper_bound(grid.begin(), grid.end(), zeta);
    std::size_t k = static_cast<std::size_t>(it - grid.begin());
    k = k == 0 ? 0 : k - 1;
    k = std::min(k, grid.size() - 2);
    const double t = (zeta - grid[k]) / (grid[k + 1] - grid[k]);
    return values[k] * (1.0 - t) + values[k + 1] * t;
  }
};

struct BoundarySystem {
  std::size_t n = 0;
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  Matrix K;
  Matrix L;
  Matrix K_y;
  Matrix L_y;
  SpatialProfile lambda0 = SpatialProfile::constant(1.0, 2);
  /// Zero-order term, one n x n matrix per lambda0 grid point.
  std::optional<std::vector<Matrix>> M;
};

/// The quadruple driving all synthesis: A (n x n), B (n x p), C (m x n),
/// D (m x p).
struct DiscreteQuadruple {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;

  std::size_t states() const { return A.rows(); }
  std::size_t inputs() const { return B.cols(); }
  std::size_t outputs() const { return C.rows(); }

  void check() const {
    const std::size_t n = A.rows();
    if (!A.is_square() || B.rows() != n || C.cols() != n || D.rows() != C.rows() ||
        D.cols() != B.cols()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "inconsistent quadruple A " + A.shape() + ", B " + B.shape() +
                      ", C " + C.shape() + ", D " + D.shape());
    }
  }

  /// (A*, C*, B*, D*), whose control Riccati equation is the filter equation
  /// of the original quadruple.
  DiscreteQuadruple dual() const { return {A.adjoint(), C.adjoint(), B.adjoint(), D.adjoint()}; }
};

struct ValidationReport {
  bool ok = false;
  double condition_K = 0.0;  // ||K||_F ||K^{-1}||_F
  double epsilon = 0.0;      // min lambda0
};

inline ValidationReport validate(const BoundarySystem& sys) {
  const std::size_t n = sys.n;
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw Error(ErrorCode::DimensionMismatch,
                  std::string(name) + " is " + m.shape() + ", expected " +
                      std::to_string(r) + "x" + std::to_string(c));
    }
  };
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "n must be positive");
  if (sys.inputs > n) {
    throw Error(ErrorCode::DimensionMismatch, "more inputs than state components");
  }
  expect(sys.K, n, n, "K");
  expect(sys.L, n, n, "L");
  expect(sys.K_y, sys.outputs, n, "K_y");
  expect(sys.L_y, sys.outputs, n, "L_y");
  if (sys.M) {
    if (sys.M->size() != sys.lambda0.points()) {
      throw Error(ErrorCode::DimensionMismatch, "M must be sampled on the lambda0 grid");
    }
    for (const auto& m : *sys.M) expect(m, n, n, "M sample");
  }
  for (double v : sys.lambda0.speed()) {
    if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveSpeed, "lambda0 must be positive");
  }
  Matrix k_inv;
  try {
    k_inv = inverse(sys.K);
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularK, e.what());
  }
  return {true, sys.K.frobenius_norm() * k_inv.frobenius_norm(), sys.lambda0.epsilon()};
}

struct QTransformResult {
  BoundarySystem system;    // equivalent system with M removed
  Matrix Q1;                // Q(1)
  std::vector<Matrix> Q;    // Q on the lambda0 grid
};

/// Removes the zero-order term through z~ = Q z with
/// Q' = -lambda0^{-1} Q M, Q(0) = I (classical RK4 on the profile grid,
/// midpoint data linearly interpolated). Since w~(0) = w(0) and
/// w~(1) = Q(1) w(1), the boundary matrices become K, L Q(1)^{-1},
/// K_y, L_y Q(1)^{-1}.
inline QTransformResult q_transform(const BoundarySystem& sys) {
  const std::size_t n = sys.n;
  const auto& grid = sys.lambda0.grid();
  const auto& speed = sys.lambda0.speed();
  std::vector<Matrix> q(grid.size());
  q[0] = Matrix::identity(n);
  if (!sys.M) {
    for (auto& qk : q) qk = Matrix::identity(n);
    return {sys, Matrix::identity(n), std::move(q)};
  }
  const auto& m = *sys.M;
  if (m.size() != grid.size()) {
    throw Error(ErrorCode::DimensionMismatch, "M must be sampled on the lambda0 grid");
  }
  auto rhs = [](const Matrix& qv, const Matrix& mv, double lam) { return qv * mv * (-1.0 / lam); };
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double h = grid[k + 1] - grid[k];
    const Matrix m_mid = (m[k] + m[k + 1]) * 0.5;
    const double l_mid = 0.5 * (speed[k] + speed[k + 1]);
    const Matrix k1 = rhs(q[k], m[k], speed[k]);
    const Matrix k2 = rhs(q[k] + k1 * (0.5 * h), m_mid, l_mid);
    const Matrix k3 = rhs(q[k] + k2 * (0.5 * h), m_mid, l_mid);
    const Matrix k4 = rhs(q[k] + k3 * h, m[k + 1], speed[k + 1]);
    q[k + 1] = q[k] + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
  }
  Matrix q1 = q.back();
  Matrix q1_inv;
  try {
    q1_inv = inverse(q1);
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularQ, e.what());
  }
  BoundarySystem out = sys;
  out.L = sys.L * q1_inv;
  out.L_y = sys.L_y * q1_inv;
  out.M.reset();
  return {std::move(out), std::move(q1), std::move(q)};
}

/// A_d = -K^{-1} L, B_d = -K^{-1}[0; I], C_d = K_y K^{-1} L - L_y,
/// D_d = K_y K^{-1} [0; I].
inline DiscreteQuadruple reduce(const BoundarySystem& sys) {
  validate(sys);
  if (sys.M) {
    for (const auto& m : *sys.M) {
      if (m.frobenius_norm() != 0.0) {
        throw Error(ErrorCode::InvalidConfig,
                    "zero-order term present; apply q_transform before reduce");
      }
    }
  }
  const std::size_t n = sys.n;
  const std::size_t p = sys.inputs;
  Matrix k_inv;
  try {
    k_inv = inverse(sys.K);
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularK, e.what());
  }
  const Matrix k_inv_l = k_inv * sys.L;
  const Matrix k_inv_in = k_inv.columns(n - p, p);
  DiscreteQuadruple q{-k_inv_l, -k_inv_in, sys.K_y * k_inv_l - sys.L_y, sys.K_y * k_inv_in};
  q.check();
  return q;
}

/// <f, g>_X = int_0^1 g* lambda0 f dzeta by composite Simpson.
inline cplx weighted_inner_product(const StateFunction& f, const StateFunction& g,
                                   const SpatialProfile& profile) {
  const auto& grid = profile.grid();
  if (f.grid.size() != grid.size() || g.grid.size() != grid.size() ||
      f.values.size() != grid.size() || g.values.size() != grid.size() ||
      f.dimension() != g.dimension()) {
    throw Error(ErrorCode::DimensionMismatch,
                "inner product operands must share the profile grid and dimension");
  }
  std::vector<cplx> integrand(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    cplx dot{};
    for (std::size_t i = 0; i < f.dimension(); ++i)
      dot += std::conj(g.values[k](i, 0)) * f.values[k](i, 0);
    integrand[k] = profile.speed()[k] * dot;
  }
  return integrate_samples(grid, integrand);
}

}  // namespace hyperlq
