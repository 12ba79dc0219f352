#pragma once

// Discrete-time control and filter algebraic Riccati equations of the
// reduced quadruple, the optimal boundary gain and the certificates that
// make the optimal cost formula valid.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include "hyperlq/error.hpp"
#include "hyperlq/model.hpp"
#include "hyperlq/numerics.hpp"

namespace hyperlq {

struct RiccatiOptions {
  double tol = 1e-13;
  std::size_t max_iter = 200000;
  double divergence_bound = 1e12;
  /// Called with (k, Pi_k) for every iterate, Pi_0 = 0 included.
  std::function<void(std::size_t, const Matrix&)> on_iterate;
};

/// Solution of A*Pi A - Pi + C*C = V* P^{-1} V with
/// P = I + D*D + B*Pi B and V = D*C + B*Pi A.
struct RiccatiSolution {
  Matrix Pi;        // n x n; also the matrix of Z = Pi I_X
  Matrix P;         // p x p
  Matrix V;         // p x n
  Matrix F;         // p x n optimal gain, F = -P^{-1} V
  Matrix A_closed;  // A + B F
  Matrix Omega;     // P^{1/2}
  std::size_t iterations = 0;
  double residual = 0.0;  // Frobenius norm of the CARE defect
};

struct FilterSolution {
  Matrix PiTilde;  // n x n
  Matrix W;        // n x m, B D* + A PiTilde C*
  Matrix T;        // m x m, I + D D* + C PiTilde C*
  std::size_t iterations = 0;
  double residual = 0.0;
};

inline Matrix care_weight(const DiscreteQuadruple& q, const Matrix& pi) {
  return Matrix::identity(q.inputs()) + q.D.adjoint() * q.D + q.B.adjoint() * pi * q.B;
}

inline Matrix care_cross(const DiscreteQuadruple& q, const Matrix& pi) {
  return q.D.adjoint() * q.C + q.B.adjoint() * pi * q.A;
}

inline double care_residual(const DiscreteQuadruple& q, const Matrix& pi) {
  const Matrix p = care_weight(q, pi);
  const Matrix v = care_cross(q, pi);
  const Matrix defect =
      q.A.adjoint() * pi * q.A - pi + q.C.adjoint() * q.C - v.adjoint() * solve_linear(p, v);
  return defect.frobenius_norm();
}

inline double fare_residual(const DiscreteQuadruple& q, const Matrix& pt) {
  const Matrix w = q.B * q.D.adjoint() + q.A * pt * q.C.adjoint();
  const Matrix t = Matrix::identity(q.outputs()) + q.D * q.D.adjoint() + q.C * pt * q.C.adjoint();
  const Matrix defect =
      q.A * pt * q.A.adjoint() - pt + q.B * q.B.adjoint() - w * solve_linear(t, w.adjoint());
  return defect.frobenius_norm();
}

/// Fills every derived quantity from a given Pi. Used by solve_care and by
/// perturbation studies that need a solution object for a non-solution.
inline RiccatiSolution care_solution_from(const DiscreteQuadruple& q, const Matrix& pi,
                                          std::size_t iterations = 0) {
  RiccatiSolution s;
  s.Pi = hermitian_part(pi);
  s.P = hermitian_part(care_weight(q, s.Pi));
  s.V = care_cross(q, s.Pi);
  s.F = -solve_linear(s.P, s.V);
  s.A_closed = q.A + q.B * s.F;
  s.Omega = sqrtm_hpd(s.P);
  s.iterations = iterations;
  s.residual = care_residual(q, s.Pi);
  return s;
}

/// Value iteration from Pi_0 = 0. The iterates are the finite-horizon cost
/// matrices, so they increase monotonically to the smallest nonnegative
/// solution when one exists. Throws NoConvergence when the iterates blow
/// past divergence_bound or max_iter is reached.
inline RiccatiSolution solve_care(const DiscreteQuadruple& q, const RiccatiOptions& opt = {}) {
  q.check();
  const std::size_t n = q.states();
  Matrix pi(n, n);
  if (opt.on_iterate) opt.on_iterate(0, pi);
  const Matrix cc = q.C.adjoint() * q.C;
  for (std::size_t k = 1; k <= opt.max_iter; ++k) {
    const Matrix p = care_weight(q, pi);
    const Matrix v = care_cross(q, pi);
    Matrix next = q.A.adjoint() * pi * q.A + cc - v.adjoint() * solve_linear(p, v);
    next = hermitian_part(next);
    if (opt.on_iterate) opt.on_iterate(k, next);
    const double step = (next - pi).frobenius_norm();
    const double scale = 1.0 + pi.frobenius_norm();
    pi = std::move(next);
    if (!std::isfinite(step) || pi.frobenius_norm() > opt.divergence_bound) {
      throw Error(ErrorCode::NoConvergence,
                  "CARE iterates unbounded after " + std::to_string(k) + " steps");
    }
    if (step <= opt.tol * scale) return care_solution_from(q, pi, k);
  }
  throw Error(ErrorCode::NoConvergence,
              "CARE value iteration hit max_iter = " + std::to_string(opt.max_iter));
}

/// Dual value iteration for
/// A Pt A* - Pt + B B* = W T^{-1} W*, started from Pt = 0.
inline FilterSolution solve_fare(const DiscreteQuadruple& q, const RiccatiOptions& opt = {}) {
  q.check();
  const std::size_t n = q.states();
  Matrix pt(n, n);
  if (opt.on_iterate) opt.on_iterate(0, pt);
  const Matrix bb = q.B * q.B.adjoint();
  const Matrix id_m = Matrix::identity(q.outputs());
  for (std::size_t k = 1; k <= opt.max_iter; ++k) {
    const Matrix w = q.B * q.D.adjoint() + q.A * pt * q.C.adjoint();
    const Matrix t = id_m + q.D * q.D.adjoint() + q.C * pt * q.C.adjoint();
    Matrix next = q.A * pt * q.A.adjoint() + bb - w * solve_linear(t, w.adjoint());
    next = hermitian_part(next);
    if (opt.on_iterate) opt.on_iterate(k, next);
    const double step = (next - pt).frobenius_norm();
    const double scale = 1.0 + pt.frobenius_norm();
    pt = std::move(next);
    if (!std::isfinite(step) || pt.frobenius_norm() > opt.divergence_bound) {
      throw Error(ErrorCode::NoConvergence,
                  "FARE iterates unbounded after " + std::to_string(k) + " steps");
    }
    if (step <= opt.tol * scale) {
      FilterSolution s;
      s.W = q.B * q.D.adjoint() + q.A * pt * q.C.adjoint();
      s.T = hermitian_part(id_m + q.D * q.D.adjoint() + q.C * pt * q.C.adjoint());
      s.PiTilde = std::move(pt);
      s.iterations = k;
      s.residual = fare_residual(q, s.PiTilde);
      return s;
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "FARE value iteration hit max_iter = " + std::to_string(opt.max_iter));
}

/// The physical law is u(t) = F (lambda0 z)(1, t).
inline const Matrix& feedback_gain(const RiccatiSolution& sol) { return sol.F; }

struct StabilityCertificate {
  double r_closed = 0.0;
  double r_open = 0.0;
  bool stable = false;
};

inline StabilityCertificate stability_certificate(const DiscreteQuadruple& q,
                                                  const RiccatiSolution& sol) {
  StabilityCertificate c;
  c.r_closed = spectral_radius(q.A + q.B * sol.F);
  c.r_open = spectral_radius(q.A);
  c.stable = c.r_closed < 1.0 - kTolerances.stability_margin;
  return c;
}

struct UniquenessReport {
  bool fare_solvable = false;
  double r_closed = 0.0;
  bool unique = false;
  std::string reason;  // empty when unique
};

/// Pi is the unique optimal-cost matrix when the FARE has a nonnegative
/// solution and A + B F is stable. `fare` is the outcome of solve_fare,
/// nullopt when it failed.
inline UniquenessReport uniqueness_certificate(const DiscreteQuadruple& q,
                                               const RiccatiSolution& care,
                                               const std::optional<FilterSolution>& fare) {
  UniquenessReport r;
  r.fare_solvable = fare.has_value() && min_eigenvalue_hermitian(fare->PiTilde) >= -1e-10;
  r.r_closed = spectral_radius(q.A + q.B * care.F);
  const bool stable = r.r_closed < 1.0 - kTolerances.stability_margin;
  r.unique = r.fare_solvable && stable;
  if (!r.fare_solvable) r.reason = "filter Riccati equation has no nonnegative solution";
  if (!stable) {
    if (!r.reason.empty()) r.reason += "; ";
    r.reason += "closed loop spectral radius " + std::to_string(r.r_closed) + " >= 1";
  }
  return r;
}

/// Cost matrix of an arbitrary stabilizing gain F:
/// Sigma = (A+BF)* Sigma (A+BF) + F*F + (C+DF)*(C+DF).
inline Matrix closed_loop_lyapunov(const DiscreteQuadruple& q, const Matrix& f) {
  const Matrix a = q.A + q.B * f;
  const Matrix cf = q.C + q.D * f;
  return solve_dlyap(a, f.adjoint() * f + cf.adjoint() * cf);
}

}  // namespace hyperlq
