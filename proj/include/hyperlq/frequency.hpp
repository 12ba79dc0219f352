#pragma once

// Frequency-domain objects of the boundary system: the transfer function
// G(s) = C (e^{s p1} - A)^{-1} B + D, the Popov function
// Phi(iw) = I + G(iw)* G(iw), and the closed-form factor
// chi(s) = P^{1/2} [I - F (e^{s p1} - A)^{-1} B].

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "hyperlq/error.hpp"
#include "hyperlq/model.hpp"
#include "hyperlq/numerics.hpp"
#include "hyperlq/parallel.hpp"
#include "hyperlq/riccati.hpp"

namespace hyperlq {

/// (e^{s p1} I - A)^{-1} B; PoleHit when e^{s p1} is (numerically) an
/// eigenvalue of A.
inline Matrix delay_resolvent_input(const DiscreteQuadruple& q, double p1, cplx s) {
  const cplx z = std::exp(s * p1);
  Matrix shifted = -q.A;
  for (std::size_t i = 0; i < shifted.rows(); ++i) shifted(i, i) += z;
  // Pivots are judged against |e^{s p1}| and ||A||, not against the shifted
  // matrix itself, which is tiny right at a pole.
  const double scale =
      std::sqrt(static_cast<double>(q.states())) * std::abs(z) + q.A.frobenius_norm();
  const double own = shifted.frobenius_norm();
  Tolerances tol = kTolerances;
  if (own <= tol.pivot * scale) throw Error(ErrorCode::PoleHit, "e^{s p1} I - A vanishes");
  tol.pivot *= scale / own;
  try {
    return solve_linear(shifted, q.B, tol);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SingularMatrix) throw Error(ErrorCode::PoleHit, e.what());
    throw;
  }
}

inline Matrix transfer(const DiscreteQuadruple& q, double p1, cplx s) {
  return q.C * delay_resolvent_input(q, p1, s) + q.D;
}

inline Matrix popov(const DiscreteQuadruple& q, double p1, double omega) {
  const Matrix g = transfer(q, p1, cplx{0.0, omega});
  return hermitian_part(Matrix::identity(q.inputs()) + g.adjoint() * g);
}

inline Matrix spectral_factor(const DiscreteQuadruple& q, const RiccatiSolution& sol,
                              double p1, cplx s) {
  const Matrix r = delay_resolvent_input(q, p1, s);
  return sol.Omega * (Matrix::identity(q.inputs()) - sol.F * r);
}

struct FrequencySample {
  cplx s;
  Matrix G;
  Matrix Phi;
  Matrix Chi;
  double factorization_residual = 0.0;
};

/// All frequency objects at s = i omega. PoleHit propagates.
inline FrequencySample sample_frequency(const DiscreteQuadruple& q, const RiccatiSolution& sol,
                                        double p1, double omega) {
  FrequencySample f;
  f.s = cplx{0.0, omega};
  const Matrix r = delay_resolvent_input(q, p1, f.s);
  f.G = q.C * r + q.D;
  f.Phi = hermitian_part(Matrix::identity(q.inputs()) + f.G.adjoint() * f.G);
  f.Chi = sol.Omega * (Matrix::identity(q.inputs()) - sol.F * r);
  f.factorization_residual = (f.Phi - f.Chi.adjoint() * f.Chi).frobenius_norm();
  return f;
}

/// A single point sits at `lo`.
inline std::vector<double> uniform_omega_grid(double lo, double hi, std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k)
    g[k] = points == 1 ? lo
                       : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  return g;
}

/// 1001 uniform points on [-50/p1, 50/p1] by default.
inline std::vector<double> default_omega_grid(double p1, std::size_t points = 1001) {
  return uniform_omega_grid(-50.0 / p1, 50.0 / p1, points);
}

/// Worst value over a frequency grid. Grid points at poles are skipped and
/// listed in `skipped`.
struct GridCheck {
  double value = 0.0;
  double worst_omega = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> skipped;
};

inline GridCheck factorization_residual(const DiscreteQuadruple& q, const RiccatiSolution& sol,
                                        double p1, const std::vector<double>& omegas) {
  std::vector<std::optional<double>> res(omegas.size());
  parallel_for(omegas.size(), [&](std::size_t k) {
    try {
      res[k] = sample_frequency(q, sol, p1, omegas[k]).factorization_residual;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PoleHit) throw;
    }
  });
  GridCheck out;
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    if (!res[k]) {
      out.skipped.push_back(omegas[k]);
    } else if (std::isnan(out.worst_omega) || *res[k] > out.value) {
      out.value = *res[k];
      out.worst_omega = omegas[k];
    }
  }
  return out;
}

/// min over the grid of lambda_min(Phi(i omega)) - 1; nonnegative in exact
/// arithmetic since Phi = I + G*G.
inline GridCheck coercivity_margin(const DiscreteQuadruple& q, double p1,
                                   const std::vector<double>& omegas) {
  std::vector<std::optional<double>> res(omegas.size());
  parallel_for(omegas.size(), [&](std::size_t k) {
    try {
      res[k] = min_eigenvalue_hermitian(popov(q, p1, omegas[k])) - 1.0;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PoleHit) throw;
    }
  });
  GridCheck out;
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    if (!res[k]) {
      out.skipped.push_back(omegas[k]);
    } else if (std::isnan(out.worst_omega) || *res[k] < out.value) {
      out.value = *res[k];
      out.worst_omega = omegas[k];
    }
  }
  return out;
}

struct OmegaGap {
  Matrix omega;  // Omega* Omega
  Matrix naive;  // I + D*D
  double gap = 0.0;            // ||P - (I + D*D)||_F = ||B*Pi B||_F
  double factor_defect = 0.0;  // ||Omega*Omega - P||_F
};

/// The factor tends to Omega = P^{1/2} along the real axis, so the weight
/// in the Riccati equation is Omega*Omega = I + D*D + B*Pi B rather than the
/// feedthrough-only weight I + D*D. The gap is taken from P so that it is
/// exactly zero when B*Pi B is.
inline OmegaGap omega_limit_check(const DiscreteQuadruple& q, const RiccatiSolution& sol) {
  OmegaGap g;
  g.omega = hermitian_part(sol.Omega.adjoint() * sol.Omega);
  g.naive = Matrix::identity(q.inputs()) + q.D.adjoint() * q.D;
  g.gap = (sol.P - g.naive).frobenius_norm();
  g.factor_defect = (g.omega - sol.P).frobenius_norm();
  return g;
}

/// Spectral-radius proxy for H-infinity membership: chi has right
/// half-plane poles where |eig(A)| > 1, chi^{-1} where |eig(A + BF)| > 1.
/// The boundary case r = 1 is reported as unbounded.
struct HinfProxy {
  double r_open = 0.0;
  double r_closed = 0.0;
  bool chi_bounded = false;
  bool chi_inv_bounded = false;
};

inline HinfProxy hinf_proxy(const DiscreteQuadruple& q, const RiccatiSolution& sol) {
  HinfProxy h;
  h.r_open = spectral_radius(q.A);
  h.r_closed = spectral_radius(q.A + q.B * sol.F);
  h.chi_bounded = h.r_open < 1.0 - kTolerances.stability_margin;
  h.chi_inv_bounded = h.r_closed < 1.0 - kTolerances.stability_margin;
  return h;
}

}  // namespace hyperlq
