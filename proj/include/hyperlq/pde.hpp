#pragma once

// Closed-loop simulation of the transport PDE along characteristics.
//
// The flux w = lambda0 z is constant along characteristics, so w(1, t) over
// each period [k p1, (k+1) p1) is a pure delay of w(0, .) one period
// earlier. With u = F w(1, t) the boundary relation w(0) = A w(1) + B u
// turns this into the segment recursion
//
//   w(1, k p1 + tau) = (A + B F)^k h(tau),  tau in [0, p1),
//
// where h is the initial trace obtained from z0. No spatial mesh is
// involved: the only discretization is the sampling of tau.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "hyperlq/error.hpp"
#include "hyperlq/model.hpp"
#include "hyperlq/numerics.hpp"
#include "hyperlq/riccati.hpp"

namespace hyperlq {

/// Samples of w(1, t) at t = k dt.
struct TravelTimeTrace {
  double dt = 0.0;
  std::size_t points_per_period = 0;
  std::vector<Matrix> samples;
};

struct SimulationResult {
  TravelTimeTrace trace;
  std::vector<Matrix> inputs;   // u(t_k)
  std::vector<Matrix> outputs;  // y(t_k)
  std::vector<double> period_costs;
  double measured_cost = 0.0;   // integral of |u|^2 + |y|^2 over the horizon
  double tail_cost = 0.0;       // exact remainder beyond the horizon
  double predicted_cost = std::numeric_limits<double>::quiet_NaN();
  bool tail_available = false;
  Matrix gain;
};

namespace detail {

inline StateFunction flux(const SpatialProfile& profile, const StateFunction& z0) {
  if (z0.values.size() != profile.points()) {
    throw Error(ErrorCode::DimensionMismatch, "z0 must be sampled on the lambda0 grid");
  }
  StateFunction w = z0;
  w.grid = profile.grid();
  for (std::size_t k = 0; k < w.values.size(); ++k) w.values[k] *= profile.speed()[k];
  return w;
}

// h(j dt) for j = 0..ppp; the last entry is the left limit at tau = p1.
inline std::vector<Matrix> period_samples(const SpatialProfile& profile, const StateFunction& z0,
                                          std::size_t ppp) {
  if (ppp == 0) throw Error(ErrorCode::OutOfDomain, "points_per_period must be positive");
  const StateFunction w = flux(profile, z0);
  const double p1 = profile.total_travel_time();
  const double dt = p1 / static_cast<double>(ppp);
  std::vector<Matrix> h(ppp + 1);
  for (std::size_t j = 0; j <= ppp; ++j) {
    const double tau = j == ppp ? 0.0 : p1 - static_cast<double>(j) * dt;
    h[j] = w.at(travel_time_inverse(profile, tau));
  }
  return h;
}

inline double period_integral(const std::vector<Matrix>& seg, const Matrix& weight, double dt) {
  std::vector<double> grid(seg.size());
  std::vector<double> f(seg.size());
  for (std::size_t j = 0; j < seg.size(); ++j) {
    grid[j] = static_cast<double>(j) * dt;
    f[j] = quadratic_form(weight, seg[j]);
  }
  return integrate_samples(grid, f);
}

}  // namespace detail

/// One period of the boundary trace, h(t_k) = (lambda0 z0)(p^{-1}(p1 - t_k))
/// for t_k = k p1/ppp, k < ppp.
inline TravelTimeTrace initial_trace(const SpatialProfile& profile, const StateFunction& z0,
                                     std::size_t points_per_period) {
  auto h = detail::period_samples(profile, z0, points_per_period);
  h.pop_back();
  return {profile.total_travel_time() / static_cast<double>(points_per_period),
          points_per_period, std::move(h)};
}

/// Cost of the feedback u = F w(1, .): <z0, Sigma_F z0>_X with Sigma_F from
/// closed_loop_lyapunov. Throws UnstableMatrix if A + B F is not stable.
inline double cost_exact(const SpatialProfile& profile, const DiscreteQuadruple& q,
                         const Matrix& f, const StateFunction& z0) {
  const Matrix sigma = closed_loop_lyapunov(q, f);
  StateFunction sz = z0;
  for (auto& v : sz.values) v = sigma * v;
  return weighted_inner_product(sz, z0, profile).real();
}

struct OptimalCost {
  double value = 0.0;
  bool certified = false;  // false: the formula is only a candidate value
};

/// J_opt = <z0, Pi z0>_X, certified when the uniqueness report holds.
inline OptimalCost optimal_cost(const SpatialProfile& profile, const RiccatiSolution& care,
                                const StateFunction& z0, const UniquenessReport& uniqueness) {
  StateFunction pz = z0;
  for (auto& v : pz.values) v = care.Pi * v;
  return {weighted_inner_product(pz, z0, profile).real(), uniqueness.unique};
}

/// Trace length is periods * ppp + 1; the final sample opens the first
/// period beyond the horizon. Costs are integrated per period (Simpson in
/// tau, left limit at the period end) because w(1, .) jumps at multiples of
/// p1. With want_tail, the remainder is added in closed form and an
/// unstable loop throws UnstableMatrix; without it the tail is skipped.
inline SimulationResult simulate_closed_loop(const SpatialProfile& profile,
                                             const DiscreteQuadruple& q, const Matrix& f,
                                             const StateFunction& z0, std::size_t periods,
                                             std::size_t points_per_period,
                                             bool want_tail = true) {
  q.check();
  if (f.rows() != q.inputs() || f.cols() != q.states()) {
    throw Error(ErrorCode::DimensionMismatch, "gain must be " + std::to_string(q.inputs()) +
                                                  "x" + std::to_string(q.states()));
  }
  const Matrix closed = q.A + q.B * f;
  const Matrix out_map = q.C + q.D * f;
  const Matrix weight = f.adjoint() * f + out_map.adjoint() * out_map;
  const bool stable = spectral_radius(closed) < 1.0 - kTolerances.stability_margin;
  if (want_tail && !stable) {
    throw Error(ErrorCode::UnstableMatrix, "tail cost requested for an unstable loop");
  }

  const std::size_t ppp = points_per_period;
  std::vector<Matrix> seg = detail::period_samples(profile, z0, ppp);
  const double dt = profile.total_travel_time() / static_cast<double>(ppp);

  SimulationResult r;
  r.gain = f;
  r.trace.dt = dt;
  r.trace.points_per_period = ppp;
  r.trace.samples.reserve(periods * ppp + 1);
  auto record = [&](const Matrix& w) {
    r.trace.samples.push_back(w);
    r.inputs.push_back(f * w);
    r.outputs.push_back(out_map * w);
  };
  for (std::size_t k = 0; k < periods; ++k) {
    for (std::size_t j = 0; j < ppp; ++j) record(seg[j]);
    const double c = detail::period_integral(seg, weight, dt);
    r.period_costs.push_back(c);
    r.measured_cost += c;
    for (auto& w : seg) w = closed * w;
  }
  record(seg[0]);

  if (stable) {
    const Matrix sigma = closed_loop_lyapunov(q, f);
    r.tail_cost = detail::period_integral(seg, sigma, dt);
    r.tail_available = true;
    r.predicted_cost = cost_exact(profile, q, f, z0);
  }
  return r;
}

namespace detail {

// (1 - e^{-x}) / x
inline double phi1(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
  return -std::expm1(-x) / x;
}

// (1 - e^{-x}(1 + x)) / x^2 = sum_{m>=2} (-1)^m (m-1)/m! x^{m-2}
inline double phi2(double x) {
  if (std::abs(x) < 0.5) {
    double sum = 0.0;
    double scaled_power = 0.5;  // (-x)^{m-2} / m!
    for (int m = 2; m < 20; ++m) {
      sum += static_cast<double>(m - 1) * scaled_power;
      scaled_power *= -x / static_cast<double>(m + 1);
    }
    return sum;
  }
  return (1.0 - std::exp(-x) * (1.0 + x)) / (x * x);
}

}  // namespace detail

/// ((sI - A*)^{-1} g)(zeta) for real s > 0, from the closed form
///
///   lambda0(zeta) psi(zeta) = e^{-s (p1 - p(zeta))} A*(I - e^{-s p1} A*)^{-1} I(0) + I(zeta),
///   I(zeta) = int_zeta^1 e^{-s (p(eta) - p(zeta))} g(eta) d eta.
///
/// g and p are piecewise linear on the grid, so each cell integral of the
/// exponential kernel is evaluated exactly; this stays accurate when s is
/// large compared with the grid resolution. Only decaying exponentials are
/// formed.
inline StateFunction apply_resolvent_adjoint(const SpatialProfile& profile,
                                             const DiscreteQuadruple& q, double s,
                                             const StateFunction& g) {
  const auto& grid = profile.grid();
  const auto& p = profile.cumulative();
  const std::size_t pts = grid.size();
  if (g.values.size() != pts || g.dimension() != q.states()) {
    throw Error(ErrorCode::DimensionMismatch, "g must be sampled on the lambda0 grid");
  }
  if (!(s > 0.0)) throw Error(ErrorCode::OutOfDomain, "resolvent needs real s > 0");
  const double p1 = profile.total_travel_time();
  if (!std::isfinite(s * p1)) throw Error(ErrorCode::OverflowGuard, "s * p(1) is not finite");

  const std::size_t n = q.states();
  std::vector<Matrix> tail(pts, Matrix(n, 1));
  for (std::size_t k = pts - 1; k-- > 0;) {
    const double h = grid[k + 1] - grid[k];
    const double x = s * (p[k + 1] - p[k]);
    const double a = detail::phi1(x) - detail::phi2(x);
    const double b = detail::phi2(x);
    tail[k] = tail[k + 1] * std::exp(-x) + (g.values[k] * a + g.values[k + 1] * b) * h;
  }

  const Matrix a_adj = q.A.adjoint();
  Matrix denom = Matrix::identity(n) - a_adj * std::exp(-s * p1);
  Matrix boundary;
  try {
    boundary = a_adj * solve_linear(denom, tail[0]);
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularMatrix, std::string("I - e^{-s p1} A* singular: ") + e.what());
  }

  StateFunction psi{grid, std::vector<Matrix>(pts)};
  for (std::size_t k = 0; k < pts; ++k) {
    const Matrix flux = boundary * std::exp(-s * (p1 - p[k])) + tail[k];
    psi.values[k] = flux * (1.0 / profile.speed()[k]);
  }
  return psi;
}

struct YosidaProbe {
  std::vector<double> s;
  std::vector<Matrix> values;   // B* (lambda0 s (sI - A*)^{-1} g)(0)
  std::vector<double> errors;   // |value - target|
  Matrix target;                // B* (lambda0 g)(0+)
};

inline YosidaProbe yosida_probe(const SpatialProfile& profile, const DiscreteQuadruple& q,
                                const StateFunction& g, const std::vector<double>& s_list) {
  YosidaProbe y;
  y.s = s_list;
  y.target = q.B.adjoint() * (g.values.front() * profile.speed().front());
  for (double s : s_list) {
    const StateFunction psi = apply_resolvent_adjoint(profile, q, s, g);
    Matrix v = q.B.adjoint() * (psi.values.front() * (profile.speed().front() * s));
    y.errors.push_back((v - y.target).frobenius_norm());
    y.values.push_back(std::move(v));
  }
  return y;
}

}  // namespace hyperlq
