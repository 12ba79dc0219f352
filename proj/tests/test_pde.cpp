#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "support.hpp"

using namespace hyperlq;
using namespace hyperlq::testing;

namespace {

StateFunction ones(const SpatialProfile& p, std::size_t n = 1) {
  Matrix v(n, 1);
  for (auto& e : v.entries()) e = 1.0;
  return StateFunction::constant(p.grid(), v);
}

// (sI - A)^{-1} f for A z = -(lambda0 z)' on {w(0) = A_d w(1)}, by RK4 on
// w' = f - s w / lambda0 with four substeps per grid cell. The initial value
// is fixed by superposing the homogeneous and particular solutions.
StateFunction forward_resolvent(const SpatialProfile& profile, const Matrix& a_d, double s,
                                const std::function<Matrix(double)>& f) {
  const std::size_t n = a_d.rows();
  const auto& grid = profile.grid();
  auto rhs = [&](double z, const Matrix& w, bool forced) {
    Matrix d = w * (-s / profile.speed_at(z));
    if (forced) d += f(z);
    return d;
  };
  auto integrate = [&](Matrix w, bool forced) {
    std::vector<Matrix> out{w};
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      const double h = (grid[k + 1] - grid[k]) / 4.0;
      double z = grid[k];
      for (int sub = 0; sub < 4; ++sub, z += h) {
        const Matrix k1 = rhs(z, w, forced);
        const Matrix k2 = rhs(z + h / 2, w + k1 * (h / 2), forced);
        const Matrix k3 = rhs(z + h / 2, w + k2 * (h / 2), forced);
        const Matrix k4 = rhs(z + h, w + k3 * h, forced);
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
      }
      out.push_back(w);
    }
    return out;
  };
  const auto particular = integrate(Matrix(n, 1), true);
  const double decay = std::exp(-s * profile.total_travel_time());
  const Matrix w0 =
      solve_linear(Matrix::identity(n) - a_d * decay, a_d * particular.back());
  const auto homogeneous = integrate(w0, false);
  StateFunction z{grid, {}};
  for (std::size_t k = 0; k < grid.size(); ++k)
    z.values.push_back((homogeneous[k] + particular[k]) * (1.0 / profile.speed()[k]));
  return z;
}

}  // namespace

TEST(InitialTrace, ConstantStateGivesFlatTrace) {
  const auto p = SpatialProfile::constant(2.0, 201);
  const auto tr = initial_trace(p, ones(p), 8);
  ASSERT_EQ(tr.samples.size(), 8u);
  EXPECT_DOUBLE_EQ(tr.dt, 0.5 / 8);
  for (const auto& w : tr.samples) EXPECT_DOUBLE_EQ(w(0, 0).real(), 2.0);
}

TEST(InitialTrace, ReadsStateBackwards) {
  // w(1, t) = w0(1 - t) for unit speed.
  const auto p = SpatialProfile::constant(1.0, 101);
  const auto z0 = StateFunction::sample(p.grid(), [](double z) { return Matrix::scalar(z); });
  const auto tr = initial_trace(p, z0, 4);
  EXPECT_NEAR(tr.samples[0](0, 0).real(), 1.0, 1e-14);
  EXPECT_NEAR(tr.samples[1](0, 0).real(), 0.75, 1e-14);
  EXPECT_NEAR(tr.samples[3](0, 0).real(), 0.25, 1e-14);
}

TEST(CostExact, WorkedExample) {
  const auto p = SpatialProfile::constant(1.0);
  const auto q = worked_quadruple();
  EXPECT_NEAR(cost_exact(p, q, Matrix::scalar(0.0), ones(p)), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(cost_exact(p, q, Matrix::scalar(kGain), ones(p)), kPi, 1e-14);
  EXPECT_THROW(cost_exact(p, q, Matrix::scalar(3.0), ones(p)), Error);
}

TEST(CostExact, OptimalGainIsAStrictMinimum) {
  const auto p = SpatialProfile::constant(1.0);
  const auto q = worked_quadruple();
  const double best = cost_exact(p, q, Matrix::scalar(kGain), ones(p));
  for (double d : {-0.5, -0.1, -1e-2, -1e-3, 1e-3, 1e-2, 0.1, 0.5}) {
    EXPECT_GT(cost_exact(p, q, Matrix::scalar(kGain + d), ones(p)), best) << d;
  }
}

TEST(OptimalCost, LinearInitialState) {
  const auto p = SpatialProfile::constant(1.0);
  const auto q = worked_quadruple();
  const auto sol = solve_care(q);
  const auto z0 = StateFunction::sample(p.grid(), [](double z) { return Matrix::scalar(z); });
  const auto oc = optimal_cost(p, sol, z0, uniqueness_certificate(q, sol, solve_fare(q)));
  EXPECT_NEAR(oc.value, kPi / 3.0, 1e-12);
  EXPECT_TRUE(oc.certified);
}

TEST(Simulate, WorkedExampleRecoversOptimalCost) {
  const auto p = SpatialProfile::constant(1.0);
  const auto q = worked_quadruple();
  const auto r = simulate_closed_loop(p, q, Matrix::scalar(kGain), ones(p), 40, 512);
  EXPECT_EQ(r.trace.samples.size(), 40u * 512u + 1u);
  EXPECT_EQ(r.period_costs.size(), 40u);
  EXPECT_TRUE(r.tail_available);
  EXPECT_NEAR(r.measured_cost + r.tail_cost, kPi, 1e-5);
  EXPECT_NEAR(r.predicted_cost, kPi, 1e-12);
  // Period k costs Pi (1 - A^2) A^{2k} with A the closed loop.
  const double a2 = kClosedLoop * kClosedLoop;
  EXPECT_NEAR(r.period_costs[0], kPi * (1 - a2), 1e-12);
  EXPECT_NEAR(r.period_costs[1] / r.period_costs[0], a2, 1e-12);
}

TEST(Simulate, OpenLoopGramian) {
  const auto p = SpatialProfile::constant(1.0);
  const auto r = simulate_closed_loop(p, worked_quadruple(), Matrix::scalar(0.0), ones(p), 5, 64);
  EXPECT_NEAR(r.measured_cost + r.tail_cost, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.predicted_cost, 1.0 / 3.0, 1e-14);
}

TEST(Simulate, VariableSpeedMatchesPrediction) {
  const auto p = SpatialProfile::affine(1.0, 1.0, 2001);
  const auto q = random_quadruple(42, 3);
  const auto sol = solve_care(q);
  ASSERT_TRUE(stability_certificate(q, sol).stable);
  Matrix c(q.states(), 1);
  for (std::size_t i = 0; i < q.states(); ++i) c(i, 0) = 0.3 * static_cast<double>(i) - 0.5;
  const auto z0 = StateFunction::sample(
      p.grid(), [&](double z) { return c * std::cos(3 * z) + Matrix::identity(q.states()).column(0); });
  const auto r = simulate_closed_loop(p, q, sol.F, z0, 20, 1024);
  EXPECT_NEAR((r.measured_cost + r.tail_cost) / r.predicted_cost, 1.0, 1e-5);
  const auto oc = optimal_cost(p, sol, z0, uniqueness_certificate(q, sol, solve_fare(q)));
  EXPECT_NEAR(r.predicted_cost / oc.value, 1.0, 1e-9);
}

TEST(Simulate, UnstableLoopWithTailThrows) {
  const auto p = SpatialProfile::constant(1.0, 11);
  try {
    simulate_closed_loop(p, worked_quadruple(), Matrix::scalar(3.0), ones(p), 2, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnstableMatrix);
  }
  const auto r = simulate_closed_loop(p, worked_quadruple(), Matrix::scalar(3.0), ones(p), 2, 4, false);
  EXPECT_FALSE(r.tail_available);
  EXPECT_TRUE(std::isnan(r.predicted_cost));
  // Closed loop 2.5: second period is 6.25 times the first.
  EXPECT_NEAR(r.period_costs[1] / r.period_costs[0], 6.25, 1e-12);
}

TEST(Simulate, ZeroPeriodsLeavesOnlyTheTail) {
  const auto p = SpatialProfile::constant(1.0, 11);
  const auto r = simulate_closed_loop(p, worked_quadruple(), Matrix::scalar(kGain), ones(p), 0, 4);
  EXPECT_EQ(r.trace.samples.size(), 1u);
  EXPECT_EQ(r.measured_cost, 0.0);
  EXPECT_NEAR(r.tail_cost, kPi, 1e-12);
}

TEST(Simulate, GainShapeIsChecked) {
  const auto p = SpatialProfile::constant(1.0, 11);
  EXPECT_THROW(simulate_closed_loop(p, worked_quadruple(), Matrix(1, 2), ones(p), 1, 4), Error);
}

TEST(ExpFitting, HelpersMatchDirectFormulas) {
  for (double x : {0.6, 1.0, 3.0, 40.0}) {
    EXPECT_NEAR(detail::phi1(x), (1 - std::exp(-x)) / x, 1e-15);
    EXPECT_NEAR(detail::phi2(x), (1 - std::exp(-x) * (1 + x)) / (x * x), 1e-15);
  }
  EXPECT_NEAR(detail::phi2(0.0), 0.5, 1e-16);
  EXPECT_NEAR(detail::phi2(0.4999999), detail::phi2(0.5000001), 1e-7);
  EXPECT_NEAR(detail::phi1(1e-10), 1.0, 1e-10);
}

TEST(Resolvent, ConstantDataClosedForm) {
  const auto p = SpatialProfile::constant(1.0);
  const auto q = worked_quadruple();
  for (double s : {0.5, 10.0, 1000.0}) {
    const auto psi = apply_resolvent_adjoint(p, q, s, ones(p));
    const double e = std::exp(-s);
    const double expected_at_zero = (1 - e) / s / (1 + e / 2);
    EXPECT_NEAR(psi.values.front()(0, 0).real(), expected_at_zero, 1e-13 * (1 + expected_at_zero));
    // (lambda0 psi)(1) = A* (lambda0 psi)(0)
    EXPECT_NEAR(psi.values.back()(0, 0).real(), -0.5 * psi.values.front()(0, 0).real(), 1e-13);
  }
}

TEST(Resolvent, AdjointOfForwardResolvent) {
  const auto p = SpatialProfile::affine(1.0, 1.0, 1001);
  const auto q = random_quadruple(3, 3);
  const std::size_t n = q.states();
  SplitMix64 rng(1);
  const Matrix cf = random_matrix(rng, n, 2, true);
  const Matrix cg = random_matrix(rng, n, 2, true);
  auto f = [&](double z) { return cf.column(0) + cf.column(1) * std::sin(4 * z); };
  const auto g = StateFunction::sample(
      p.grid(), [&](double z) { return cg.column(0) * std::exp(z) + cg.column(1) * z * z; });
  for (double s : {0.7, 3.0, 25.0}) {
    const auto rf = forward_resolvent(p, q.A, s, f);
    const auto fs = StateFunction::sample(p.grid(), f);
    const auto rg = apply_resolvent_adjoint(p, q, s, g);
    const cplx lhs = weighted_inner_product(rf, g, p);
    const cplx rhs = weighted_inner_product(fs, rg, p);
    EXPECT_LT(std::abs(lhs - rhs), 1e-7 * (1 + std::abs(lhs))) << "s = " << s;
  }
}

TEST(Resolvent, Errors) {
  const auto p = SpatialProfile::constant(1.0, 11);
  const auto q = worked_quadruple();
  auto code = [&](double s) {
    try {
      apply_resolvent_adjoint(p, q, s, ones(p));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidConfig;
  };
  EXPECT_EQ(code(0.0), ErrorCode::OutOfDomain);
  EXPECT_EQ(code(-1.0), ErrorCode::OutOfDomain);
  EXPECT_EQ(code(INFINITY), ErrorCode::OverflowGuard);
  // A* = 1 makes I - e^{-s p1} A* singular as s -> 0; at s > 0 it is fine.
  const DiscreteQuadruple unit{Matrix::scalar(1.0), Matrix::scalar(1.0), Matrix::scalar(1.0),
                               Matrix::scalar(0.0)};
  EXPECT_NO_THROW(apply_resolvent_adjoint(p, unit, 1.0, ones(p)));
}

TEST(Yosida, WorkedExampleTable) {
  const auto p = SpatialProfile::constant(1.0);
  const auto y = yosida_probe(p, worked_quadruple(), ones(p), {10.0, 100.0, 1000.0});
  EXPECT_DOUBLE_EQ(y.target(0, 0).real(), 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    const double e = std::exp(-y.s[k]);
    EXPECT_NEAR(y.values[k](0, 0).real(), (1 - e) / (1 + e / 2), 1e-13);
  }
  EXPECT_NEAR(y.errors[0], 6.80983488026e-5, 1e-12);
  EXPECT_LE(y.errors[1], 1e-4);
  EXPECT_GE(y.errors[0], y.errors[1]);
  EXPECT_GE(y.errors[1], y.errors[2]);
}

TEST(Simulate, ZeroInitialStateCostsNothing) {
  const auto p = SpatialProfile::constant(1.0, 21);
  const auto z0 = StateFunction::constant(p.grid(), Matrix::scalar(0.0));
  const auto r = simulate_closed_loop(p, worked_quadruple(), Matrix::scalar(kGain), z0, 3, 8);
  for (const auto& w : r.trace.samples) EXPECT_EQ(w, Matrix::scalar(0.0));
  EXPECT_EQ(r.measured_cost + r.tail_cost, 0.0);
  EXPECT_EQ(cost_exact(p, worked_quadruple(), Matrix::scalar(kGain), z0), 0.0);
}

TEST(Simulate, DelayLineIsExact) {
  // A = 0, F = 0: one period of the initial trace, then nothing.
  const auto p = SpatialProfile::affine(1.0, 0.5, 101);
  const DiscreteQuadruple q{Matrix::scalar(0.0), Matrix::scalar(1.0), Matrix::scalar(1.0),
                            Matrix::scalar(0.0)};
  const auto z0 = StateFunction::sample(p.grid(), [](double z) { return Matrix::scalar(1 + z * z); });
  const auto h = initial_trace(p, z0, 16);
  const auto r = simulate_closed_loop(p, q, Matrix::scalar(0.0), z0, 3, 16);
  for (std::size_t k = 0; k < r.trace.samples.size(); ++k) {
    const Matrix expected = k < 16 ? h.samples[k] : Matrix::scalar(0.0);
    EXPECT_EQ(r.trace.samples[k], expected) << k;
  }
}

TEST(Simulate, PeriodCostsDoNotIncreaseUnderOptimalLoop) {
  // Period k costs <h, (A_Pi*)^k Q A_Pi^k h>; monotone in k for one state,
  // where |A_Pi| < 1. With several states A_Pi* Q A_Pi <= Q can fail.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto q = random_quadruple(seed, 1);
    const auto sol = solve_care(q);
    if (!stability_certificate(q, sol).stable) continue;
    const auto p = SpatialProfile::constant(1.0, 201);
    const auto r = simulate_closed_loop(p, q, sol.F, ones(p, q.states()), 15, 32);
    for (std::size_t k = 1; k < r.period_costs.size(); ++k)
      EXPECT_LE(r.period_costs[k], r.period_costs[k - 1] * (1 + 1e-12) + 1e-300) << seed;
  }
}

TEST(CostExact, SuboptimalGainCostsMore) {
  const auto p = SpatialProfile::constant(1.0);
  EXPECT_GT(cost_exact(p, worked_quadruple(), Matrix::scalar(kGain + 0.1), ones(p)), kPi);
}

TEST(Resolvent, UnitRateExampleAndZeroData) {
  const auto p = SpatialProfile::constant(1.0, 2001);
  const auto q = worked_quadruple();
  const auto psi = apply_resolvent_adjoint(p, q, 1.0, ones(p));
  // psi(zeta) = -1/2 e^{-(1 - zeta)} c + (1 - e^{-(1 - zeta)}), c = psi(0).
  const double e = std::exp(-1.0);
  const double c = (1 - e) / (1 + e / 2);
  for (double z : {0.0, 0.25, 0.5, 1.0}) {
    const double ez = std::exp(-(1 - z));
    EXPECT_NEAR(psi.at(z)(0, 0).real(), -0.5 * ez * c + (1 - ez), 1e-8) << z;
  }
  const auto zero = StateFunction::constant(p.grid(), Matrix::scalar(0.0));
  const auto r0 = apply_resolvent_adjoint(p, q, 3.0, zero);
  for (const auto& v : r0.values) EXPECT_EQ(v, Matrix::scalar(0.0));
  const auto y0 = yosida_probe(p, q, zero, {10.0, 100.0});
  for (const auto& v : y0.values) EXPECT_EQ(v, Matrix::scalar(0.0));
}

TEST(Yosida, SmoothDataConvergesFast) {
  const auto p = SpatialProfile::affine(1.0, 1.0, 2001);
  const auto q = random_quadruple(8, 3);
  const auto g = StateFunction::sample(p.grid(), [&](double z) {
    Matrix v(q.states(), 1);
    for (std::size_t i = 0; i < q.states(); ++i) v(i, 0) = std::cos(z + static_cast<double>(i));
    return v;
  });
  const double p1 = p.total_travel_time();
  const auto y = yosida_probe(p, q, g, {10.0 / p1, 100.0 / p1});
  EXPECT_LE(y.errors[1] * 10.0, y.errors[0]);
}
