#pragma once

// Numerical checks of the three Riccati identities on the boundary system:
// the operator-node equation on D(S), the Weiss-Weiss equation with weight
// (Omega*Omega)^{-1} on D(A), and the feedthrough-only variant with weight
// (I + D*D)^{-1}, which fails whenever B*Pi B != 0.
//
// Test functions are polynomials in the flux w = lambda0 z. Every X inner
// product of the identities then reduces to an integral of polynomials,
//
//   <A&B [z; u], Z z>_X = -int_0^1 w* Pi w' dzeta,
//
// which is evaluated exactly from the coefficients, independent of lambda0.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "hyperlq/error.hpp"
#include "hyperlq/model.hpp"
#include "hyperlq/numerics.hpp"
#include "hyperlq/parallel.hpp"
#include "hyperlq/riccati.hpp"

namespace hyperlq {

/// SplitMix64 (Steele, Lea, Flood 2014): state += 0x9E3779B97F4A7C15, then
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9,
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB, z ^ (z >> 31).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

enum class Membership { DomainS, DomainA };

/// w(zeta) = sum_k coeffs[i][k] zeta^k for component i, plus the input u.
struct TestFunctionPair {
  std::vector<std::vector<cplx>> coeffs;
  Matrix u;
  Membership membership = Membership::DomainS;

  std::size_t dimension() const { return coeffs.size(); }

  Matrix w_at(double zeta) const {
    Matrix out(coeffs.size(), 1);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      cplx acc{};
      for (std::size_t k = coeffs[i].size(); k-- > 0;) acc = acc * zeta + coeffs[i][k];
      out(i, 0) = acc;
    }
    return out;
  }

  Matrix w0() const { return w_at(0.0); }
  Matrix w1() const { return w_at(1.0); }

  /// Scales w and u together; every identity is homogeneous of degree two.
  TestFunctionPair scaled(cplx alpha) const {
    TestFunctionPair out = *this;
    for (auto& c : out.coeffs)
      for (auto& v : c) v *= alpha;
    out.u *= alpha;
    return out;
  }
};

/// || w(0) - A w(1) - B u ||, zero for members of D(S) (u = 0 for D(A)).
inline double membership_defect(const DiscreteQuadruple& q, const TestFunctionPair& pair) {
  return (pair.w0() - q.A * pair.w1() - q.B * pair.u).frobenius_norm();
}

/// Draws coefficients (real and imaginary parts uniform in [-1, 1]) and, for
/// DomainS, the input u from SplitMix64(seed). The boundary defect
/// delta = B u + A w(1) - w(0) is then absorbed by adding (1 - zeta) delta,
/// which moves w(0) onto the constraint and leaves w(1) unchanged.
inline TestFunctionPair make_test_pair(const DiscreteQuadruple& q, std::uint64_t seed,
                                       Membership membership, std::size_t degree = 8) {
  SplitMix64 rng(seed);
  const std::size_t n = q.states();
  TestFunctionPair pair;
  pair.membership = membership;
  pair.coeffs.assign(n, std::vector<cplx>(std::max<std::size_t>(degree, 1) + 1));
  for (auto& c : pair.coeffs)
    for (auto& v : c) {
      const double re = rng.uniform(-1.0, 1.0);
      const double im = rng.uniform(-1.0, 1.0);
      v = cplx{re, im};
    }
  pair.u = Matrix(q.inputs(), 1);
  if (membership == Membership::DomainS) {
    for (auto& v : pair.u.entries()) {
      const double re = rng.uniform(-1.0, 1.0);
      const double im = rng.uniform(-1.0, 1.0);
      v = cplx{re, im};
    }
  }
  const Matrix delta = q.B * pair.u + q.A * pair.w1() - pair.w0();
  for (std::size_t i = 0; i < n; ++i) {
    pair.coeffs[i][0] += delta(i, 0);
    pair.coeffs[i][1] -= delta(i, 0);
  }
  return pair;
}

/// 2 Re <A&B [z; u], Pi z>_X = -2 Re int_0^1 w* Pi w' dzeta, exact.
inline double transport_form(const Matrix& pi, const TestFunctionPair& pair) {
  const std::size_t n = pair.dimension();
  cplx total{};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (pi(i, j) == cplx{}) continue;
      // int_0^1 conj(w_i) w_j' = sum_{a, b >= 1} conj(c_ia) b c_jb / (a + b)
      cplx acc{};
      const auto& ci = pair.coeffs[i];
      const auto& cj = pair.coeffs[j];
      for (std::size_t a = 0; a < ci.size(); ++a)
        for (std::size_t b = 1; b < cj.size(); ++b)
          acc += std::conj(ci[a]) * cj[b] * (static_cast<double>(b) / static_cast<double>(a + b));
      total += pi(i, j) * acc;
    }
  }
  return -2.0 * total.real();
}

/// K&L [z; u] = P^{-1/2} V w(1) + P^{1/2} u.
inline Matrix kl_operator(const DiscreteQuadruple& q, const RiccatiSolution& care,
                          const TestFunctionPair& pair) {
  (void)q;
  return solve_linear(care.Omega, care.V * pair.w1()) + care.Omega * pair.u;
}

namespace detail {

// Both sides of every identity are quadratic in the boundary data; the
// residual is normalized by ||w(1)||^2 + ||u||^2 (1 when that vanishes).
inline double relative_gap(double lhs, double rhs, const TestFunctionPair& pair) {
  const double scale = squared_norm(pair.w1()) + squared_norm(pair.u);
  return std::abs(lhs - rhs) / (scale > 0.0 ? scale : 1.0);
}

inline Matrix feedback_signal(const DiscreteQuadruple& q, const Matrix& pi,
                              const TestFunctionPair& pair) {
  // (B*_omega Z + D*C) z = B* Pi w(0) + D* C w(1)
  return q.B.adjoint() * pi * pair.w0() + q.D.adjoint() * q.C * pair.w1();
}

inline double state_side(const DiscreteQuadruple& q, const Matrix& pi,
                         const TestFunctionPair& pair) {
  return transport_form(pi, pair) + squared_norm(q.C * pair.w1());
}

}  // namespace detail

struct IdentitySides {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline IdentitySides node_sides(const DiscreteQuadruple& q, const RiccatiSolution& care,
                                const TestFunctionPair& pair) {
  const Matrix cd = q.C * pair.w1() + q.D * pair.u;
  return {transport_form(care.Pi, pair) + squared_norm(cd) + squared_norm(pair.u),
          squared_norm(kl_operator(q, care, pair))};
}

/// Operator-node Riccati identity with Z = Pi I_X and R = I on a D(S) pair.
inline double node_residual(const DiscreteQuadruple& q, const RiccatiSolution& care,
                            const TestFunctionPair& pair) {
  const auto s = node_sides(q, care, pair);
  return detail::relative_gap(s.lhs, s.rhs, pair);
}

inline IdentitySides weiss_weiss_sides(const DiscreteQuadruple& q, const RiccatiSolution& care,
                                       const TestFunctionPair& pair) {
  const Matrix v = detail::feedback_signal(q, care.Pi, pair);
  const Matrix weight = care.Omega.adjoint() * care.Omega;
  return {detail::state_side(q, care.Pi, pair), (v.adjoint() * solve_linear(weight, v))(0, 0).real()};
}

/// Weiss-Weiss identity with weight (Omega*Omega)^{-1} = P^{-1} on a D(A) pair.
inline double weiss_weiss_residual(const DiscreteQuadruple& q, const RiccatiSolution& care,
                                   const TestFunctionPair& pair) {
  const auto s = weiss_weiss_sides(q, care, pair);
  return detail::relative_gap(s.lhs, s.rhs, pair);
}

inline IdentitySides naive_sides(const DiscreteQuadruple& q, const RiccatiSolution& care,
                                 const TestFunctionPair& pair) {
  const Matrix v = detail::feedback_signal(q, care.Pi, pair);
  const Matrix weight = Matrix::identity(q.inputs()) + q.D.adjoint() * q.D;
  return {detail::state_side(q, care.Pi, pair), (v.adjoint() * solve_linear(weight, v))(0, 0).real()};
}

/// Same identity with the feedthrough-only weight (I + D*D)^{-1}.
inline double naive_residual(const DiscreteQuadruple& q, const RiccatiSolution& care,
                             const TestFunctionPair& pair) {
  const auto s = naive_sides(q, care, pair);
  return detail::relative_gap(s.lhs, s.rhs, pair);
}

struct VerificationSummary {
  std::size_t trials = 0;
  double node_max = 0.0;
  double weiss_weiss_max = 0.0;
  double naive_max = 0.0;
  double naive_min = std::numeric_limits<double>::infinity();
  double kl_optimal_max = 0.0;  // |K&L [z; F w(1)]| / |w(1)|
  double membership_max = 0.0;
};

/// Pair i uses seed + i: D(S) pairs for the node identity (and the K&L
/// annihilation check with u = F w(1)), D(A) pairs for the other two.
inline VerificationSummary verify_batch(const DiscreteQuadruple& q, const RiccatiSolution& care,
                                        std::size_t trials, std::uint64_t seed,
                                        std::size_t degree = 8) {
  struct Row {
    double node, ww, naive, kl, member;
  };
  std::vector<Row> rows(trials);
  parallel_for(trials, [&](std::size_t i) {
    const auto s_pair = make_test_pair(q, seed + i, Membership::DomainS, degree);
    const auto a_pair = make_test_pair(q, seed + i, Membership::DomainA, degree);
    TestFunctionPair opt = a_pair;
    opt.u = care.F * a_pair.w1();
    const double w1 = std::sqrt(squared_norm(a_pair.w1()));
    rows[i] = {node_residual(q, care, s_pair), weiss_weiss_residual(q, care, a_pair),
               naive_residual(q, care, a_pair),
               kl_operator(q, care, opt).frobenius_norm() / (w1 > 0.0 ? w1 : 1.0),
               std::max(membership_defect(q, s_pair), membership_defect(q, a_pair))};
  });
  VerificationSummary s;
  s.trials = trials;
  for (const auto& r : rows) {
    s.node_max = std::max(s.node_max, r.node);
    s.weiss_weiss_max = std::max(s.weiss_weiss_max, r.ww);
    s.naive_max = std::max(s.naive_max, r.naive);
    s.naive_min = std::min(s.naive_min, r.naive);
    s.kl_optimal_max = std::max(s.kl_optimal_max, r.kl);
    s.membership_max = std::max(s.membership_max, r.member);
  }
  if (trials == 0) s.naive_min = 0.0;
  return s;
}

}  // namespace hyperlq
