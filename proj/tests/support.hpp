#pragma once

#include <cmath>
#include <cstdint>

#include "hyperlq/hyperlq.hpp"

namespace hyperlq::testing {

// Closed forms for the scalar example (A, B, C, D) = (-1/2, 1, -1/2, 1),
// evaluated to 30 digits offline.
inline constexpr double kPi = 0.132782218537318706545826653788;         // (sqrt 65 - 7)/8
inline constexpr double kGain = 0.265564437074637413091653307576;       // (1+Pi)/(2(2+Pi))
inline constexpr double kWeight = 2.132782218537318706546;              // 2 + Pi
inline constexpr double kOmega = 1.46040481324094474738;                // sqrt(2 + Pi)
inline constexpr double kClosedLoop = -0.234435562925362586908;         // -1/2 + F
inline constexpr double kPiTilde = 0.531128874149274826;                // (sqrt 65 - 7)/2
inline constexpr double kChiAtZero = 1.20185042515466309770;            // sqrt(13/9)

inline DiscreteQuadruple worked_quadruple() {
  return {Matrix::scalar(-0.5), Matrix::scalar(1.0), Matrix::scalar(-0.5), Matrix::scalar(1.0)};
}

inline BoundarySystem worked_system(std::size_t points = 2001) {
  BoundarySystem sys;
  sys.n = 1;
  sys.inputs = 1;
  sys.outputs = 1;
  sys.K = Matrix::scalar(-1.0);
  sys.L = Matrix::scalar(-0.5);
  sys.K_y = Matrix::scalar(-1.0);
  sys.L_y = Matrix::scalar(0.0);
  sys.lambda0 = SpatialProfile::constant(1.0, points);
  return sys;
}

inline Matrix random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols,
                            bool complex_entries = false) {
  Matrix m(rows, cols);
  for (auto& v : m.entries()) {
    const double re = rng.uniform(-1.0, 1.0);
    v = complex_entries ? cplx{re, rng.uniform(-1.0, 1.0)} : cplx{re, 0.0};
  }
  return m;
}

inline std::size_t random_count(SplitMix64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.next() % (hi - lo + 1));
}

/// Entries in [-1, 1]; A rescaled so that its spectral radius is at most
/// `radius`.
inline DiscreteQuadruple random_quadruple(std::uint64_t seed, std::size_t max_states = 4,
                                          double radius = 0.9) {
  SplitMix64 rng(seed);
  const std::size_t n = random_count(rng, 1, max_states);
  const std::size_t p = random_count(rng, 1, n);
  const std::size_t m = random_count(rng, 1, 3);
  DiscreteQuadruple q{random_matrix(rng, n, n), random_matrix(rng, n, p), random_matrix(rng, m, n),
                      random_matrix(rng, m, p)};
  const double r = spectral_radius(q.A);
  if (r > radius) q.A = q.A * (radius / r);
  return q;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).frobenius_norm() / (1.0 + b.frobenius_norm());
}

}  // namespace hyperlq::testing
