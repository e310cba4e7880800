#pragma once

// Random generators shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "edham/linalg.hpp"

namespace edham::testing {

using Rng = std::mt19937_64;

inline Matrix random_symmetric(Index n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = g(rng);
  return 0.5 * (a + a.transpose());
}

inline Matrix random_orthogonal(Index n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ();
}

/// dim x m kets whose Gram matrix has condition number close to `cond`
/// (before the kets are normalized).
inline Matrix random_kets(Index dim, Index m, double cond, Rng& rng) {
  const Matrix U = random_orthogonal(dim, rng).leftCols(m);
  const Matrix V = random_orthogonal(m, rng);
  Vector s(m);
  const double ratio = std::sqrt(cond);
  for (Index i = 0; i < m; ++i) s(i) = m == 1 ? 1.0 : std::pow(ratio, -static_cast<double>(i) / static_cast<double>(m - 1));
  return U * s.asDiagonal() * V.transpose();
}

/// m distinct energies separated by at least `gap`.
inline Vector random_energies(Index m, Rng& rng, double gap = 0.05) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> e;
  while (static_cast<Index>(e.size()) < m) {
    const double x = u(rng);
    if (std::all_of(e.begin(), e.end(), [&](double y) { return std::abs(x - y) >= gap; })) e.push_back(x);
  }
  return Eigen::Map<Vector>(e.data(), m);
}

}  // namespace edham::testing
