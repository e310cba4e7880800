#pragma once

// Sextic radial oscillator
//
//   [-d^2/dr^2 + l(l+1)/r^2 + A r^2 + a r^4 + r^6] phi = eps phi.
//
// The ansatz phi = r^(l+1) exp(-r^4/4 - a r^2/4) Q(r^2) terminates at degree N
// in s = r^2 only for A = A_N = a^2/4 - (4N + 2l + 5). At that coupling the
// Taylor coefficients of Q satisfy (T - eps) q = 0 with a tridiagonal T, so
// the roles of energy and coupling are swapped relative to the Coulomb case.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "edham/errors.hpp"
#include "edham/linalg.hpp"
#include "edham/oracle.hpp"
#include "edham/qes_coulomb.hpp"

namespace edham {

struct SinghModel {
  int ell = 0;
  double a = 0.0;  // quartic coupling
};

inline void validate(const SinghModel& m) {
  if (m.ell < 0) throw InputError("SinghModel: ell must be non-negative");
  if (!std::isfinite(m.a)) throw InputError("SinghModel: a must be finite");
}

/// Default ceiling on the multiplet order. Past it the tridiagonal problem
/// spans many decades and the residuals are only reported, not trusted.
inline constexpr int sextic_default_max_N = 24;

inline double qes_coupling(int N, const SinghModel& m) {
  validate(m);
  if (N < 0) throw InputError("qes_coupling: N must be non-negative");
  return m.a * m.a / 4.0 - (4.0 * N + 2.0 * m.ell + 5.0);
}

/// Diagonal a(2m+l+3/2), superdiagonal -2(m+1)(2m+2l+3), subdiagonal -4(N+1-m).
inline Matrix energy_matrix(int N, const SinghModel& m) {
  validate(m);
  if (N < 0) throw InputError("energy_matrix: N must be non-negative");
  const int n = N + 1;
  Matrix T = Matrix::Zero(n, n);
  for (int k = 0; k <= N; ++k) {
    T(k, k) = m.a * (2.0 * k + m.ell + 1.5);
    if (k < N) T(k, k + 1) = -2.0 * (k + 1) * (2.0 * k + 2.0 * m.ell + 3.0);
    if (k > 0) T(k, k - 1) = -4.0 * (N + 1 - k);
  }
  return T;
}

struct SexticLevel {
  int N = 0;
  int j = 0;
  double coupling = 0.0;
  double energy = 0.0;
  /// Coefficients of Q(s), s = r^2, scaled so that <phi|phi> = 1.
  Vector coeffs;
  /// Norm before normalization (with q_N = 1).
  double norm = 1.0;
  double recurrence_residual = 0.0;
  /// Positive roots of Q(s), i.e. radial nodes.
  int nodes = 0;
};

struct SexticSpectrum {
  int N = 0;
  double coupling = 0.0;
  std::vector<double> energies;
  std::vector<SexticLevel> levels;
  /// Largest relative recurrence residual across the multiplet.
  double worst_residual = 0.0;
  std::vector<std::string> warnings;
};

inline double wavefunction(const SexticLevel& lv, const SinghModel& m, double r) {
  const double s = r * r;
  return std::pow(r, m.ell + 1) * std::exp(-0.25 * s * s - 0.25 * m.a * s) * detail::poly_eval(lv.coeffs, s);
}

/// Energies eps_{N,0} < ... < eps_{N,N} with their polynomials. Orders above
/// max_N are refused unless `report_only` is set. Recurrence residuals above
/// 1e-12 and poorly conditioned norm integrals are attached as warnings.
inline SexticSpectrum qes_energies(int N, const SinghModel& m, int max_N = sextic_default_max_N,
                                   bool report_only = false) {
  if (N > max_N && !report_only)
    throw InputError("qes_energies: N = " + std::to_string(N) + " exceeds the limit " + std::to_string(max_N));
  const Matrix T = energy_matrix(N, m);
  SexticSpectrum out;
  out.N = N;
  out.coupling = qes_coupling(N, m);
  Eigenpairs ep;
  if (N == 0) {
    ep.values = Vector::Constant(1, T(0, 0));
    ep.vectors = Matrix::Ones(1, 1);
  } else {
    ep = detail::positive_tridiagonal_eigen(T);
  }
  for (int j = 0; j <= N; ++j) {
    SexticLevel lv;
    lv.N = N;
    lv.j = j;
    lv.coupling = out.coupling;
    lv.energy = ep.values(j);
    Vector q = N == 0 ? Vector(Vector::Ones(1)) : detail::tridiagonal_null_vector(T, lv.energy, ep.vectors.col(j));
    q /= q(N);
    lv.recurrence_residual = detail::null_residual(T, lv.energy, q);
    const Vector qq = q;
    auto g = [&](double r) {
      const double s = r * r;
      const double p = detail::poly_eval(qq, s);
      return std::pow(r, 2 * m.ell + 2) * std::exp(-0.5 * s * s - 0.5 * m.a * s) * p * p;
    };
    try {
      lv.norm = std::sqrt(oracle::quad(g, 1e-13, 1e-300).value);
    } catch (const QuadratureError&) {
      // Large N: cancellation in the polynomial makes the integrand noisy at
      // the level eps * sum |q_k| s^k, which bounds the attainable accuracy.
      const Vector qa = qq.cwiseAbs();
      auto noise = [&](double r) {
        const double s2 = r * r;
        const double p = detail::poly_eval(qa, s2);
        return std::pow(r, 2 * m.ell + 2) * std::exp(-0.5 * s2 * s2 - 0.5 * m.a * s2) * p * p;
      };
      const double scale = oracle::quad(noise, 1e-10, 1e-300).value;
      const auto res = oracle::quad(g, 1e-13, 1e-12 * scale);
      lv.norm = std::sqrt(res.value);
      char buf[128];
      std::snprintf(buf, sizeof buf, "level %d: norm integral conditioned at %.3g, error estimate %.3g", j,
                    scale / res.value, res.error / res.value);
      out.warnings.push_back(buf);
    }
    lv.coeffs = q / lv.norm;
    lv.nodes = detail::positive_roots(lv.coeffs);
    out.worst_residual = std::max(out.worst_residual, lv.recurrence_residual);
    out.energies.push_back(lv.energy);
    out.levels.push_back(std::move(lv));
  }
  if (out.worst_residual > 1e-12)
    out.warnings.push_back("recurrence residual " + std::to_string(out.worst_residual) + " above 1e-12");
  return out;
}

inline oracle::RadialProblem radial_problem(const SinghModel& m, double coupling, Index n_grid = 3000) {
  validate(m);
  const double l = m.ell;
  const double a = m.a;
  oracle::RadialProblem p;
  p.potential = [l, a, coupling](double r) {
    const double s = r * r;
    return l * (l + 1.0) / s + coupling * s + a * s * s + s * s * s;
  };
  p.ell = m.ell;
  p.r_max = 6.0;
  p.n_grid = n_grid;
  return p;
}

}  // namespace edham
