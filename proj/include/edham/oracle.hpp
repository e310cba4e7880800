#pragma once

// Brute-force verification engines: adaptive Gauss-Kronrod quadrature,
// a finite-difference radial eigensolver with Richardson extrapolation, and
// a two-sided shooting integrator. They share no code path with the analytic
// QES machinery they are used to check.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>

#include "edham/errors.hpp"
#include "edham/linalg.hpp"

namespace edham::oracle {

// ---------------------------------------------------------------------------
// Quadrature

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a;
  double b;
  double value;
  double error;
  double magnitude;  // integral of |f|
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  double mag = std::abs(fc) * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[static_cast<std::size_t>(j)];
    const double fl = f(c - dx);
    const double fr = f(c + dx);
    const double sum = fl + fr;
    kronrod += kWgk[static_cast<std::size_t>(j)] * sum;
    mag += kWgk[static_cast<std::size_t>(j)] * (std::abs(fl) + std::abs(fr));
    if (j % 2 == 1) gauss += kWg[static_cast<std::size_t>(j / 2)] * sum;
  }
  return {a, b, kronrod * h, std::abs((kronrod - gauss) * h), mag * std::abs(h)};
}

}  // namespace detail

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int panels = 0;
  double r_cut = 0.0;
};

/// Adaptive composite Gauss-Kronrod on [a, b]; the panel with the largest
/// error estimate is bisected until the total estimate is below
/// max(abs_tol, rel_tol |I|). Integrals that cancel to (near) zero are
/// accepted once the estimate is at roundoff level against the integral of
/// |f|.
template <class F>
QuadResult quad_interval(const F& f, double a, double b, double rel_tol = 1e-13, double abs_tol = 0.0,
                         int initial_panels = 8, int max_panels = 4000) {
  std::priority_queue<detail::Panel> heap;
  double total = 0.0;
  double err = 0.0;
  double mag = 0.0;
  for (int i = 0; i < initial_panels; ++i) {
    const double lo = a + (b - a) * i / initial_panels;
    const double hi = (i + 1 == initial_panels) ? b : a + (b - a) * (i + 1) / initial_panels;
    auto p = detail::gk15(f, lo, hi);
    total += p.value;
    err += p.error;
    mag += p.magnitude;
    heap.push(p);
  }
  auto done = [&] {
    return err <= std::max(abs_tol, rel_tol * std::abs(total)) ||
           err <= 50.0 * std::numeric_limits<double>::epsilon() * mag;
  };
  while (!done()) {
    if (static_cast<int>(heap.size()) >= max_panels) {
      std::vector<std::pair<double, double>> trace;
      while (!heap.empty() && trace.size() < 16) {
        trace.emplace_back(heap.top().a, heap.top().b);
        heap.pop();
      }
      throw QuadratureError("quadrature did not converge, error estimate " + std::to_string(err), std::move(trace));
    }
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    auto left = detail::gk15(f, worst.a, mid);
    auto right = detail::gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    mag += left.magnitude + right.magnitude - worst.magnitude;
    heap.push(left);
    heap.push(right);
  }
  return {total, err, static_cast<int>(heap.size()), b};
}

/// Integral over [0, inf) of an integrand that decays at least like a
/// Gaussian. The cut-off starts at r = 12 and grows until the integrand tail
/// is negligible against its peak.
template <class F>
QuadResult quad(const F& f, double rel_tol = 1e-13, double abs_tol = 0.0) {
  double r_cut = 12.0;
  double peak = 0.0;
  for (int i = 1; i <= 240; ++i) peak = std::max(peak, std::abs(f(r_cut * i / 240.0)));
  auto tail = [&](double r) {
    double t = 0.0;
    for (int i = 0; i <= 16; ++i) t = std::max(t, std::abs(f(r - i / 16.0)));
    return t;
  };
  while (r_cut < 400.0 && tail(r_cut) > 1e-18 * peak) {
    r_cut *= 1.25;
    for (int i = 1; i <= 240; ++i) peak = std::max(peak, std::abs(f(r_cut * i / 240.0)));
  }
  auto res = quad_interval(f, 0.0, r_cut, rel_tol, abs_tol, 24);
  res.r_cut = r_cut;
  return res;
}

// ---------------------------------------------------------------------------
// Radial problems

/// -u'' + V(r) u = E u on (0, r_max) with u(0) = u(r_max) = 0. The potential
/// includes the centrifugal term; `ell` is used only to start the shooting
/// series u ~ r^(ell+1).
struct RadialProblem {
  std::function<double(double)> potential;
  int ell = 0;
  double r_max = 9.0;
  Index n_grid = 3000;
};

inline void validate(const RadialProblem& p) {
  if (!p.potential) throw InputError("RadialProblem: potential missing");
  if (p.ell < 0) throw InputError("RadialProblem: ell must be non-negative");
  if (!(p.r_max > 0.0)) throw InputError("RadialProblem: r_max must be positive");
  if (p.n_grid < 200) throw InputError("RadialProblem: n_grid must be >= 200");
}

/// 3-point Laplacian on r_k = k h, k = 1..n, h = r_max / (n + 1).
inline SymmetricTridiagonal fd_hamiltonian(const RadialProblem& p, Index n, double r_max) {
  const double h = r_max / static_cast<double>(n + 1);
  const double inv_h2 = 1.0 / (h * h);
  Vector diag(n);
  for (Index k = 0; k < n; ++k) {
    const double r = static_cast<double>(k + 1) * h;
    diag(k) = 2.0 * inv_h2 + p.potential(r);
  }
  Vector off = Vector::Constant(n - 1, -inv_h2);
  return {std::move(diag), std::move(off)};
}

struct FdSpectrum {
  Index first = 0;
  std::vector<double> coarse;        // grid h
  std::vector<double> fine;          // grid h/2
  std::vector<double> extrapolated;  // (4 fine - coarse) / 3
  std::vector<double> error_estimate;
  std::vector<int> nodes;  // from the fine-grid eigenvectors
  Vector r;                // fine grid
  Matrix vectors;          // fine-grid eigenvectors (columns)
  double r_max = 0.0;
  std::vector<std::string> warnings;
};

/// Levels first..first+k-1 on grids h and h/2 with Richardson extrapolation.
/// The error estimate compares against the (h/2, h/4) extrapolation.
/// r_max is doubled (keeping h) when the top eigenvector still has boundary
/// amplitude above 1e-12 of its maximum.
inline FdSpectrum fd_spectrum(const RadialProblem& problem, Index k_levels, Index first = 0, double tol = 1e-6) {
  validate(problem);
  if (k_levels < 1 || first < 0) throw InputError("fd_spectrum: need k_levels >= 1, first >= 0");
  double r_max = problem.r_max;
  Index n = problem.n_grid;
  for (int attempt = 0;; ++attempt) {
    const auto coarse_h = fd_hamiltonian(problem, n, r_max);
    const auto fine_h = fd_hamiltonian(problem, 2 * n + 1, r_max);
    if (first + k_levels > n) throw InputError("fd_spectrum: more levels requested than grid points");
    const Eigenpairs fine = fine_h.range(first, k_levels);
    const Vector& top = fine.vectors.col(k_levels - 1);
    const double boundary = std::abs(top(top.size() - 1)) / top.cwiseAbs().maxCoeff();
    if (boundary > 1e-12 && attempt < 3) {
      r_max *= 2.0;
      n = 2 * n + 1;
      continue;
    }
    FdSpectrum out;
    out.first = first;
    out.r_max = r_max;
    if (boundary > 1e-12) out.warnings.push_back("boundary amplitude " + std::to_string(boundary));
    const double h = r_max / static_cast<double>(2 * n + 2);
    out.r = Vector::LinSpaced(2 * n + 1, h, h * static_cast<double>(2 * n + 1));
    out.vectors = fine.vectors;
    // A third grid (h/4) only serves the error estimate of the (h, h/2) pair.
    const auto check_h = fd_hamiltonian(problem, 4 * n + 3, r_max);
    for (Index j = 0; j < k_levels; ++j) {
      const double c = coarse_h.eigenvalue(first + j);
      const double f = fine.values(j);
      const double q = check_h.eigenvalue(first + j);
      const double x = (4.0 * f - c) / 3.0;
      const double x_next = (4.0 * q - f) / 3.0;
      out.coarse.push_back(c);
      out.fine.push_back(f);
      out.extrapolated.push_back(x);
      out.error_estimate.push_back(16.0 / 15.0 * std::abs(x - x_next));
      out.nodes.push_back(count_sign_changes(fine.vectors.col(j)));
      if (out.error_estimate.back() > tol)
        out.warnings.push_back("level " + std::to_string(first + j) + " extrapolation error estimate " +
                               std::to_string(out.error_estimate.back()) + " above tol");
    }
    return out;
  }
}

/// Levels of the fine grid bracketing `target`: the level just below, and
/// `above` levels from the first one at or above it.
inline FdSpectrum fd_spectrum_near(const RadialProblem& problem, double target, Index above = 2) {
  validate(problem);
  const auto fine_h = fd_hamiltonian(problem, 2 * problem.n_grid + 1, problem.r_max);
  const Index below = fine_h.count_below(target);
  const Index first = below > 0 ? below - 1 : 0;
  return fd_spectrum(problem, (below - first) + above, first);
}

/// Index and extrapolated value of the FD level closest to target.
struct NearestLevel {
  Index index = -1;
  double energy = 0.0;
  double deviation = std::numeric_limits<double>::infinity();
  int nodes = -1;
};

inline NearestLevel nearest_level(const FdSpectrum& s, double target) {
  NearestLevel out;
  for (std::size_t j = 0; j < s.extrapolated.size(); ++j) {
    const double d = std::abs(s.extrapolated[j] - target);
    if (d < out.deviation) {
      out.deviation = d;
      out.index = s.first + static_cast<Index>(j);
      out.energy = s.extrapolated[j];
      out.nodes = s.nodes[j];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shooting

struct ShootResult {
  double mismatch = 0.0;  // normalized Wronskian at the matching point
  double r_match = 0.0;
};

namespace detail {

using State = std::array<double, 2>;

inline void integrate(const RadialProblem& p, double energy, State& y, double from, double to) {
  namespace odeint = boost::numeric::odeint;
  auto rhs = [&](const State& s, State& ds, double r) {
    ds[0] = s[1];
    ds[1] = (p.potential(r) - energy) * s[0];
  };
  auto stepper = odeint::make_controlled(1e-13, 1e-13, odeint::runge_kutta_dopri5<State>());
  const double chunk = 0.25 * (to > from ? 1.0 : -1.0);
  double r = from;
  while ((to - r) * (to > from ? 1.0 : -1.0) > 0.0) {
    const double next = (std::abs(to - r) < std::abs(chunk)) ? to : r + chunk;
    odeint::integrate_adaptive(stepper, rhs, y, r, next, 1e-4 * (next > r ? 1.0 : -1.0));
    r = next;
    const double mag = std::max(std::abs(y[0]), std::abs(y[1]));
    if (mag > 1e100) {
      y[0] *= 1e-100;
      y[1] *= 1e-100;
    }
  }
}

}  // namespace detail

/// Matching radius: argmin of the potential over [0.05 r_max, r_max).
inline double matching_radius(const RadialProblem& p) {
  double best_r = 0.5 * p.r_max;
  double best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 2000; ++i) {
    const double r = p.r_max * (0.05 + 0.9 * i / 2000.0);
    const double v = p.potential(r);
    if (v < best_v) {
      best_v = v;
      best_r = r;
    }
  }
  return best_r;
}

/// Integrates outward from the regular series u ~ r^(l+1)(1 + a1 r) and inward
/// from a decaying start at r_max, and returns their normalized Wronskian at
/// the matching radius. It vanishes exactly at eigenvalues.
inline ShootResult shoot(const RadialProblem& p, double energy) {
  validate(p);
  const double r0 = 1e-5;
  const double l = p.ell;
  // coefficient of 1/r in V, needed for the second series term
  const double c1 = r0 * (p.potential(r0) - l * (l + 1.0) / (r0 * r0));
  const double a1 = c1 / (2.0 * (l + 1.0));
  detail::State out{std::pow(r0, l + 1.0) * (1.0 + a1 * r0),
                    (l + 1.0) * std::pow(r0, l) + (l + 2.0) * a1 * std::pow(r0, l + 1.0)};
  const double scale = std::max(std::abs(out[0]), std::abs(out[1]));
  out[0] /= scale;
  out[1] /= scale;
  const double r_match = matching_radius(p);
  detail::integrate(p, energy, out, r0, r_match);

  const double kappa = std::sqrt(std::max(p.potential(p.r_max) - energy, 1e-12));
  detail::State in{1.0, -kappa};
  detail::integrate(p, energy, in, p.r_max, r_match);

  const double w = out[0] * in[1] - out[1] * in[0];
  const double norm = std::hypot(out[0], out[1]) * std::hypot(in[0], in[1]);
  return {w / norm, r_match};
}

/// Eigenvalue inside [lo, hi] where the Wronskian changes sign.
inline double shoot_eigenvalue(const RadialProblem& p, double lo, double hi, double tol = 1e-12) {
  const double wl = shoot(p, lo).mismatch;
  const double wh = shoot(p, hi).mismatch;
  if ((wl > 0.0) == (wh > 0.0)) throw NumericError("shoot_eigenvalue: no sign change in bracket");
  boost::uintmax_t max_iter = 200;
  auto stop = [tol](double a, double b) { return std::abs(b - a) <= tol * std::max(1.0, std::abs(a)); };
  auto f = [&](double e) { return shoot(p, e).mismatch; };
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, wl, wh, stop, max_iter);
  return 0.5 * (a + b);
}

}  // namespace edham::oracle
