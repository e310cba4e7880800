#pragma once

// Oscillator with an energy-dependent mass m(E) = A^2 (E - E0)^2.
//
// Closed forms: E+_n = E0 + sqrt(E0^2 + (8n+4)/A) for every n >= 0, and the
// finite family E-_{+-n} = E0 +- sqrt(E0^2 - (8n+4)/A), n = 0..n_max with
// n_max = floor((A E0^2 - 4) / 8), present only when A E0^2 >= 4.
//
// The numerical cross-check discretizes -(1/m(z)) psi'' + x^2 psi = z psi.
// Its fixed points obey z |z - E0| = (2n+1)/A, which is the closed form up to
// an overall energy scale; that scale is fitted and reported.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edham/core_spectral.hpp"
#include "edham/errors.hpp"
#include "edham/linalg.hpp"

namespace edham {

struct ToyModel {
  double A = 1.0;
  double E0 = 0.0;
};

inline void validate(const ToyModel& m) {
  if (!(m.A > 0.0) || !std::isfinite(m.A)) throw InputError("ToyModel: A must be positive");
  if (!std::isfinite(m.E0)) throw InputError("ToyModel: E0 must be finite");
}

inline double toy_mass(const ToyModel& m, double E) { return m.A * m.A * (E - m.E0) * (E - m.E0); }

inline double spectrum_plus(int n, const ToyModel& m) {
  validate(m);
  if (n < 0) throw InputError("spectrum_plus: n must be non-negative");
  return m.E0 + std::sqrt(m.E0 * m.E0 + (8.0 * n + 4.0) / m.A);
}

/// Largest n of the finite branch, or -1 when A E0^2 < 4.
inline int minus_branch_nmax(const ToyModel& m) {
  validate(m);
  const double x = m.A * m.E0 * m.E0;
  if (x < 4.0) return -1;
  return static_cast<int>(std::floor((x - 4.0) / 8.0));
}

struct MinusPair {
  int n = 0;
  double lower = 0.0;  // E0 - sqrt(...)
  double upper = 0.0;  // E0 + sqrt(...)
};

inline std::vector<MinusPair> spectrum_minus(const ToyModel& m) {
  std::vector<MinusPair> out;
  const int n_max = minus_branch_nmax(m);
  for (int n = 0; n <= n_max; ++n) {
    const double disc = std::max(0.0, m.E0 * m.E0 - (8.0 * n + 4.0) / m.A);
    const double root = std::sqrt(disc);
    out.push_back({n, m.E0 - root, m.E0 + root});
  }
  return out;
}

/// Finite-difference H(z) = (1/m(z)) T + x^2 on [-L, L] (or [0, L] in
/// half-line mode) with Dirichlet ends. `constant_mass` replaces m(z) by 1.
class ToyFamily {
 public:
  ToyFamily(ToyModel model, Index points, double L, bool half_line = false, bool constant_mass = false)
      : model_(model), n_(points), L_(L), half_line_(half_line), constant_mass_(constant_mass) {
    validate(model_);
    if (n_ < 50) throw InputError("ToyFamily: need at least 50 grid points");
    if (!(L_ > 0.0)) throw InputError("ToyFamily: L must be positive");
    const double a = half_line_ ? 0.0 : -L_;
    h_ = (L_ - a) / static_cast<double>(n_ + 1);
    x2_.resize(n_);
    for (Index i = 0; i < n_; ++i) {
      const double x = a + h_ * static_cast<double>(i + 1);
      x2_(i) = x * x;
    }
  }

  Index dim() const { return n_; }
  double spacing() const { return h_; }
  Interval domain() const { return {}; }

  double inverse_mass(double z) const {
    if (constant_mass_) return 1.0;
    const double mass = toy_mass(model_, z);
    if (!(mass > 0.0)) throw InputError("ToyFamily: m(z) vanishes at z = E0");
    return 1.0 / mass;
  }

  SymmetricTridiagonal tridiagonal(double z) const {
    const double c = inverse_mass(z) / (h_ * h_);
    return SymmetricTridiagonal(x2_.array() + 2.0 * c, Vector::Constant(n_ - 1, -c));
  }

  Matrix evaluate(double z) const { return tridiagonal(z).dense(); }
  Eigenpairs eigenpairs(double z, Index k) const { return tridiagonal(z).lowest(k); }

 private:
  ToyModel model_;
  Index n_;
  double L_;
  bool half_line_;
  bool constant_mass_;
  double h_ = 0.0;
  Vector x2_;
};

struct ToyCrosscheckOptions {
  Index levels = 8;           // branches tracked
  Index grid_points = 800;    // coarse grid; the fine grid has 2n + 1 points
  std::size_t scan_points = 240;
  /// Scan window in solver units; defaults to [E0 - 20, E0 + 20] clipped to z > 0.
  std::optional<Interval> window;
  /// Exclusion around z = E0, where the mass vanishes.
  double gap = 1e-3;
  bool half_line = false;
  bool constant_mass = false;
};

struct ToyRow {
  std::string branch;  // "plus", "minus_lower", "minus_upper", "constant"
  int n = 0;
  std::optional<double> formula;
  double solver = 0.0;  // Richardson-extrapolated fixed point
  double solver_coarse = 0.0;
  double solver_fine = 0.0;
};

struct ToyCrosscheck {
  ToyModel model;
  std::vector<ToyRow> rows;
  /// c minimizing sum (E_formula - c z_solver)^2.
  std::optional<double> convention_factor;
  /// max |E_formula - c z| / |E_formula| over matched rows.
  double max_relative_misfit = 0.0;
  int plus_found = 0;
  int plus_expected = 0;
  int minus_found = 0;
  int minus_expected = 0;
  bool plus_increasing = true;
  bool counts_match = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> fixed_points_on(const ToyFamily& fam, double lo, double hi, std::size_t points,
                                           Index levels) {
  FixedPointOptions opts;
  opts.tracking.max_branches = levels;
  opts.fp_tol = 1e-11;
  std::vector<double> out;
  if (!(hi > lo)) return out;
  for (const auto& s : find_fixed_points_refining(fam, uniform_grid(lo, hi, points), opts).solutions)
    out.push_back(s.energy);
  std::sort(out.begin(), out.end());
  return out;
}

/// Fixed points of z |z - E0| = (2n+1)/A (or z = 2n+1 with constant mass) in
/// the solver's own units, used to label and count solver roots.
inline std::vector<std::pair<std::string, int>> label_roots(const ToyModel& m, const std::vector<double>& z,
                                                            bool constant_mass, bool half_line) {
  std::vector<std::pair<std::string, int>> labels;
  for (double x : z) {
    if (constant_mass) {
      int k = static_cast<int>(std::lround((x - 1.0) / 2.0));
      labels.emplace_back("constant", half_line ? (k - 1) / 2 : k);
      continue;
    }
    const double q = m.A * x * std::abs(x - m.E0);
    int k = static_cast<int>(std::lround((q - 1.0) / 2.0));
    if (half_line) k = (k - 1) / 2;
    if (x > m.E0)
      labels.emplace_back("plus", k);
    else
      labels.emplace_back(x < 0.5 * m.E0 ? "minus_lower" : "minus_upper", k);
  }
  return labels;
}

}  // namespace detail

/// Solves the discretized problem on two grids (h, h/2), extrapolates each
/// fixed point, and lines the results up with the closed forms. Only branches
/// n < levels are tracked, so the plus count is compared over those.
inline ToyCrosscheck crosscheck_fixed_point(const ToyModel& m, const ToyCrosscheckOptions& opts = {}) {
  validate(m);
  if (opts.levels < 1) throw InputError("crosscheck_fixed_point: levels must be positive");
  ToyCrosscheck out;
  out.model = m;
  const Interval win = opts.window.value_or(Interval{std::max(1e-6, m.E0 - 20.0), m.E0 + 20.0});
  if (!(win.hi > win.lo) || !std::isfinite(win.lo) || !std::isfinite(win.hi))
    throw InputError("crosscheck_fixed_point: invalid window");
  const double L = std::max(9.0, 2.0 * std::sqrt(std::max(std::abs(win.lo), std::abs(win.hi))));

  const ToyFamily coarse(m, opts.grid_points, L, opts.half_line, opts.constant_mass);
  const ToyFamily fine(m, 2 * opts.grid_points + 1, L, opts.half_line, opts.constant_mass);

  auto solve = [&](const ToyFamily& fam) {
    std::vector<double> z;
    if (opts.constant_mass) return detail::fixed_points_on(fam, win.lo, win.hi, opts.scan_points, opts.levels);
    const double below = std::min(win.hi, m.E0 - opts.gap);
    const double above = std::max(win.lo, m.E0 + opts.gap);
    if (below > win.lo) {
      auto part = detail::fixed_points_on(fam, win.lo, below, opts.scan_points, opts.levels);
      z.insert(z.end(), part.begin(), part.end());
    }
    if (win.hi > above) {
      auto part = detail::fixed_points_on(fam, above, win.hi, opts.scan_points, opts.levels);
      z.insert(z.end(), part.begin(), part.end());
    }
    return z;
  };
  const auto zc = solve(coarse);
  const auto zf = solve(fine);
  if (zc.size() != zf.size()) {
    out.warnings.push_back("coarse and fine grids found different root counts (" + std::to_string(zc.size()) +
                           " vs " + std::to_string(zf.size()) + "); grid too coarse");
    throw RefinementError(win.lo, win.hi, -1, 0.0);
  }

  const auto labels = detail::label_roots(m, zf, opts.constant_mass, opts.half_line);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < zf.size(); ++i) {
    ToyRow row;
    row.branch = labels[i].first;
    row.n = labels[i].second;
    row.solver_coarse = zc[i];
    row.solver_fine = zf[i];
    row.solver = (4.0 * zf[i] - zc[i]) / 3.0;
    if (!opts.half_line && !opts.constant_mass) {
      if (row.branch == "plus") {
        row.formula = spectrum_plus(row.n, m);
      } else {
        const auto pairs = spectrum_minus(m);
        if (row.n >= 0 && row.n < static_cast<int>(pairs.size()))
          row.formula = row.branch == "minus_lower" ? pairs[static_cast<std::size_t>(row.n)].lower
                                                    : pairs[static_cast<std::size_t>(row.n)].upper;
      }
    }
    if (row.formula) {
      num += *row.formula * row.solver;
      den += row.solver * row.solver;
    }
    if (row.branch == "plus") ++out.plus_found;
    if (row.branch == "minus_lower" || row.branch == "minus_upper") ++out.minus_found;
    out.rows.push_back(std::move(row));
  }
  if (den > 0.0) {
    out.convention_factor = num / den;
    for (const auto& r : out.rows)
      if (r.formula)
        out.max_relative_misfit = std::max(
            out.max_relative_misfit, std::abs(*r.formula - *out.convention_factor * r.solver) / std::abs(*r.formula));
  }

  // Expected counts from the solver-unit relation z |z - E0| = (2n+1)/A.
  if (!opts.constant_mass && !opts.half_line) {
    for (Index n = 0; n < opts.levels; ++n) {
      const double c = (2.0 * static_cast<double>(n) + 1.0) / m.A;
      const double zp = 0.5 * m.E0 + std::sqrt(0.25 * m.E0 * m.E0 + c);
      if (zp >= win.lo && zp <= win.hi && zp > m.E0 + opts.gap) ++out.plus_expected;
      const double disc = 0.25 * m.E0 * m.E0 - c;
      if (disc > 0.0) {
        for (double zm : {0.5 * m.E0 - std::sqrt(disc), 0.5 * m.E0 + std::sqrt(disc)})
          if (zm >= win.lo && zm <= win.hi && zm < m.E0 - opts.gap) ++out.minus_expected;
      }
    }
    out.counts_match = out.plus_found == out.plus_expected && out.minus_found == out.minus_expected;
  } else {
    out.counts_match = true;
  }
  double last = -std::numeric_limits<double>::infinity();
  int last_n = -1;
  for (const auto& r : out.rows) {
    if (r.branch != "plus") continue;
    if (r.n <= last_n || r.solver <= last) out.plus_increasing = false;
    last = r.solver;
    last_n = r.n;
  }
  return out;
}

}  // namespace edham
