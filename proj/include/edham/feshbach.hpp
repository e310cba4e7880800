#pragma once

// Feshbach projection of a symmetric matrix onto a coordinate subspace P:
//
//   H_eff(z) = H_PP + H_PQ (z - H_QQ)^-1 H_QP.
//
// Every eigenpair (E, v) of H with Pv != 0 reappears as a fixed point
// H_eff(E) Pv = E Pv. The poles of H_eff are the eigenvalues of H_QQ; between
// two poles dH_eff/dz = -H_PQ (z - H_QQ)^-2 H_QP is negative semidefinite,
// so every sorted eigenvalue of H_eff decreases there and each branch has at
// most one fixed point per interval.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "edham/core_spectral.hpp"
#include "edham/errors.hpp"
#include "edham/linalg.hpp"

namespace edham {

struct Partition {
  Matrix H;
  std::vector<Index> p;
  std::vector<Index> q;
  Matrix H_PP;
  Matrix H_PQ;
  Matrix H_QP;
  Matrix H_QQ;

  Index size() const { return H.rows(); }
};

inline Matrix gather(const Matrix& h, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = h(rows[i], cols[j]);
  return out;
}

/// Splits H by the coordinates in p_indices (P) and the rest (Q).
inline Partition make_partition(Matrix H, std::vector<Index> p_indices) {
  ParametricOperator::check_symmetric(H, "make_partition");
  const Index n = H.rows();
  std::sort(p_indices.begin(), p_indices.end());
  if (std::adjacent_find(p_indices.begin(), p_indices.end()) != p_indices.end())
    throw InputError("make_partition: repeated P index");
  if (p_indices.empty() || static_cast<Index>(p_indices.size()) >= n)
    throw InputError("make_partition: need 1 <= |P| <= n - 1");
  for (Index i : p_indices)
    if (i < 0 || i >= n) throw InputError("make_partition: P index out of range");
  Partition part;
  part.p = std::move(p_indices);
  for (Index i = 0, k = 0; i < n; ++i) {
    if (k < static_cast<Index>(part.p.size()) && part.p[static_cast<std::size_t>(k)] == i)
      ++k;
    else
      part.q.push_back(i);
  }
  part.H_PP = gather(H, part.p, part.p);
  part.H_PQ = gather(H, part.p, part.q);
  part.H_QP = gather(H, part.q, part.p);
  part.H_QQ = gather(H, part.q, part.q);
  part.H = std::move(H);
  return part;
}

/// z -> H_eff(z). The resolvent acts through the eigen-decomposition of H_QQ,
/// which is computed once and yields the poles for free.
class EffectiveFamily {
 public:
  explicit EffectiveFamily(const Partition& part, double pole_guard_rel = 1e-15)
      : H_PP_(part.H_PP), H_PQ_(part.H_PQ) {
    const auto qq = spectral_decompose(0.5 * (part.H_QQ + part.H_QQ.transpose()));
    poles_ = qq.values;
    V_ = qq.vectors;
    B_ = H_PQ_ * V_;
    Eigen::SelfAdjointEigenSolver<Matrix> es(part.H, Eigen::EigenvaluesOnly);
    norm_ = es.eigenvalues().cwiseAbs().maxCoeff();
    pole_guard_ = pole_guard_rel * std::max(1.0, norm_);
  }

  Index dim() const { return H_PP_.rows(); }
  Interval domain() const { return {}; }
  const Vector& poles() const { return poles_; }
  double pole_guard() const { return pole_guard_; }
  /// Spectral norm of the full matrix.
  double norm() const { return norm_; }

  /// Coupling of each pole to P: the norm of H_PQ times its Q eigenvector.
  /// A zero residue means the pole is an eigenvalue of H that no fixed point
  /// can reach.
  Vector residues() const { return B_.colwise().norm().transpose(); }

  /// Distance from z to the nearest pole.
  double pole_distance(double z) const { return (poles_.array() - z).abs().minCoeff(); }

  Matrix evaluate(double z) const {
    check_pole(z);
    const Vector d = (z - poles_.array()).inverse().matrix();
    Matrix h = H_PP_ + B_ * d.asDiagonal() * B_.transpose();
    return 0.5 * (h + h.transpose());
  }

  /// -dH_eff/dz = B diag(1/(z - lambda)^2) B^T.
  Matrix slope(double z) const {
    check_pole(z);
    const Vector d = (z - poles_.array()).inverse().square().matrix();
    return B_ * d.asDiagonal() * B_.transpose();
  }

  /// (z - H_QQ)^-1 x.
  Vector resolvent_apply(double z, const Vector& x) const {
    check_pole(z);
    const Vector d = (z - poles_.array()).inverse().matrix();
    return V_ * d.asDiagonal() * (V_.transpose() * x);
  }

 private:
  void check_pole(double z) const {
    if (!std::isfinite(z)) throw InputError("EffectiveFamily: non-finite z");
    if (poles_.size() == 0) return;
    Index k = 0;
    const double dist = (poles_.array() - z).abs().minCoeff(&k);
    if (dist <= pole_guard_) throw NearPoleError(z, poles_(k));
  }

  Matrix H_PP_;
  Matrix H_PQ_;
  Vector poles_;
  Matrix V_;
  Matrix B_;
  double norm_ = 0.0;
  double pole_guard_ = 0.0;
};

inline EffectiveFamily make_effective(const Partition& part, double pole_guard_rel = 1e-15) {
  return EffectiveFamily(part, pole_guard_rel);
}

struct FeshbachOptions {
  /// Chebyshev points per inter-pole interval (refined on demand).
  int points_per_interval = 8;
  double fp_tol = 1e-12;
  /// Initial distance kept from each pole, relative to max(1, ||H||).
  double trim_rel = 1e-8;
  /// The trim shrinks by 100x while the excluded window still holds
  /// eigenvalues, down to this floor.
  double min_trim_rel = 1e-14;
};

struct IntervalReport {
  Interval interval;
  /// Roots predicted by the monotone sign test on sorted eigenvalues.
  Index expected = 0;
  Index found = 0;
  /// True when the tracker disagreed and the monotone search was used.
  bool fallback = false;
};

struct FeshbachSpectrum {
  std::vector<double> poles;
  /// Fixed points over all intervals, ascending; vectors are P-components.
  std::vector<FixedPointSolution> fixed_points;
  std::vector<IntervalReport> intervals;
  std::vector<std::string> warnings;

  std::vector<double> energies() const {
    std::vector<double> e;
    for (const auto& s : fixed_points) e.push_back(s.energy);
    return e;
  }
};

namespace detail {

/// Chebyshev-Lobatto points on [a, b]; dense near both poles.
inline std::vector<double> chebyshev_grid(double a, double b, int m) {
  std::vector<double> g(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double t = 0.5 * (1.0 - std::cos(std::numbers::pi * i / (m - 1)));
    g[static_cast<std::size_t>(i)] = a + (b - a) * t;
  }
  g.front() = a;
  g.back() = b;
  return g;
}

/// k-th sorted eigenvalue minus z; strictly decreasing between poles.
inline double sorted_gap(const EffectiveFamily& fam, double z, Index k, Vector* vec = nullptr) {
  const auto ep = spectral_decompose(fam.evaluate(z));
  if (vec) *vec = ep.vectors.col(k);
  return ep.values(k) - z;
}

/// Number of eigenvalues of H below z: poles below z plus the negative
/// inertia of H_eff(z) - z (Haynsworth).
inline Index count_below(const EffectiveFamily& fam, double z) {
  const Vector e = spectral_decompose(fam.evaluate(z)).values;
  return static_cast<Index>((fam.poles().array() < z).count()) + static_cast<Index>((e.array() < z).count());
}

/// Root of the k-th sorted branch in [a, b] by safeguarded Newton; the slope
/// comes from the Hellmann-Feynman derivative.
inline FixedPointSolution monotone_root(const EffectiveFamily& fam, Index k, double a, double b, double tol) {
  double lo = a;
  double hi = b;
  double z = 0.5 * (a + b);
  Vector v;
  for (int it = 0; it < 200; ++it) {
    const double g = sorted_gap(fam, z, k, &v);
    if (std::abs(g) <= tol) break;
    if (g > 0.0)
      lo = z;
    else
      hi = z;
    const double dg = -v.dot(fam.slope(z) * v) - 1.0;
    double next = z - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == z || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z))) break;
    z = next;
  }
  sorted_gap(fam, z, k, &v);
  apply_sign_convention(v);
  FixedPointSolution s;
  s.branch = k;
  s.energy = z;
  s.vector = v;
  s.residual = (fam.evaluate(z) * v - z * v).norm();
  return s;
}

}  // namespace detail

/// All fixed points of H_eff(E) psi = E psi. Each open inter-pole interval
/// (and the two outer ones, bounded by +-(||H|| + 1)) is trimmed around its
/// poles and searched with find_fixed_points. The monotone sign test gives an
/// independent root count per interval; on disagreement the interval is
/// re-solved by Newton on the sorted branches and a warning is recorded.
inline FeshbachSpectrum selfconsistent_spectrum(const EffectiveFamily& fam, const FeshbachOptions& opts = {}) {
  if (opts.points_per_interval < 2) throw InputError("selfconsistent_spectrum: need >= 2 points per interval");
  FeshbachSpectrum out;
  const double scale = std::max(1.0, fam.norm());
  const double bound = fam.norm() + 1.0;
  std::vector<double> poles(fam.poles().data(), fam.poles().data() + fam.poles().size());
  out.poles = poles;

  // Pole clusters and the window kept clear around each. An eigenvector with
  // small P-weight w sits about w^2 from a pole, so a window that still holds
  // eigenvalues (by the inertia count) is shrunk until it is empty.
  struct Window {
    double lo;
    double hi;
  };
  std::vector<Window> windows;
  const double t0 = opts.trim_rel * scale;
  const double t_min = std::max(opts.min_trim_rel, 10.0 * std::numeric_limits<double>::epsilon()) * scale;
  for (std::size_t i = 0; i < poles.size();) {
    std::size_t j = i;
    while (j + 1 < poles.size() && poles[j + 1] - poles[j] <= 2.0 * t0) ++j;
    const double p_lo = poles[i];
    const double p_hi = poles[j];
    double t = t0;
    for (;;) {
      const Index extra = detail::count_below(fam, p_hi + t) - detail::count_below(fam, p_lo - t);
      if (extra <= 0) break;
      if (t / 100.0 < t_min) {
        // Decoupled poles are eigenvalues of H with no P-component; they are
        // skipped. The rest cannot be resolved from the pole at this
        // precision and are reported at the pole.
        const Vector w = fam.residues();
        Index decoupled = 0;
        for (std::size_t q = i; q <= j; ++q)
          if (w(static_cast<Index>(q)) <= 64.0 * std::numeric_limits<double>::epsilon() * scale) ++decoupled;
        decoupled = std::min(decoupled, extra);
        if (decoupled > 0)
          out.warnings.push_back(std::to_string(decoupled) + " eigenvalue(s) at the pole " + std::to_string(p_lo) +
                                 " have no P-component and are not fixed points");
        const Index unresolved = extra - decoupled;
        if (unresolved > 0)
          out.warnings.push_back(std::to_string(unresolved) + " eigenvalue(s) within " + std::to_string(t) +
                                 " of the pole at " + std::to_string(p_lo) + "; reported at the pole");
        for (Index r = 0; r < unresolved; ++r) {
          FixedPointSolution s;
          s.energy = 0.5 * (p_lo + p_hi);
          s.residual = std::numeric_limits<double>::quiet_NaN();
          s.at_boundary = true;
          out.fixed_points.push_back(std::move(s));
        }
        break;
      }
      t /= 100.0;
    }
    windows.push_back({p_lo - t, p_hi + t});
    i = j + 1;
  }
  std::vector<Interval> intervals;
  {
    double left = -bound;
    for (const auto& w : windows) {
      intervals.push_back({left, w.lo});
      left = w.hi;
    }
    intervals.push_back({left, bound});
  }

  FixedPointOptions fp;
  fp.fp_tol = opts.fp_tol;
  fp.bisection_iterations = 4;
  const Index k = fam.dim();

  for (const auto& iv : intervals) {
    const double a = iv.lo;
    const double b = iv.hi;
    if (!(b > a)) continue;
    IntervalReport rep;
    rep.interval = {a, b};

    const Vector ga = spectral_decompose(fam.evaluate(a)).values.array() - a;
    const Vector gb = spectral_decompose(fam.evaluate(b)).values.array() - b;
    std::vector<Index> predicted;
    for (Index n = 0; n < k; ++n)
      if (ga(n) > 0.0 && gb(n) < 0.0) predicted.push_back(n);
    rep.expected = static_cast<Index>(predicted.size());

    std::vector<FixedPointSolution> roots;
    if (!predicted.empty()) {
      try {
        auto set = find_fixed_points_refining(fam, detail::chebyshev_grid(a, b, opts.points_per_interval), fp);
        for (auto& s : set.solutions) roots.push_back(std::move(s));
      } catch (const RefinementError&) {
        roots.clear();
      }
      const double res_tol = 1e-8 * std::max(1.0, fam.norm());
      const bool residual_ok = std::all_of(roots.begin(), roots.end(),
                                           [&](const auto& r) { return r.residual <= res_tol; });
      // A label swap inside the tracker can land two branches on one root;
      // the count then matches while another root is missing.
      bool distinct = true;
      for (std::size_t x = 0; x < roots.size(); ++x)
        for (std::size_t y = x + 1; y < roots.size(); ++y)
          if (std::abs(roots[x].energy - roots[y].energy) <= 1e-9 * scale &&
              std::abs(roots[x].vector.dot(roots[y].vector)) > 0.5)
            distinct = false;
      if (static_cast<Index>(roots.size()) != rep.expected || !residual_ok || !distinct) {
        out.warnings.push_back("interval [" + std::to_string(a) + ", " + std::to_string(b) + "]: tracker found " +
                               std::to_string(roots.size()) + " root(s), expected " +
                               std::to_string(rep.expected) + (residual_ok ? "" : ", residual check failed") +
                               (distinct ? "" : ", duplicate root") +
                               "; using monotone search");
        rep.fallback = true;
        roots.clear();
        for (Index n : predicted) roots.push_back(detail::monotone_root(fam, n, a, b, opts.fp_tol));
      }
    }
    rep.found = static_cast<Index>(roots.size());
    for (auto& r : roots) out.fixed_points.push_back(std::move(r));
    out.intervals.push_back(rep);
  }
  std::sort(out.fixed_points.begin(), out.fixed_points.end(),
            [](const auto& x, const auto& y) { return x.energy < y.energy; });
  for (std::size_t r = 0; r < out.fixed_points.size(); ++r) out.fixed_points[r].root = static_cast<Index>(r);
  return out;
}

struct FullEigenvector {
  Vector psi;  // unit norm in the original coordinates
  double residual = 0.0;  // ||H psi - E psi||
};

/// Rebuilds the full eigenvector from its P-component:
/// Q psi = (E - H_QQ)^-1 H_QP psi_eff.
inline FullEigenvector reconstruct_full(const Partition& part, const EffectiveFamily& fam, double E,
                                        const Vector& psi_eff) {
  if (psi_eff.size() != static_cast<Index>(part.p.size()))
    throw InputError("reconstruct_full: psi_eff has the wrong size");
  const Vector qpart = fam.resolvent_apply(E, part.H_QP * psi_eff);
  FullEigenvector out;
  out.psi = Vector::Zero(part.size());
  for (std::size_t i = 0; i < part.p.size(); ++i) out.psi(part.p[i]) = psi_eff(static_cast<Index>(i));
  for (std::size_t i = 0; i < part.q.size(); ++i) out.psi(part.q[i]) = qpart(static_cast<Index>(i));
  out.psi.normalize();
  apply_sign_convention(out.psi);
  out.residual = (part.H * out.psi - E * out.psi).norm();
  return out;
}

inline FullEigenvector reconstruct_full(const Partition& part, double E, const Vector& psi_eff) {
  return reconstruct_full(part, make_effective(part), E, psi_eff);
}

}  // namespace edham
