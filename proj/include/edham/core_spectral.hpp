#pragma once

// Parametric operator families H(z), eigenvalue-branch tracking and the
// fixed-point search E_n(z) = z that turns an energy-dependent eigenproblem
// H(E) phi = E phi into a set of ordinary eigenpairs.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "edham/errors.hpp"
#include "edham/linalg.hpp"

namespace edham {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double z) const { return z >= lo && z <= hi; }
};

/// Anything that maps a real parameter to a symmetric matrix of fixed size.
template <class T>
concept ParametricFamily = requires(const T& op, double z) {
  { op.dim() } -> std::convertible_to<Index>;
  { op.evaluate(z) } -> std::convertible_to<Matrix>;
  { op.domain() } -> std::convertible_to<Interval>;
};

/// Families that can produce their lowest k eigenpairs without a dense solve.
template <class T>
concept PartialEigenFamily = ParametricFamily<T> && requires(const T& op, double z, Index k) {
  { op.eigenpairs(z, k) } -> std::convertible_to<Eigenpairs>;
};

/// Type-erased parametric operator (closed form, tabulated or affine).
class ParametricOperator {
 public:
  using Evaluator = std::function<Matrix(double)>;

  ParametricOperator(Index dim, Evaluator evaluator, Interval domain = {})
      : dim_(dim), evaluator_(std::move(evaluator)), domain_(domain) {
    if (dim_ < 1) throw InputError("ParametricOperator: dim must be positive");
  }

  Index dim() const { return dim_; }
  Interval domain() const { return domain_; }

  Matrix evaluate(double z) const {
    if (!domain_.contains(z)) throw InputError("ParametricOperator: z outside domain");
    Matrix h = evaluator_(z);
    if (h.rows() != dim_ || h.cols() != dim_)
      throw InputError("ParametricOperator: evaluator returned wrong shape");
    return h;
  }

  /// H(z) = H0 + z H1.
  static ParametricOperator affine(Matrix h0, Matrix h1, Interval domain = {}) {
    check_symmetric(h0, "affine H0");
    check_symmetric(h1, "affine H1");
    if (h0.rows() != h1.rows()) throw InputError("affine family: H0 and H1 differ in size");
    const Index n = h0.rows();
    return ParametricOperator(
        n, [h0 = std::move(h0), h1 = std::move(h1)](double z) -> Matrix { return h0 + z * h1; },
        domain);
  }

  /// Entrywise linear interpolation between tabulated matrices; the domain is
  /// the tabulated z range.
  static ParametricOperator table(std::vector<double> zs, std::vector<Matrix> mats) {
    if (zs.size() < 2 || zs.size() != mats.size())
      throw InputError("table family: need >= 2 z values and one matrix per z");
    for (std::size_t i = 1; i < zs.size(); ++i)
      if (!(zs[i] > zs[i - 1])) throw InputError("table family: z must be strictly increasing");
    const Index n = mats.front().rows();
    for (const auto& m : mats) {
      if (m.rows() != n || m.cols() != n) throw InputError("table family: inconsistent matrix sizes");
      check_symmetric(m, "table matrix");
    }
    Interval dom{zs.front(), zs.back()};
    return ParametricOperator(
        n,
        [zs = std::move(zs), mats = std::move(mats)](double z) -> Matrix {
          auto it = std::upper_bound(zs.begin(), zs.end(), z);
          std::size_t k = it == zs.begin() ? 0 : static_cast<std::size_t>(it - zs.begin()) - 1;
          if (k + 1 >= zs.size()) k = zs.size() - 2;
          const double t = (z - zs[k]) / (zs[k + 1] - zs[k]);
          if (t == 0.0) return mats[k];
          if (t == 1.0) return mats[k + 1];
          return (1.0 - t) * mats[k] + t * mats[k + 1];
        },
        dom);
  }

  static void check_symmetric(const Matrix& m, const std::string& what) {
    if (m.rows() != m.cols()) throw InputError(what + ": matrix not square");
    if (!m.allFinite()) throw InputError(what + ": non-finite entries");
    if (symmetry_defect(m) > 1e-13) throw InputError(what + ": matrix is not symmetric");
  }

 private:
  Index dim_;
  Evaluator evaluator_;
  Interval domain_;
};

/// Lowest k eigenpairs of op at z (all of them when k >= dim).
template <ParametricFamily Op>
Eigenpairs eigenpairs_at(const Op& op, double z, Index k) {
  const Index n = op.dim();
  k = std::min(k, n);
  if constexpr (PartialEigenFamily<Op>) {
    return op.eigenpairs(z, k);
  } else {
    Eigenpairs all = spectral_decompose(op.evaluate(z));
    if (k == n) return all;
    return {all.values.head(k), all.vectors.leftCols(k)};
  }
}

struct BranchSample {
  double z;
  double value;
  Vector vector;
};

struct EigenBranch {
  Index index = 0;
  std::vector<BranchSample> samples;
  /// Smallest overlap between consecutive phase-aligned eigenvectors.
  double min_overlap = 1.0;
};

/// A grid step where the matching had to pick inside a degenerate cluster.
struct DegenerateStep {
  double z;
  Index branch;
  Index cluster_size;
};

struct BranchSet {
  std::vector<EigenBranch> branches;
  std::vector<DegenerateStep> degenerate_steps;
};

struct TrackOptions {
  double overlap_threshold = 0.5;
  /// Track only the lowest `max_branches` levels (all when unset).
  std::optional<Index> max_branches;
  /// Eigenvalues closer than this (relative to the spectral scale) form a cluster.
  double degeneracy_tol = 1e-10;
};

inline void validate_grid(const std::vector<double>& grid, const Interval& domain) {
  if (grid.size() < 2) throw InputError("grid needs at least 2 points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw InputError("grid contains non-finite values");
    if (!domain.contains(grid[i])) throw InputError("grid point outside operator domain");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("grid must be strictly increasing");
  }
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n = 400) {
  if (n < 2 || !(hi > lo)) throw InputError("uniform_grid: need n >= 2 and hi > lo");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = hi;
  return g;
}

namespace detail {

struct Match {
  std::vector<Index> target;  // branch i -> column of the new eigenpairs
  std::vector<double> certificate;
  std::vector<Index> cluster_size;
};

inline std::vector<std::vector<Index>> clusters(const Vector& values, double tol) {
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(values.size()));
  for (Index j = 0; j < values.size(); ++j)
    for (Index k = 0; k < values.size(); ++k)
      if (std::abs(values(j) - values(k)) <= tol * scale) out[static_cast<std::size_t>(j)].push_back(k);
  return out;
}

/// Greedy maximum-overlap assignment of previous vectors to new eigenpairs,
/// ties broken by nearest eigenvalue. The continuity certificate is the norm
/// of the projection of the old vector onto the new vector's degenerate cluster.
inline Match match_eigenpairs(const Matrix& prev_vectors, const Vector& prev_values,
                              const Eigenpairs& next, double degeneracy_tol) {
  const Index m = prev_vectors.cols();
  const Matrix overlap = (prev_vectors.transpose() * next.vectors).cwiseAbs();
  struct Cand {
    double ov;
    double gap;
    Index i;
    Index j;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<std::size_t>(m * next.values.size()));
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < next.values.size(); ++j)
      cands.push_back({overlap(i, j), std::abs(prev_values(i) - next.values(j)), i, j});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (std::abs(a.ov - b.ov) > 1e-12) return a.ov > b.ov;
    if (a.gap != b.gap) return a.gap < b.gap;
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  Match out;
  out.target.assign(static_cast<std::size_t>(m), -1);
  out.certificate.assign(static_cast<std::size_t>(m), 0.0);
  out.cluster_size.assign(static_cast<std::size_t>(m), 1);
  std::vector<char> used(static_cast<std::size_t>(next.values.size()), 0);
  Index assigned = 0;
  for (const auto& c : cands) {
    if (assigned == m) break;
    if (out.target[static_cast<std::size_t>(c.i)] >= 0 || used[static_cast<std::size_t>(c.j)]) continue;
    out.target[static_cast<std::size_t>(c.i)] = c.j;
    used[static_cast<std::size_t>(c.j)] = 1;
    ++assigned;
  }
  const auto groups = clusters(next.values, degeneracy_tol);
  for (Index i = 0; i < m; ++i) {
    const Index j = out.target[static_cast<std::size_t>(i)];
    const auto& group = groups[static_cast<std::size_t>(j)];
    double proj = 0.0;
    for (Index k : group) {
      const double d = prev_vectors.col(i).dot(next.vectors.col(k));
      proj += d * d;
    }
    out.certificate[static_cast<std::size_t>(i)] = std::sqrt(proj);
    out.cluster_size[static_cast<std::size_t>(i)] = static_cast<Index>(group.size());
  }
  return out;
}

}  // namespace detail

/// Follows every eigenvalue branch E_n(z) across the grid by eigenvector
/// overlap (not by sorting values), so crossings keep their labels.
/// Throws RefinementError when consecutive vectors overlap less than the
/// threshold; branch index n is the eigenvalue rank at the first grid point.
template <ParametricFamily Op>
BranchSet track_branches(const Op& op, const std::vector<double>& grid, const TrackOptions& opts = {}) {
  validate_grid(grid, op.domain());
  const Index k = std::min<Index>(opts.max_branches.value_or(op.dim()), op.dim());
  if (k < 1) throw InputError("track_branches: max_branches must be positive");

  BranchSet out;
  out.branches.resize(static_cast<std::size_t>(k));
  Eigenpairs first = eigenpairs_at(op, grid.front(), k);
  Matrix vecs = first.vectors;
  Vector vals = first.values;
  for (Index i = 0; i < k; ++i) {
    auto& b = out.branches[static_cast<std::size_t>(i)];
    b.index = i;
    b.samples.reserve(grid.size());
    b.samples.push_back({grid.front(), vals(i), vecs.col(i)});
  }
  for (std::size_t s = 1; s < grid.size(); ++s) {
    Eigenpairs next = eigenpairs_at(op, grid[s], k);
    const auto match = detail::match_eigenpairs(vecs, vals, next, opts.degeneracy_tol);
    Matrix new_vecs(vecs.rows(), k);
    Vector new_vals(k);
    for (Index i = 0; i < k; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      const Index j = match.target[iu];
      Vector v = next.vectors.col(j);
      if (v.dot(vecs.col(i)) < 0.0) v = -v;
      const double cert = match.certificate[iu];
      if (cert < opts.overlap_threshold)
        throw RefinementError(grid[s - 1], grid[s], static_cast<long>(i), cert);
      if (match.cluster_size[iu] > 1) out.degenerate_steps.push_back({grid[s], i, match.cluster_size[iu]});
      auto& b = out.branches[iu];
      b.min_overlap = std::min(b.min_overlap, cert);
      b.samples.push_back({grid[s], next.values(j), v});
      new_vecs.col(i) = v;
      new_vals(i) = next.values(j);
    }
    vecs = std::move(new_vecs);
    vals = std::move(new_vals);
  }
  return out;
}

struct FixedPointSolution {
  Index branch = 0;  // n
  Index root = 0;    // i, roots of one branch ordered by energy
  double energy = 0.0;
  Vector vector;  // unit norm, first non-negligible component positive
  double residual = 0.0;  // ||H(E) phi - E phi||
  bool at_boundary = false;
};

struct FixedPointOptions {
  double fp_tol = 1e-10;
  int bisection_iterations = 30;
  int max_secant_iterations = 60;
  TrackOptions tracking{};
};

struct FixedPointSet {
  std::vector<FixedPointSolution> solutions;
  std::vector<DegenerateStep> degenerate_steps;
  std::vector<std::string> warnings;
  Index branches = 0;
};

namespace detail {

/// Eigenpair of the branch continuing `reference` at z.
template <ParametricFamily Op>
std::pair<double, Vector> follow(const Op& op, double z, Index k, const Vector& reference) {
  Eigenpairs ep = eigenpairs_at(op, z, k);
  Index best = 0;
  double best_ov = -1.0;
  for (Index j = 0; j < ep.values.size(); ++j) {
    const double ov = std::abs(reference.dot(ep.vectors.col(j)));
    if (ov > best_ov + 1e-12) {
      best_ov = ov;
      best = j;
    }
  }
  Vector v = ep.vectors.col(best);
  if (v.dot(reference) < 0.0) v = -v;
  return {ep.values(best), std::move(v)};
}

/// Bisection followed by safeguarded secant steps on g(z) = E_n(z) - z inside
/// a sign-changing bracket.
template <ParametricFamily Op>
std::pair<double, Vector> polish_root(const Op& op, Index k, double a, double ga, Vector va, double b,
                                      double gb, Vector vb, const FixedPointOptions& opts, Index branch = -1) {
  const double a0 = a;
  const double b0 = b;
  auto converged = [&](double g) { return std::abs(g) <= opts.fp_tol; };
  for (int it = 0; it < opts.bisection_iterations; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    const Vector& ref = (mid - a <= b - mid) ? va : vb;
    auto [val, v] = follow(op, mid, k, ref);
    const double g = val - mid;
    if (g == 0.0) return {mid, v};
    if ((g > 0.0) == (ga > 0.0)) {
      a = mid;
      ga = g;
      va = std::move(v);
    } else {
      b = mid;
      gb = g;
      vb = std::move(v);
    }
  }
  // Illinois variant of false position: an endpoint kept twice in a row has
  // its function value halved, which stops one-sided stagnation.
  int side = 0;
  for (int it = 0; it < opts.max_secant_iterations; ++it) {
    if (converged(ga) && std::abs(ga) <= std::abs(gb)) return {a, va};
    if (converged(gb)) return {b, vb};
    double z = b - gb * (b - a) / (gb - ga);
    if (!(z > a && z < b)) z = 0.5 * (a + b);
    if (z <= a || z >= b) break;  // bracket collapsed to adjacent doubles
    const Vector& ref = (z - a <= b - z) ? va : vb;
    auto [val, v] = follow(op, z, k, ref);
    const double g = val - z;
    if (g == 0.0) return {z, v};
    if ((g > 0.0) == (ga > 0.0)) {
      a = z;
      ga = g;
      va = std::move(v);
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      b = z;
      gb = g;
      vb = std::move(v);
      if (side == 1) ga *= 0.5;
      side = 1;
    }
  }
  for (int it = 0; it < 80; ++it) {
    if (converged(ga) || converged(gb)) break;
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    const Vector& ref = (mid - a <= b - mid) ? va : vb;
    auto [val, v] = follow(op, mid, k, ref);
    const double g = val - mid;
    if ((g > 0.0) == (ga > 0.0)) {
      a = mid;
      ga = g;
      va = std::move(v);
    } else {
      b = mid;
      gb = g;
      vb = std::move(v);
    }
  }
  // A bracket that collapses while |g| stays large straddles a jump of the
  // followed eigenpair (an unresolved avoided crossing), not a root.
  const double best = std::min(std::abs(ga), std::abs(gb));
  if (best > std::max(opts.fp_tol, 1e-8 * (1.0 + std::abs(a))))
    throw RefinementError(a0, b0, static_cast<long>(branch), 0.0);
  return std::abs(ga) <= std::abs(gb) ? std::pair{a, va} : std::pair{b, vb};
}

}  // namespace detail

/// All roots of E_n(z) = z on the grid, for every tracked branch n. Each root
/// is bracketed by a sign change of g_n on the grid (or an exact grid zero),
/// polished, and its eigenvector recomputed at the converged energy.
/// Branches without roots contribute nothing; an empty result is not an error.
template <ParametricFamily Op>
FixedPointSet find_fixed_points(const Op& op, const std::vector<double>& grid,
                                const FixedPointOptions& opts = {}) {
  if (!(opts.fp_tol > 0.0)) throw InputError("fp_tol must be positive");
  BranchSet set = track_branches(op, grid, opts.tracking);
  const Index k = static_cast<Index>(set.branches.size());
  FixedPointSet out;
  out.branches = k;
  out.degenerate_steps = set.degenerate_steps;

  for (const auto& branch : set.branches) {
    std::vector<FixedPointSolution> roots;
    const auto& s = branch.samples;
    const std::size_t n = s.size();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = s[i].value - s[i].z;
    auto is_zero = [&](std::size_t i) { return std::abs(g[i]) <= opts.fp_tol; };

    auto emit = [&](double z, Vector v, bool boundary) {
      auto [val, vec] = detail::follow(op, z, k, v);
      (void)val;
      apply_sign_convention(vec);
      FixedPointSolution sol;
      sol.branch = branch.index;
      sol.energy = z;
      sol.vector = std::move(vec);
      const Matrix h = op.evaluate(z);
      sol.residual = (h * sol.vector - z * sol.vector).norm();
      sol.at_boundary = boundary;
      roots.push_back(std::move(sol));
    };

    for (std::size_t i = 0; i < n; ++i) {
      if (is_zero(i)) {
        if (i > 0 && is_zero(i - 1)) continue;
        const bool boundary = (i == 0 || i + 1 == n);
        emit(s[i].z, s[i].vector, boundary);
        if (boundary)
          out.warnings.push_back("root of branch " + std::to_string(branch.index) +
                                 " at grid boundary z = " + std::to_string(s[i].z));
        continue;
      }
      if (i + 1 < n && !is_zero(i + 1) && (g[i] > 0.0) != (g[i + 1] > 0.0)) {
        auto [z, v] = detail::polish_root(op, k, s[i].z, g[i], s[i].vector, s[i + 1].z, g[i + 1],
                                          s[i + 1].vector, opts, branch.index);
        emit(z, std::move(v), false);
      }
    }
    std::sort(roots.begin(), roots.end(),
              [](const auto& a, const auto& b) { return a.energy < b.energy; });
    for (std::size_t r = 0; r < roots.size(); ++r) {
      roots[r].root = static_cast<Index>(r);
      out.solutions.push_back(std::move(roots[r]));
    }
  }
  return out;
}

/// find_fixed_points with automatic grid refinement: every RefinementError
/// inserts midpoints into the offending sub-interval (up to max_refinements).
template <ParametricFamily Op>
FixedPointSet find_fixed_points_refining(const Op& op, std::vector<double> grid,
                                         const FixedPointOptions& opts = {}, int max_refinements = 12) {
  for (int attempt = 0;; ++attempt) {
    try {
      return find_fixed_points(op, grid, opts);
    } catch (const RefinementError& e) {
      if (attempt >= max_refinements) throw;
      std::vector<double> refined;
      refined.reserve(grid.size() + 4);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        refined.push_back(grid[i]);
        if (i + 1 < grid.size() && grid[i] >= e.z_lo && grid[i + 1] <= e.z_hi) {
          const double h = grid[i + 1] - grid[i];
          for (int q = 1; q < 4; ++q) refined.push_back(grid[i] + h * q / 4.0);
        }
      }
      if (refined.size() == grid.size()) throw;
      grid = std::move(refined);
    }
  }
}

}  // namespace edham
