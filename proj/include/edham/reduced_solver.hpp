#pragma once

// Generic-charge problem of the Coulomb QES oscillator in a basis of QES
// states, one per energy E_N. With the basis |A> = |N, j(N)>, N = 0..N_max,
//
//   Z(E, F)_Ab = (F - F_A) <A|1/r|b> - (E - E_A) <A|b>,
//
// and Z(E, F) h = 0 is the projected Schroedinger equation at charge F.
// Subtracting the two ways of evaluating <A|H0|b> gives
//
//   (F_b - F_A) <A|1/r|b> = (E_b - E_A) <A|b>,
//
// so only overlaps and the diagonal elements w_A = <A|1/r|A> are needed.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "edham/errors.hpp"
#include "edham/linalg.hpp"
#include "edham/oracle.hpp"
#include "edham/qes_coulomb.hpp"

namespace edham {

struct BasisSelection {
  int N_max = 0;
  /// pick[N] = j(N), the charge index used for energy E_N.
  std::vector<int> pick;
};

inline void validate(const BasisSelection& s) {
  if (s.N_max < 0) throw InputError("BasisSelection: N_max must be non-negative");
  if (s.pick.size() != static_cast<std::size_t>(s.N_max) + 1)
    throw InputError("BasisSelection: need one pick per N = 0..N_max");
  for (int N = 0; N <= s.N_max; ++N) {
    const int j = s.pick[static_cast<std::size_t>(N)];
    if (j < 0 || j > N) throw InputError("BasisSelection: pick[" + std::to_string(N) + "] out of range");
  }
}

/// Explicit selection from a list of charge indices.
inline BasisSelection explicit_selection(std::vector<int> pick) {
  if (pick.empty()) throw InputError("explicit_selection: empty pick list");
  BasisSelection s{static_cast<int>(pick.size()) - 1, std::move(pick)};
  validate(s);
  return s;
}

/// For each N the charge closest to F_target, skipping charges within
/// min_gap (1 + |F|) of one already chosen. The skip keeps the basis free of
/// repeated charges, e.g. the F = 0 member present for every even N at f = 0.
inline BasisSelection auto_selection(const HautotModel& m, int N_max, double F_target, double min_gap = 1e-3) {
  if (N_max < 0) throw InputError("auto_selection: N_max must be non-negative");
  BasisSelection s;
  s.N_max = N_max;
  std::vector<double> used;
  for (int N = 0; N <= N_max; ++N) {
    const auto charges = qes_charges(N, m);
    std::vector<int> order(charges.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(charges[static_cast<std::size_t>(a)] - F_target) <
             std::abs(charges[static_cast<std::size_t>(b)] - F_target);
    });
    int chosen = order.front();
    for (int j : order) {
      const double F = charges[static_cast<std::size_t>(j)];
      const bool clash = std::any_of(used.begin(), used.end(),
                                     [&](double u) { return std::abs(u - F) <= min_gap * (1.0 + std::abs(F)); });
      if (!clash) {
        chosen = j;
        break;
      }
    }
    s.pick.push_back(chosen);
    used.push_back(charges[static_cast<std::size_t>(chosen)]);
  }
  return s;
}

struct ReducedSystem {
  HautotModel model;
  BasisSelection selection;
  std::vector<QESLevel> levels;
  Matrix R;   // overlaps <A|b>
  Matrix Wt;  // Coulomb elements <A|1/r|b>
  Vector E;   // E_A
  Vector F;   // F_A
  Vector w;   // diagonal Coulomb elements
  double cond_R = 1.0;
  /// max |Wt_Ab - Wt_bA| / max|Wt| with each entry computed from its own row.
  double wt_asymmetry = 0.0;

  Index size() const { return R.rows(); }
  /// The system for the leading N_max' + 1 basis states.
  ReducedSystem truncated(int n_max) const;
};

inline ReducedSystem ReducedSystem::truncated(int n_max) const {
  if (n_max < 0 || n_max > selection.N_max) throw InputError("truncated: N_max out of range");
  const Index n = n_max + 1;
  ReducedSystem t;
  t.model = model;
  t.selection.N_max = n_max;
  t.selection.pick.assign(selection.pick.begin(), selection.pick.begin() + n);
  t.levels.assign(levels.begin(), levels.begin() + n);
  t.R = R.topLeftCorner(n, n);
  t.Wt = Wt.topLeftCorner(n, n);
  t.E = E.head(n);
  t.F = F.head(n);
  t.w = w.head(n);
  t.cond_R = spd_condition(t.R);
  t.wt_asymmetry = wt_asymmetry;
  return t;
}

/// R from overlaps, Wt from the diagonal elements and the subtraction rule.
/// The Gram matrix is only required to be positive definite up to rounding;
/// its condition number grows quickly with N_max and is reported.
inline ReducedSystem assemble(const BasisSelection& sel, const HautotModel& m) {
  validate(sel);
  validate(m);
  ReducedSystem sys;
  sys.model = m;
  sys.selection = sel;
  const Index n = sel.N_max + 1;
  sys.E.resize(n);
  sys.F.resize(n);
  sys.w.resize(n);
  for (int N = 0; N <= sel.N_max; ++N) {
    sys.levels.push_back(wavefunction_coeffs(N, sel.pick[static_cast<std::size_t>(N)], m));
    const auto& lv = sys.levels.back();
    sys.E(N) = lv.energy;
    sys.F(N) = lv.charge;
    sys.w(N) = coulomb_diagonal(lv, m);
  }
  const double f_scale = 1.0 + sys.F.cwiseAbs().maxCoeff();
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b)
      if (std::abs(sys.F(a) - sys.F(b)) <= 1e-10 * f_scale)
        throw DegenerateChargeError("assemble: basis states N = " + std::to_string(a) + " and N = " +
                                    std::to_string(b) + " share the charge " + std::to_string(sys.F(a)));

  sys.R = Matrix::Identity(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b)
      sys.R(a, b) = sys.R(b, a) = overlap(sys.levels[static_cast<std::size_t>(a)],
                                          sys.levels[static_cast<std::size_t>(b)], m);

  sys.Wt.resize(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      sys.Wt(a, b) = a == b ? sys.w(a) : (sys.E(b) - sys.E(a)) / (sys.F(b) - sys.F(a)) * sys.R(a, b);
  const double wt_scale = std::max(1e-300, sys.Wt.cwiseAbs().maxCoeff());
  sys.wt_asymmetry = (sys.Wt - sys.Wt.transpose()).cwiseAbs().maxCoeff() / wt_scale;
  if (sys.wt_asymmetry > 1e-8) throw NumericError("assemble: Coulomb matrix not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> es(sys.R, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo < -1e-12 * hi) throw IllConditionedBasis(std::numeric_limits<double>::infinity(), "assemble: R not positive");
  sys.cond_R = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return sys;
}

/// Z(E, F)_Ab = (F - F_A) Wt_Ab - (E - E_A) R_Ab.
inline Matrix z_matrix(const ReducedSystem& sys, double E, double F) {
  return (F - sys.F.array()).matrix().asDiagonal() * sys.Wt - (E - sys.E.array()).matrix().asDiagonal() * sys.R;
}

struct SolveOptions {
  /// Above this cond(R) the Cholesky reduction is replaced by canonical
  /// orthogonalization (eigenvalues of R below rank_tol * max are dropped).
  double cholesky_cond_limit = 1e10;
  double rank_tol = 1e-12;
  /// Imaginary parts below this (relative) are treated as rounding.
  double real_tol = 1e-9;
  /// Compare against the N_max - 2 truncation.
  bool drift = true;
};

struct GenericSpectrum {
  double F = 0.0;
  std::vector<double> energies;
  /// Coefficient vectors as columns, normalized to h^T R h = 1.
  Matrix h;
  std::vector<std::complex<double>> complex_pairs;
  std::string reduction;  // "cholesky" or "canonical"
  Index rank = 0;
  double cond_R = 1.0;
  /// E_k(N_max) - E_k(N_max - 2) for the levels both runs share.
  std::vector<double> drift;
  /// Basis rows whose charge equals F (the row decouples; E_A is exact).
  std::vector<Index> coincident_rows;
  std::vector<std::string> warnings;
};

namespace detail {

inline GenericSpectrum solve_pencil(const ReducedSystem& sys, double F, const SolveOptions& opts) {
  const Index n = sys.size();
  const Matrix M = (F - sys.F.array()).matrix().asDiagonal() * sys.Wt + sys.E.asDiagonal() * sys.R;
  GenericSpectrum out;
  out.F = F;
  out.cond_R = sys.cond_R;

  // Reduce M h = E R h to A y = E y with h = X y and X^T R X = I.
  Matrix X;
  if (sys.cond_R <= opts.cholesky_cond_limit) {
    Eigen::LLT<Matrix> llt(sys.R);
    if (llt.info() != Eigen::Success) throw IllConditionedBasis(sys.cond_R, "solve_generic: Cholesky failed");
    X = llt.matrixU().solve(Matrix::Identity(n, n));
    out.reduction = "cholesky";
    out.rank = n;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sys.R);
    const Vector& s = es.eigenvalues();
    const double keep = opts.rank_tol * s.maxCoeff();
    std::vector<Index> cols;
    for (Index i = 0; i < n; ++i)
      if (s(i) > keep) cols.push_back(i);
    X.resize(n, static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      X.col(static_cast<Index>(c)) = es.eigenvectors().col(cols[c]) / std::sqrt(s(cols[c]));
    out.reduction = "canonical";
    out.rank = X.cols();
    if (out.rank < n)
      out.warnings.push_back("Gram matrix rank-deficient: dropped " + std::to_string(n - out.rank) + " direction(s)");
  }
  const Matrix A = X.transpose() * M * X;
  Eigen::EigenSolver<Matrix> es(A, true);
  if (es.info() != Eigen::Success) throw NumericError("solve_generic: eigensolver did not converge");

  std::vector<std::pair<double, Vector>> real;
  for (Index i = 0; i < A.rows(); ++i) {
    const auto lambda = es.eigenvalues()(i);
    if (std::abs(lambda.imag()) <= opts.real_tol * (1.0 + std::abs(lambda.real()))) {
      Vector h = X * es.eigenvectors().col(i).real();
      const double norm2 = h.dot(sys.R * h);
      if (!(norm2 > 0.0)) continue;
      h /= std::sqrt(norm2);
      apply_sign_convention(h);
      real.emplace_back(lambda.real(), std::move(h));
    } else if (lambda.imag() > 0.0) {
      out.complex_pairs.push_back(lambda);
    }
  }
  std::sort(real.begin(), real.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  out.h.resize(n, static_cast<Index>(real.size()));
  for (std::size_t i = 0; i < real.size(); ++i) {
    out.energies.push_back(real[i].first);
    out.h.col(static_cast<Index>(i)) = real[i].second;
  }
  std::sort(out.complex_pairs.begin(), out.complex_pairs.end(),
            [](auto a, auto b) { return a.real() < b.real(); });
  if (!out.complex_pairs.empty())
    out.warnings.push_back(std::to_string(out.complex_pairs.size()) + " complex pair(s) from truncation");
  return out;
}

}  // namespace detail

/// Solves Z(E, F) h = 0 as the linear pencil
///   [diag(F - F_A) Wt + diag(E_A) R] h = E R h.
/// A charge equal to some F_A is allowed: that row decouples and E_A is an
/// exact eigenvalue, which is listed in coincident_rows.
inline GenericSpectrum solve_generic(const ReducedSystem& sys, double F, const SolveOptions& opts = {}) {
  if (!std::isfinite(F)) throw InputError("solve_generic: charge must be finite");
  GenericSpectrum out = detail::solve_pencil(sys, F, opts);
  const double f_scale = 1.0 + std::abs(F);
  for (Index a = 0; a < sys.size(); ++a)
    if (std::abs(F - sys.F(a)) <= 1e-12 * f_scale) out.coincident_rows.push_back(a);
  if (opts.drift && sys.selection.N_max >= 2) {
    const auto coarse = detail::solve_pencil(sys.truncated(sys.selection.N_max - 2), F, opts);
    const std::size_t shared = std::min(out.energies.size(), coarse.energies.size());
    for (std::size_t k = 0; k < shared; ++k) out.drift.push_back(out.energies[k] - coarse.energies[k]);
  }
  return out;
}

/// psi(r) = sum_A h_A phi_A(r) for one column of GenericSpectrum::h.
inline double reconstruct(const ReducedSystem& sys, const Vector& h, double r) {
  double acc = 0.0;
  for (Index a = 0; a < sys.size(); ++a) acc += h(a) * wavefunction(sys.levels[static_cast<std::size_t>(a)], sys.model, r);
  return acc;
}

struct TruncationRow {
  int N_max = 0;
  double cond_R = 1.0;
  std::string reduction;
  Index rank = 0;
  std::vector<double> energies;  // lowest `levels`
  std::vector<double> cauchy;    // differences to the previous row
  std::vector<double> oracle_deviation;
  std::size_t complex_pairs = 0;
};

struct TruncationStudy {
  double F = 0.0;
  std::vector<double> oracle;  // extrapolated FD levels
  std::vector<TruncationRow> rows;
  /// |oracle deviation| of the lowest level non-increasing over the last
  /// three rows.
  bool monotone_tail = false;
};

/// Lowest `levels` energies for each truncation in n_max_list, with the basis
/// picked by auto_selection around F (or `pick_target` when given).
inline TruncationStudy truncation_study(const HautotModel& m, double F, std::vector<int> n_max_list, int levels = 3,
                                        bool with_oracle = true, std::optional<double> pick_target = {}) {
  if (n_max_list.size() < 2) throw InputError("truncation_study: need at least two truncations");
  std::sort(n_max_list.begin(), n_max_list.end());
  TruncationStudy st;
  st.F = F;
  if (with_oracle) {
    const auto fd = oracle::fd_spectrum(radial_problem(m, F), levels);
    st.oracle.assign(fd.extrapolated.data(), fd.extrapolated.data() + fd.extrapolated.size());
  }
  const auto full = assemble(auto_selection(m, n_max_list.back(), pick_target.value_or(F)), m);
  SolveOptions opts;
  opts.drift = false;
  for (int n_max : n_max_list) {
    const auto sys = full.truncated(n_max);
    const auto spec = solve_generic(sys, F, opts);
    TruncationRow row;
    row.N_max = n_max;
    row.cond_R = sys.cond_R;
    row.reduction = spec.reduction;
    row.rank = spec.rank;
    row.complex_pairs = spec.complex_pairs.size();
    for (std::size_t k = 0; k < spec.energies.size() && static_cast<int>(k) < levels; ++k)
      row.energies.push_back(spec.energies[k]);
    if (!st.rows.empty()) {
      const auto& prev = st.rows.back().energies;
      for (std::size_t k = 0; k < std::min(prev.size(), row.energies.size()); ++k)
        row.cauchy.push_back(row.energies[k] - prev[k]);
    }
    for (std::size_t k = 0; k < std::min(st.oracle.size(), row.energies.size()); ++k)
      row.oracle_deviation.push_back(row.energies[k] - st.oracle[k]);
    st.rows.push_back(std::move(row));
  }
  if (with_oracle && st.rows.size() >= 2) {
    const std::size_t start = st.rows.size() >= 3 ? st.rows.size() - 3 : 0;
    st.monotone_tail = true;
    for (std::size_t i = start + 1; i < st.rows.size(); ++i) {
      const auto& a = st.rows[i - 1].oracle_deviation;
      const auto& b = st.rows[i].oracle_deviation;
      if (a.empty() || b.empty() || std::abs(b[0]) > std::abs(a[0]) + 1e-12) st.monotone_tail = false;
    }
  }
  return st;
}

}  // namespace edham
