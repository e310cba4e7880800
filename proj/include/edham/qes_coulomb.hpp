#pragma once

// Quasi-exactly solvable shifted oscillator with a Coulomb term,
//
//   [-d^2/dr^2 + l(l+1)/r^2 + F/r + f r + r^2] psi = E psi.
//
// With psi = r^(l+1) exp(-r^2/2 - f r/2) P_N(r) the Taylor coefficients of
// P_N obey
//
//   -(k+1)(k+2l+2) c_{k+1} + [f(k+l+1) + F] c_k + 2(k-N-1) c_{k-1} = 0
//
// once E = 2N + 2l + 3 - f^2/4 (the top-order condition). Termination at
// degree N turns the remaining conditions into an eigenproblem for F: the
// admissible charges are the eigenvalues of the tridiagonal charge matrix.

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <string>
#include <vector>

#include "edham/errors.hpp"
#include "edham/linalg.hpp"
#include "edham/oracle.hpp"

namespace edham {

struct HautotModel {
  int ell = 0;
  double f = 0.0;  // slope of the linear term
};

inline void validate(const HautotModel& m) {
  if (m.ell < 0) throw InputError("HautotModel: ell must be non-negative");
  if (!std::isfinite(m.f) || std::abs(m.f) > 50.0) throw InputError("HautotModel: |f| must be <= 50");
}

/// E_N = 2N + 2l + 3 - f^2/4, independent of the charge index.
inline double qes_energy(int N, const HautotModel& m) {
  validate(m);
  if (N < 0) throw InputError("qes_energy: N must be non-negative");
  return 2.0 * N + 2.0 * m.ell + 3.0 - m.f * m.f / 4.0;
}

/// Tridiagonal matrix whose eigenvalues are the QES charges F_{N,j}:
/// diagonal -f(k+l+1), superdiagonal (k+1)(k+2l+2), subdiagonal 2(N+1-k).
inline Matrix charge_matrix(int N, const HautotModel& m) {
  validate(m);
  if (N < 0) throw InputError("charge_matrix: N must be non-negative");
  const int n = N + 1;
  Matrix M = Matrix::Zero(n, n);
  for (int k = 0; k <= N; ++k) {
    M(k, k) = -m.f * (k + m.ell + 1);
    if (k < N) M(k, k + 1) = static_cast<double>((k + 1) * (k + 2 * m.ell + 2));
    if (k > 0) M(k, k - 1) = 2.0 * (N + 1 - k);
  }
  return M;
}

namespace detail {

/// Eigen-decomposition of a tridiagonal matrix with positive products of
/// paired off-diagonals through its symmetric similarity transform
/// S = D^-1 M D. Returns ascending eigenvalues and eigenvectors of M.
inline Eigenpairs positive_tridiagonal_eigen(const Matrix& M) {
  const Index n = M.rows();
  Vector diag = M.diagonal();
  Vector off(std::max<Index>(n - 1, 0));
  Vector D = Vector::Ones(n);
  for (Index k = 0; k + 1 < n; ++k) {
    const double prod = M(k, k + 1) * M(k + 1, k);
    if (!(prod > 0.0)) throw NumericError("tridiagonal similarity needs positive off-diagonal products");
    off(k) = std::sqrt(prod);
    D(k + 1) = D(k) * off(k) / M(k, k + 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericError("tridiagonal eigensolver did not converge");
  Matrix vecs = D.asDiagonal() * es.eigenvectors();
  return {es.eigenvalues(), vecs};
}

inline double poly_eval(const Vector& c, double x) {
  double acc = 0.0;
  for (Index k = c.size() - 1; k >= 0; --k) acc = acc * x + c(k);
  return acc;
}

/// Number of distinct positive real roots of sum c_k x^k.
inline int positive_roots(const Vector& c) {
  Index deg = c.size() - 1;
  while (deg > 0 && c(deg) == 0.0) --deg;
  if (deg < 1) return 0;
  Matrix companion = Matrix::Zero(deg, deg);
  for (Index i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (Index i = 0; i < deg; ++i) companion(i, deg - 1) = -c(i) / c(deg);
  int count = 0;
  for (auto z : general_eigenvalues(companion))
    if (z.real() > 0.0 && std::abs(z.imag()) <= 1e-7 * (1.0 + std::abs(z.real()))) ++count;
  return count;
}

/// max_k |((M - lambda) c)_k| / max|c|.
inline double null_residual(const Matrix& M, double lambda, const Vector& c) {
  const Vector r = M * c - lambda * c;
  return r.cwiseAbs().maxCoeff() / c.cwiseAbs().maxCoeff();
}

/// Null vector of M - lambda: the forward three-term recurrence from c_0 = 1
/// and the eigenvector of the symmetric similarity; the smaller residual wins.
inline Vector tridiagonal_null_vector(const Matrix& M, double lambda, const Vector& similarity_vector) {
  const Index n = M.rows();
  Vector rec = Vector::Zero(n);
  rec(0) = 1.0;
  for (Index k = 0; k + 1 < n; ++k) {
    double v = (lambda - M(k, k)) * rec(k);
    if (k > 0) v -= M(k, k - 1) * rec(k - 1);
    rec(k + 1) = v / M(k, k + 1);
  }
  if (!rec.allFinite()) return similarity_vector;
  return null_residual(M, lambda, rec) <= null_residual(M, lambda, similarity_vector) ? rec : similarity_vector;
}

}  // namespace detail

/// Admissible charges F_{N,0} < ... < F_{N,N}.
inline std::vector<double> qes_charges(int N, const HautotModel& m) {
  const Matrix M = charge_matrix(N, m);
  if (N == 0) return {M(0, 0)};
  const auto ep = detail::positive_tridiagonal_eigen(M);
  return {ep.values.data(), ep.values.data() + ep.values.size()};
}

// ---------------------------------------------------------------------------
// Moments I_m = int_0^inf r^m exp(-r^2 - f r) dr

struct MomentTable {
  double f = 0.0;
  std::vector<double> I;
  /// "forward", "backward" (Miller) or "quadrature" (cancellation fallback).
  std::string method;
  std::vector<std::string> warnings;

  int m_max() const { return static_cast<int>(I.size()) - 1; }
  double operator[](int m) const { return I.at(static_cast<std::size_t>(m)); }
};

inline double moment_quadrature(double f, int m) {
  auto g = [f, m](double r) { return std::pow(r, m) * std::exp(-r * r - f * r); };
  return oracle::quad(g, 1e-14).value;
}

/// Analytic moments: I_0 = (sqrt(pi)/2) e^{f^2/4} erfc(f/2),
/// I_1 = (1 - f I_0)/2 and 2 I_{m+1} = m I_{m-1} - f I_m.
/// For f > 0.75 the forward recurrence loses digits, so the same relation is
/// run downward (Miller) from a deep start and normalized to I_0. Every value
/// is checked against quadrature; disagreement beyond 1e-8 switches the whole
/// table to quadrature with a warning.
inline MomentTable moments(double f, int m_max) {
  if (m_max < 1) throw InputError("moments: m_max must be >= 1");
  if (!std::isfinite(f) || std::abs(f) > 50.0) throw InputError("moments: |f| must be <= 50");
  MomentTable t;
  t.f = f;
  t.I.assign(static_cast<std::size_t>(m_max) + 1, 0.0);
  const double i0 = 0.5 * std::sqrt(std::numbers::pi) * std::exp(f * f / 4.0) * std::erfc(f / 2.0);
  if (f <= 0.75) {
    t.method = "forward";
    t.I[0] = i0;
    t.I[1] = 0.5 * (1.0 - f * i0);
    for (int m = 1; m < m_max; ++m)
      t.I[static_cast<std::size_t>(m) + 1] = 0.5 * (m * t.I[static_cast<std::size_t>(m) - 1] - f * t.I[static_cast<std::size_t>(m)]);
  } else {
    t.method = "backward";
    const int depth = std::max(40, static_cast<int>(std::ceil((60.0 / f) * (60.0 / f))));
    const int top = m_max + depth;
    std::vector<double> v(static_cast<std::size_t>(top) + 2, 0.0);
    v[static_cast<std::size_t>(top)] = 1.0;
    for (int m = top; m >= 1; --m) {
      const auto mu = static_cast<std::size_t>(m);
      v[mu - 1] = (2.0 * v[mu + 1] + f * v[mu]) / m;
      if (v[mu - 1] < 1e-200) {
        for (auto& x : v) x *= 1e200;
      }
    }
    const double s = i0 / v[0];
    for (int m = 0; m <= m_max; ++m) t.I[static_cast<std::size_t>(m)] = v[static_cast<std::size_t>(m)] * s;
  }
  double worst = 0.0;
  for (int m = 0; m <= m_max; ++m) {
    const double q = moment_quadrature(f, m);
    worst = std::max(worst, std::abs(t.I[static_cast<std::size_t>(m)] - q) / q);
  }
  if (!(worst <= 1e-8)) {
    t.warnings.push_back("moment recurrence lost precision (rel. error " + std::to_string(worst) +
                         "); using quadrature");
    t.method = "quadrature";
    for (int m = 0; m <= m_max; ++m) t.I[static_cast<std::size_t>(m)] = moment_quadrature(f, m);
  }
  return t;
}

/// Process-wide memo of moment tables keyed by f; tables grow on demand.
/// Concurrent readers share the lock.
class MomentCache {
 public:
  static MomentCache& instance() {
    static MomentCache cache;
    return cache;
  }

  std::shared_ptr<const MomentTable> get(double f, int m_max) {
    const auto key = std::bit_cast<std::uint64_t>(f);
    {
      std::shared_lock lock(mutex_);
      auto it = tables_.find(key);
      if (it != tables_.end() && it->second->m_max() >= m_max) return it->second;
    }
    auto table = std::make_shared<const MomentTable>(moments(f, std::max(m_max, 64)));
    std::unique_lock lock(mutex_);
    auto& slot = tables_[key];
    if (!slot || slot->m_max() < table->m_max()) slot = table;
    return slot;
  }

 private:
  std::shared_mutex mutex_;
  std::map<std::uint64_t, std::shared_ptr<const MomentTable>> tables_;
};

// ---------------------------------------------------------------------------
// Levels

struct QESLevel {
  int N = 0;
  int j = 0;
  double energy = 0.0;
  double charge = 0.0;
  /// Polynomial coefficients in r, normalized so <psi|psi> = 1 with weight
  /// r^(2l+2) exp(-r^2 - f r); leading coefficient positive.
  Vector coeffs;
  /// Norm of the polynomial before normalization (scaled to c_N = 1).
  double norm = 1.0;
  double recurrence_residual = 0.0;
  int nodes = 0;
};

/// sum_{p,q} a_p b_q I_{offset+p+q}.
inline double moment_form(const Vector& a, const Vector& b, int offset, double f) {
  const int need = offset + static_cast<int>(a.size() + b.size()) - 2;
  const auto table = MomentCache::instance().get(f, need);
  double s = 0.0;
  for (Index p = 0; p < a.size(); ++p)
    for (Index q = 0; q < b.size(); ++q) s += a(p) * b(q) * (*table)[offset + static_cast<int>(p + q)];
  return s;
}

inline QESLevel wavefunction_coeffs(int N, int j, const HautotModel& m) {
  if (j < 0 || j > N) throw InputError("wavefunction_coeffs: need 0 <= j <= N");
  const Matrix M = charge_matrix(N, m);
  QESLevel lv;
  lv.N = N;
  lv.j = j;
  lv.energy = qes_energy(N, m);
  Vector c;
  if (N == 0) {
    lv.charge = M(0, 0);
    c = Vector::Ones(1);
  } else {
    const auto ep = detail::positive_tridiagonal_eigen(M);
    const double scale = std::max(1.0, ep.values.cwiseAbs().maxCoeff());
    for (Index k = 0; k + 1 < ep.values.size(); ++k)
      if (ep.values(k + 1) - ep.values(k) < 1e-10 * scale)
        throw DegenerateChargeError("wavefunction_coeffs: repeated charge at N = " + std::to_string(N));
    lv.charge = ep.values(j);
    c = detail::tridiagonal_null_vector(M, lv.charge, ep.vectors.col(j));
  }
  c /= c(N);
  lv.recurrence_residual = detail::null_residual(M, lv.charge, c) * c.cwiseAbs().maxCoeff();
  lv.norm = std::sqrt(moment_form(c, c, 2 * m.ell + 2, m.f));
  c /= lv.norm;
  lv.recurrence_residual /= lv.norm;
  lv.coeffs = std::move(c);
  lv.nodes = detail::positive_roots(lv.coeffs);
  return lv;
}

inline std::vector<QESLevel> qes_levels(int N, const HautotModel& m) {
  std::vector<QESLevel> out;
  for (int j = 0; j <= N; ++j) out.push_back(wavefunction_coeffs(N, j, m));
  return out;
}

/// psi(r) = r^(l+1) exp(-r^2/2 - f r/2) P(r).
inline double wavefunction(const QESLevel& lv, const HautotModel& m, double r) {
  return std::pow(r, m.ell + 1) * std::exp(-0.5 * r * r - 0.5 * m.f * r) * detail::poly_eval(lv.coeffs, r);
}

/// <A|B> from moments.
inline double overlap(const QESLevel& a, const QESLevel& b, const HautotModel& m) {
  return moment_form(a.coeffs, b.coeffs, 2 * m.ell + 2, m.f);
}

/// w_{N,j} = <N,j|1/r|N,j> from moments.
inline double coulomb_diagonal(const QESLevel& lv, const HautotModel& m) {
  return moment_form(lv.coeffs, lv.coeffs, 2 * m.ell + 1, m.f);
}

/// <A|r^power|B> by direct quadrature (power -1 for the Coulomb element).
inline double matrix_element_quadrature(const QESLevel& a, const QESLevel& b, const HautotModel& m, int power) {
  const int exponent = 2 * m.ell + 2 + power;
  auto g = [&](double r) {
    return std::pow(r, exponent) * std::exp(-r * r - m.f * r) * detail::poly_eval(a.coeffs, r) *
           detail::poly_eval(b.coeffs, r);
  };
  return oracle::quad(g, 1e-14, 1e-300).value;
}

/// Coulomb elements W_jk = <N,j|1/r|N,k> of one Sturmian multiplet by
/// quadrature. Different charges at one energy force W to be diagonal;
/// off-diagonal entries above `tol` mean an upstream bug.
inline Matrix sturmian_check(int N, const HautotModel& m, double tol = 1e-9) {
  const auto levels = qes_levels(N, m);
  const int n = N + 1;
  Matrix W(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k) {
      W(j, k) = matrix_element_quadrature(levels[static_cast<std::size_t>(j)], levels[static_cast<std::size_t>(k)], m, -1);
      W(k, j) = W(j, k);
    }
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      if (j != k && std::abs(W(j, k)) > tol)
        throw ModelInconsistency("sturmian_check: <" + std::to_string(j) + "|1/r|" + std::to_string(k) +
                                 "> = " + std::to_string(W(j, k)) + " at N = " + std::to_string(N));
  return W;
}

/// Radial problem for the FD / shooting oracles at charge F.
inline oracle::RadialProblem radial_problem(const HautotModel& m, double charge, Index n_grid = 3000) {
  validate(m);
  const double l = m.ell;
  const double f = m.f;
  oracle::RadialProblem p;
  p.potential = [l, f, charge](double r) { return l * (l + 1.0) / (r * r) + charge / r + f * r + r * r; };
  p.ell = m.ell;
  p.r_max = 9.0;
  p.n_grid = n_grid;
  return p;
}

}  // namespace edham
