#pragma once

// Non-orthogonal eigenvectors of an energy-dependent family, their dual
// (double-bra) basis, the energy-independent quasi-Hamiltonian K and the
// family of metrics eta that make K pseudo-Hermitian.

#include <algorithm>
#include <cmath>
#include <vector>

#include "edham/core_spectral.hpp"
#include "edham/errors.hpp"
#include "edham/linalg.hpp"

namespace edham {

struct BiorthoOptions {
  double cond_limit = 1e12;
  bool allow_degenerate = false;
  double degeneracy_tol = 1e-9;
};

/// Kets as columns of `kets`, duals as rows of `duals`.
struct BiorthoSystem {
  Matrix kets;
  Vector energies;
  Matrix R;
  Matrix R_inv;
  Matrix duals;
  double cond_R = 1.0;
  bool cholesky = true;  // false when R is not numerically positive definite

  Index dim() const { return kets.rows(); }
  Index size() const { return kets.cols(); }
};

struct QuasiHamiltonian {
  Matrix K;
  Matrix spanned_projector;
  /// ||double-sum form - diagonal double-bra form||_F / max(1, ||K||_F).
  double two_form_gap = 0.0;
};

struct Metric {
  Vector d;
  Matrix eta;
  Matrix eta_inv;
};

/// Groups of indices whose energies are degenerate within `tol`.
inline std::vector<std::vector<Index>> degenerate_clusters(const Vector& e, double tol) {
  std::vector<Index> order(static_cast<std::size_t>(e.size()));
  for (Index i = 0; i < e.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return e(a) < e(b); });
  std::vector<std::vector<Index>> out;
  for (Index idx : order) {
    if (!out.empty()) {
      const Index last = out.back().back();
      if (std::abs(e(idx) - e(last)) < tol * (1.0 + std::abs(e(last)))) {
        out.back().push_back(idx);
        continue;
      }
    }
    out.push_back({idx});
  }
  return out;
}

/// Normalizes the kets, forms the Gram matrix R and the dual basis
/// <<phi_a| = sum_b (R^-1)_ab <phi_b|.
inline BiorthoSystem build_system(Matrix kets, Vector energies, const BiorthoOptions& opts = {}) {
  if (kets.cols() < 1) throw InputError("build_system: need at least one ket");
  if (kets.cols() != energies.size()) throw InputError("build_system: one energy per ket required");
  if (kets.cols() > kets.rows())
    throw IllConditionedBasis(std::numeric_limits<double>::infinity(),
                              "build_system: more kets than dimensions");
  if (!kets.allFinite() || !energies.allFinite()) throw InputError("build_system: non-finite input");
  for (Index a = 0; a < kets.cols(); ++a) {
    const double norm = kets.col(a).norm();
    if (!(norm > 0.0)) throw IllConditionedBasis(std::numeric_limits<double>::infinity(), "build_system: zero ket");
    Vector v = kets.col(a) / norm;
    apply_sign_convention(v);
    kets.col(a) = v;
  }

  BiorthoSystem sys;
  sys.R = kets.transpose() * kets;
  sys.R = 0.5 * (sys.R + sys.R.transpose());
  sys.R.diagonal().setOnes();
  sys.cond_R = spd_condition(sys.R);
  if (!(sys.cond_R <= opts.cond_limit)) throw IllConditionedBasis(sys.cond_R, "build_system");

  if (!opts.allow_degenerate) {
    for (const auto& c : degenerate_clusters(energies, opts.degeneracy_tol))
      if (c.size() > 1)
        throw DegeneracyError("build_system: degenerate energies (E = " + std::to_string(energies(c[0])) +
                              "); set allow_degenerate to accept them");
  }

  // Duals from the thin QR of the kets: their error grows with cond(kets),
  // which is sqrt(cond(R)), rather than with cond(R) as R^-1 <phi| would.
  const Index m = kets.cols();
  Eigen::HouseholderQR<Matrix> qr(kets);
  const Matrix Q = qr.householderQ() * Matrix::Identity(kets.rows(), m);
  const Matrix Rk = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
  sys.duals = Rk.triangularView<Eigen::Upper>().solve(Q.transpose());
  sys.R_inv = sys.duals * sys.duals.transpose();
  sys.cholesky = Eigen::LLT<Matrix>(sys.R).info() == Eigen::Success;
  sys.R_inv = 0.5 * (sys.R_inv + sys.R_inv.transpose());
  sys.kets = std::move(kets);
  sys.energies = std::move(energies);
  return sys;
}

/// K = sum_a |phi_a> E_a <<phi_a|, cross-checked against the double sum
/// sum_ab |phi_a> E_a (R^-1)_ab <phi_b|.
inline QuasiHamiltonian build_K(const BiorthoSystem& sys) {
  QuasiHamiltonian q;
  q.K = sys.kets * sys.energies.asDiagonal() * sys.duals;
  const Matrix double_sum = sys.kets * sys.energies.asDiagonal() * sys.R_inv * sys.kets.transpose();
  q.two_form_gap = (q.K - double_sum).norm() / std::max(1.0, q.K.norm());
  q.spanned_projector = sys.kets * sys.duals;
  return q;
}

/// P = sum_a |phi_a><<phi_a|, the identity on the span of the kets.
inline Matrix completeness_projector(const BiorthoSystem& sys) { return sys.kets * sys.duals; }

/// eta = sum_a |phi_a>> d_a <<phi_a| and eta^-1 = sum_a |phi_a> d_a^-1 <phi_a|.
inline Metric build_metric(const BiorthoSystem& sys, Vector d) {
  if (d.size() == 0) d = Vector::Ones(sys.size());
  if (d.size() != sys.size()) throw InputError("build_metric: one d per ket required");
  for (Index a = 0; a < d.size(); ++a)
    if (d(a) == 0.0 || !std::isfinite(d(a))) throw InputError("build_metric: d values must be finite and nonzero", "invalid_metric");
  Metric m;
  m.eta = sys.duals.transpose() * d.asDiagonal() * sys.duals;
  m.eta = 0.5 * (m.eta + m.eta.transpose());
  m.eta_inv = sys.kets * d.cwiseInverse().asDiagonal() * sys.kets.transpose();
  m.d = std::move(d);
  return m;
}

/// eta from a general coefficient matrix U in the double-bra basis. U must
/// satisfy the commutation constraint with the energies (block diagonal over
/// degenerate clusters), otherwise K would not be pseudo-Hermitian.
inline Matrix metric_from_ansatz(const BiorthoSystem& sys, const Matrix& U, double tol = 1e-12);

/// [E_a U_ab - U_ab E_b]: vanishes iff U only couples equal energies.
inline Matrix metric_ansatz_constraint(const BiorthoSystem& sys, const Matrix& U) {
  if (U.rows() != sys.size() || U.cols() != sys.size())
    throw InputError("metric_ansatz_constraint: U must match the basis size");
  Matrix out(U.rows(), U.cols());
  for (Index a = 0; a < U.rows(); ++a)
    for (Index b = 0; b < U.cols(); ++b) out(a, b) = sys.energies(a) * U(a, b) - U(a, b) * sys.energies(b);
  return out;
}

inline Matrix metric_from_ansatz(const BiorthoSystem& sys, const Matrix& U, double tol) {
  if (symmetry_defect(U) > 1e-13) throw InputError("metric_from_ansatz: U must be symmetric", "invalid_metric");
  const Matrix c = metric_ansatz_constraint(sys, U);
  const double scale = std::max(1.0, U.cwiseAbs().maxCoeff() * sys.energies.cwiseAbs().maxCoeff());
  if (c.cwiseAbs().maxCoeff() > tol * scale)
    throw InputError("metric_from_ansatz: U couples non-degenerate energies", "invalid_metric");
  return sys.duals.transpose() * U * sys.duals;
}

/// ||K^T eta - eta K||_F / max(1, ||eta K||_F).
inline double pseudo_hermiticity_residual(const Matrix& K, const Matrix& eta) {
  if (K.rows() != eta.rows() || K.cols() != eta.cols() || K.rows() != K.cols())
    throw InputError("pseudo_hermiticity_residual: shape mismatch");
  const Matrix etaK = eta * K;
  return (K.transpose() * eta - etaK).norm() / std::max(1.0, etaK.norm());
}

/// M_ba = <phi_b|[H(E_b) - H(E_a)]|phi_a> - (E_b - E_a) R_ba.
template <ParametricFamily Op>
Matrix weak_orthogonality_residual(const Op& family, const BiorthoSystem& sys) {
  if (family.dim() != sys.dim()) throw InputError("weak_orthogonality_residual: dimension mismatch");
  const Index m = sys.size();
  std::vector<Matrix> h;
  h.reserve(static_cast<std::size_t>(m));
  for (Index a = 0; a < m; ++a) h.push_back(family.evaluate(sys.energies(a)));
  Matrix out = Matrix::Zero(m, m);
  for (Index b = 0; b < m; ++b)
    for (Index a = 0; a < m; ++a) {
      if (a == b) continue;
      const auto ia = static_cast<std::size_t>(a);
      const auto ib = static_cast<std::size_t>(b);
      const double lhs = sys.kets.col(b).dot((h[ib] - h[ia]) * sys.kets.col(a));
      out(b, a) = lhs - (sys.energies(b) - sys.energies(a)) * sys.R(b, a);
    }
  return out;
}

struct Proportionality {
  /// c_a with <phi_a| eta = c_a <<phi_a|.
  std::vector<double> constants;
  /// Largest 1 - |cos angle| between the two row vectors.
  double max_angle_defect = 0.0;
};

/// Checks that <phi_a| eta is parallel to the dual row <<phi_a| and returns
/// the proportionality constants.
inline Proportionality dual_vs_metric_proportionality(const BiorthoSystem& sys, const Metric& metric) {
  Proportionality out;
  for (Index a = 0; a < sys.size(); ++a) {
    // eta applied in factored form; the assembled eta carries cond(R) and
    // would cost relative accuracy on rows with small duals.
    const Vector coords = sys.duals * sys.kets.col(a);
    const Vector row = sys.duals.transpose() * (metric.d.asDiagonal() * coords);
    const Vector dual = sys.duals.row(a).transpose();
    const double nd = dual.norm();
    const double nr = row.norm();
    if (!(nd > 0.0) || !(nr > 0.0)) throw NumericError("dual_vs_metric_proportionality: zero vector");
    const double dot = row.dot(dual);
    // Once the rows are parallel, c_a = <phi_a|eta|phi_a> / <<phi_a|phi_a>;
    // this is second order in the biorthogonality defect, unlike dot / nd^2.
    out.constants.push_back(coords.dot(metric.d.asDiagonal() * coords) / coords(a));
    out.max_angle_defect = std::max(out.max_angle_defect, 1.0 - std::abs(dot) / (nd * nr));
  }
  return out;
}

/// Orthonormal basis of the span of the kets.
inline Matrix span_basis(const BiorthoSystem& sys) {
  Eigen::HouseholderQR<Matrix> qr(sys.kets);
  return qr.householderQ() * Matrix::Identity(sys.dim(), sys.size());
}

/// Eigenvalues of K restricted to the span of the kets (real parts, ascending).
inline std::vector<double> spanned_spectrum(const Matrix& K, const BiorthoSystem& sys) {
  const Matrix Q = span_basis(sys);
  const auto ev = general_eigenvalues(Q.transpose() * K * Q);
  std::vector<double> out;
  for (auto z : ev) out.push_back(z.real());
  return out;
}

/// ||X - X^T|| / ||X|| for X = eta^{1/2} K eta^{-1/2} restricted to the span
/// (requires every d_a > 0).
inline double hermitian_similarity_residual(const Matrix& K, const Metric& metric, const BiorthoSystem& sys) {
  for (Index a = 0; a < metric.d.size(); ++a)
    if (!(metric.d(a) > 0.0)) throw InputError("hermitian_similarity_residual: needs positive d", "invalid_metric");
  const Matrix Q = span_basis(sys);
  const Matrix eta_s = Q.transpose() * metric.eta * Q;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (eta_s + eta_s.transpose()));
  const Vector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix root = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
  const Matrix inv_root = es.eigenvectors() * s.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const Matrix X = root * (Q.transpose() * K * Q) * inv_root;
  return (X - X.transpose()).norm() / std::max(1e-300, X.norm());
}

struct AuditReport {
  /// max |<<phi_a|phi_b> - delta_ab|
  double biorthogonality = 0.0;
  /// max_a ||K phi_a - E_a phi_a|| / max(1, max|E|)
  double k_eigenrelation = 0.0;
  /// ||P^2 - P||_F / max(1, ||P||_F)
  double completeness = 0.0;
  double pseudo_hermiticity = 0.0;
  /// Largest angle defect and relative constant mismatch of <phi_a| eta = d_a <<phi_a|.
  double proportionality_angle = 0.0;
  double proportionality_constant = 0.0;
  double two_form_gap = 0.0;
  std::vector<double> constants;

  double worst() const {
    return std::max({biorthogonality, k_eigenrelation, completeness, pseudo_hermiticity, proportionality_angle,
                     proportionality_constant, two_form_gap});
  }
};

inline AuditReport audit(const BiorthoSystem& sys, const QuasiHamiltonian& q, const Metric& metric) {
  AuditReport r;
  const Index m = sys.size();
  r.biorthogonality = (sys.duals * sys.kets - Matrix::Identity(m, m)).cwiseAbs().maxCoeff();
  const double e_scale = std::max(1.0, sys.energies.cwiseAbs().maxCoeff());
  for (Index a = 0; a < m; ++a)
    r.k_eigenrelation = std::max(
        r.k_eigenrelation, (q.K * sys.kets.col(a) - sys.energies(a) * sys.kets.col(a)).norm() / e_scale);
  const Matrix& P = q.spanned_projector;
  r.completeness = (P * P - P).norm() / std::max(1.0, P.norm());
  r.pseudo_hermiticity = pseudo_hermiticity_residual(q.K, metric.eta);
  const auto prop = dual_vs_metric_proportionality(sys, metric);
  r.proportionality_angle = prop.max_angle_defect;
  for (Index a = 0; a < m; ++a) {
    const double c = prop.constants[static_cast<std::size_t>(a)];
    r.proportionality_constant = std::max(r.proportionality_constant, std::abs(c - metric.d(a)) / std::abs(metric.d(a)));
  }
  r.constants = prop.constants;
  r.two_form_gap = q.two_form_gap;
  return r;
}

}  // namespace edham
