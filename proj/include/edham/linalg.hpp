#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <vector>

#include "edham/errors.hpp"

namespace edham {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigenvalues in ascending order with matching eigenvectors as columns.
struct Eigenpairs {
  Vector values;
  Matrix vectors;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// ||H - H^T||_F / ||H||_F (0 for the zero matrix).
inline double symmetry_defect(const Matrix& h) {
  const double norm = h.norm();
  if (norm == 0.0) return 0.0;
  return (h - h.transpose()).norm() / norm;
}

/// Flips v so that its first non-negligible component is positive.
inline void apply_sign_convention(Vector& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-14 * scale) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

/// Dense symmetric eigensolve. Throws InputError for non-finite or
/// non-symmetric input and NumericError if the iteration fails.
inline Eigenpairs spectral_decompose(const Matrix& h, double symmetry_tol = 1e-13) {
  if (h.rows() != h.cols()) throw InputError("spectral_decompose: matrix not square");
  if (!all_finite(h)) throw InputError("spectral_decompose: non-finite entries");
  if (symmetry_defect(h) > symmetry_tol)
    throw InputError("spectral_decompose: matrix is not symmetric");
  if (h.size() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "spectral_decompose: eigensolver did not converge (dim " << h.rows()
        << ", ||H||_F = " << h.norm() << ")";
    throw NumericError(msg.str());
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Eigenvalues of a general real matrix, sorted by real part then imaginary part.
inline std::vector<std::complex<double>> general_eigenvalues(const Matrix& a) {
  Eigen::EigenSolver<Matrix> solver(a, false);
  if (solver.info() != Eigen::Success)
    throw NumericError("general_eigenvalues: eigensolver did not converge");
  std::vector<std::complex<double>> out(solver.eigenvalues().data(),
                                        solver.eigenvalues().data() + a.rows());
  std::sort(out.begin(), out.end(), [](auto x, auto y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  return out;
}

/// 2-norm condition number of a symmetric positive (semi)definite matrix;
/// +inf when the smallest eigenvalue is not positive.
inline double spd_condition(const Matrix& r) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(r, Eigen::EigenvaluesOnly);
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

/// Symmetric tridiagonal matrix with selective eigen-solves: Sturm-sequence
/// bisection for individual eigenvalues and inverse iteration for vectors.
/// Cost is O(n) per Sturm count, so the lowest few levels of a very large
/// finite-difference Hamiltonian are cheap.
class SymmetricTridiagonal {
 public:
  SymmetricTridiagonal(Vector diag, Vector off) : diag_(std::move(diag)), off_(std::move(off)) {
    if (diag_.size() < 1 || off_.size() != diag_.size() - 1)
      throw InputError("SymmetricTridiagonal: off-diagonal must have n-1 entries");
    if (!diag_.allFinite() || !off_.allFinite())
      throw InputError("SymmetricTridiagonal: non-finite entries");
    off2_ = off_.cwiseAbs2();
    lo_ = std::numeric_limits<double>::infinity();
    hi_ = -lo_;
    const Index n = size();
    for (Index i = 0; i < n; ++i) {
      double radius = 0.0;
      if (i > 0) radius += std::abs(off_(i - 1));
      if (i + 1 < n) radius += std::abs(off_(i));
      lo_ = std::min(lo_, diag_(i) - radius);
      hi_ = std::max(hi_, diag_(i) + radius);
    }
    scale_ = std::max({std::abs(lo_), std::abs(hi_), std::numeric_limits<double>::min()});
  }

  Index size() const { return diag_.size(); }
  const Vector& diagonal() const { return diag_; }
  const Vector& off_diagonal() const { return off_; }

  /// Number of eigenvalues strictly below x.
  Index count_below(double x) const {
    const double tiny = std::numeric_limits<double>::epsilon() * scale_ * 1e-3;
    Index count = 0;
    double q = diag_(0) - x;
    if (q == 0.0) q = -tiny;
    if (q < 0.0) ++count;
    for (Index i = 1; i < size(); ++i) {
      q = (diag_(i) - x) - off2_(i - 1) / q;
      if (q == 0.0) q = -tiny;
      if (q < 0.0) ++count;
    }
    return count;
  }

  /// k-th smallest eigenvalue (0-based) by bisection to full precision.
  double eigenvalue(Index k) const {
    if (k < 0 || k >= size()) throw InputError("SymmetricTridiagonal: eigenvalue index out of range");
    double lo = lo_ - 1e-12 * scale_;
    double hi = hi_ + 1e-12 * scale_;
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (count_below(mid) > k)
        hi = mid;
      else
        lo = mid;
      if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)))
        break;
    }
    return 0.5 * (lo + hi);
  }

  /// Unit eigenvector for an (accurately known) eigenvalue. `previous` holds
  /// already computed vectors of nearby eigenvalues to orthogonalize against.
  Vector eigenvector(double lambda, const std::vector<Vector>& previous = {}) const {
    const Index n = size();
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = 1.0 + 0.1 * std::sin(1.0 + 0.37 * static_cast<double>(i));
    x.normalize();
    const double shift = lambda + 8.0 * std::numeric_limits<double>::epsilon() * scale_;
    for (int it = 0; it < 4; ++it) {
      x = solve_shifted(shift, x);
      for (const auto& p : previous) x -= p.dot(x) * p;
      const double norm = x.norm();
      if (!(norm > 0.0) || !std::isfinite(norm))
        throw NumericError("SymmetricTridiagonal: inverse iteration broke down");
      x /= norm;
    }
    apply_sign_convention(x);
    return x;
  }

  /// Eigenpairs with indices first..first+count-1.
  Eigenpairs range(Index first, Index count) const {
    if (first < 0 || count < 0 || first + count > size())
      throw InputError("SymmetricTridiagonal: eigen range out of bounds");
    Eigenpairs out;
    out.values.resize(count);
    out.vectors.resize(size(), count);
    std::vector<Vector> cluster;
    for (Index k = 0; k < count; ++k) {
      out.values(k) = eigenvalue(first + k);
      if (k > 0 && out.values(k) - out.values(k - 1) > 1e-7 * scale_) cluster.clear();
      Vector v = eigenvector(out.values(k), cluster);
      out.vectors.col(k) = v;
      cluster.push_back(std::move(v));
    }
    return out;
  }

  Eigenpairs lowest(Index count) const { return range(0, count); }

  Vector apply(const Vector& v) const {
    Vector out = diag_.cwiseProduct(v);
    const Index n = size();
    for (Index i = 0; i + 1 < n; ++i) {
      out(i) += off_(i) * v(i + 1);
      out(i + 1) += off_(i) * v(i);
    }
    return out;
  }

  Matrix dense() const {
    Matrix m = Matrix::Zero(size(), size());
    m.diagonal() = diag_;
    for (Index i = 0; i + 1 < size(); ++i) m(i, i + 1) = m(i + 1, i) = off_(i);
    return m;
  }

 private:
  // Solves (T - shift I) x = b by Gaussian elimination with partial pivoting.
  Vector solve_shifted(double shift, const Vector& b) const {
    const Index n = size();
    Vector d = diag_.array() - shift;
    Vector du = off_;  // superdiagonal
    Vector dl = off_;  // subdiagonal
    Vector du2 = Vector::Zero(std::max<Index>(n - 2, 0));
    std::vector<char> swapped(static_cast<std::size_t>(std::max<Index>(n - 1, 0)), 0);
    const double tiny = std::numeric_limits<double>::epsilon() * scale_;
    for (Index i = 0; i + 1 < n; ++i) {
      if (std::abs(d(i)) >= std::abs(dl(i))) {
        if (d(i) == 0.0) d(i) = tiny;
        const double m = dl(i) / d(i);
        dl(i) = m;
        d(i + 1) -= m * du(i);
      } else {
        const double m = d(i) / dl(i);
        d(i) = dl(i);
        dl(i) = m;
        const double tmp = du(i);
        du(i) = d(i + 1);
        d(i + 1) = tmp - m * d(i + 1);
        if (i + 2 < n) {
          du2(i) = du(i + 1);
          du(i + 1) = -m * du(i + 1);
        }
        swapped[static_cast<std::size_t>(i)] = 1;
      }
    }
    if (d(n - 1) == 0.0) d(n - 1) = tiny;
    Vector x = b;
    for (Index i = 0; i + 1 < n; ++i) {
      if (swapped[static_cast<std::size_t>(i)]) {
        const double tmp = x(i);
        x(i) = x(i + 1);
        x(i + 1) = tmp - dl(i) * x(i);
      } else {
        x(i + 1) -= dl(i) * x(i);
      }
    }
    x(n - 1) /= d(n - 1);
    if (n > 1) x(n - 2) = (x(n - 2) - du(n - 2) * x(n - 1)) / d(n - 2);
    for (Index i = n - 3; i >= 0; --i)
      x(i) = (x(i) - du(i) * x(i + 1) - du2(i) * x(i + 2)) / d(i);
    return x;
  }

  Vector diag_;
  Vector off_;
  Vector off2_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double scale_ = 1.0;
};

/// Interior sign changes of a sampled function, ignoring entries below
/// rel_tol * max|v| (tails of decaying eigenvectors).
inline int count_sign_changes(const Vector& v, double rel_tol = 1e-9) {
  const double cut = rel_tol * v.cwiseAbs().maxCoeff();
  int changes = 0;
  int last = 0;
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) <= cut) continue;
    const int s = v(i) > 0 ? 1 : -1;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

}  // namespace edham
