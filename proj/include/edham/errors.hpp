#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace edham {

/// Base of every error thrown by the library. `kind()` is a stable tag used by
/// the CLI when it reports failures as JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Bad caller input: malformed matrices, invalid parameters, files.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what, std::string kind = "input")
      : Error(std::move(kind), what) {}
};

/// A numerical procedure failed or produced an untrustworthy answer.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, std::string kind = "numeric")
      : Error(std::move(kind), what) {}
};

/// Branch tracking lost continuity between two grid points; the caller should
/// refine the grid inside [z_lo, z_hi].
class RefinementError : public NumericError {
 public:
  RefinementError(double z_lo, double z_hi, long branch, double overlap)
      : NumericError("branch " + std::to_string(branch) +
                         " lost continuity in [" + std::to_string(z_lo) + ", " +
                         std::to_string(z_hi) + "], overlap " +
                         std::to_string(overlap),
                     "refinement"),
        z_lo(z_lo),
        z_hi(z_hi),
        branch(branch),
        overlap(overlap) {}
  double z_lo;
  double z_hi;
  long branch;
  double overlap;
};

class IllConditionedBasis : public NumericError {
 public:
  IllConditionedBasis(double cond, const std::string& where)
      : NumericError(where + ": ill-conditioned basis, cond = " +
                         std::to_string(cond),
                     "ill_conditioned_basis"),
        cond(cond) {}
  double cond;
};

/// Repeated energies where the construction requires a non-degenerate set.
class DegeneracyError : public InputError {
 public:
  explicit DegeneracyError(const std::string& what)
      : InputError(what, "degeneracy") {}
};

/// Two basis states share a charge, so the orthogonality-type relation can not
/// be solved for the Coulomb matrix element.
class DegenerateChargeError : public NumericError {
 public:
  explicit DegenerateChargeError(const std::string& what)
      : NumericError(what, "degenerate_charge") {}
};

class NearPoleError : public NumericError {
 public:
  NearPoleError(double z, double pole)
      : NumericError("z = " + std::to_string(z) + " within pole guard of " +
                         std::to_string(pole),
                     "near_pole"),
        z(z),
        pole(pole) {}
  double z;
  double pole;
};

class QuadratureError : public NumericError {
 public:
  QuadratureError(const std::string& what, std::vector<std::pair<double, double>> panels)
      : NumericError(what, "quadrature"), panels(std::move(panels)) {}
  /// Panels still above tolerance when the budget ran out.
  std::vector<std::pair<double, double>> panels;
};

/// An identity that must hold exactly for a valid model was violated.
class ModelInconsistency : public NumericError {
 public:
  explicit ModelInconsistency(const std::string& what)
      : NumericError(what, "model_inconsistency") {}
};

}  // namespace edham
