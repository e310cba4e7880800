#include <gtest/gtest.h>

#include <cmath>

#include "edham/reduced_solver.hpp"

using namespace edham;

TEST(BasisSelection, ExplicitValidation) {
  EXPECT_NO_THROW(explicit_selection({0, 1, 2}));
  EXPECT_THROW(explicit_selection({0, 2}), InputError);
  EXPECT_THROW(explicit_selection({}), InputError);
  EXPECT_THROW(explicit_selection({-1}), InputError);
}

TEST(BasisSelection, AutoSelectionAvoidsRepeatedCharges) {
  // At f = 0 the charge 0 occurs for every even N; it must be used once.
  const HautotModel m{0, 0.0};
  const auto sel = auto_selection(m, 8, 0.0);
  std::vector<double> F;
  for (int N = 0; N <= 8; ++N) F.push_back(qes_charges(N, m)[static_cast<std::size_t>(sel.pick[static_cast<std::size_t>(N)])]);
  for (std::size_t a = 0; a < F.size(); ++a)
    for (std::size_t b = a + 1; b < F.size(); ++b) EXPECT_GT(std::abs(F[a] - F[b]), 1e-3);
}

TEST(Assemble, RepeatedChargeIsRejected) {
  const HautotModel m{0, 0.0};
  // j = 0 at N = 0 and j = 1 at N = 2 both carry F = 0.
  EXPECT_THROW(assemble(explicit_selection({0, 0, 1}), m), DegenerateChargeError);
}

TEST(Assemble, OverlapAndCoulombMatricesAreSymmetric) {
  const HautotModel m{1, 0.5};
  const auto sys = assemble(auto_selection(m, 6, 1.0), m);
  EXPECT_LT(symmetry_defect(sys.R), 1e-14);
  EXPECT_LT(sys.wt_asymmetry, 1e-10);
  for (Index a = 0; a < sys.size(); ++a) EXPECT_DOUBLE_EQ(sys.R(a, a), 1.0);
  EXPECT_GE(sys.cond_R, 1.0);
}

TEST(Assemble, CoulombElementsMatchQuadrature) {
  const HautotModel m{0, 1.0};
  const auto sys = assemble(auto_selection(m, 5, -1.0), m);
  for (Index a = 0; a < sys.size(); ++a)
    for (Index b = 0; b < sys.size(); ++b) {
      const double q = matrix_element_quadrature(sys.levels[static_cast<std::size_t>(a)],
                                                 sys.levels[static_cast<std::size_t>(b)], m, -1);
      EXPECT_NEAR(sys.Wt(a, b), q, 1e-9 * std::max(1.0, std::abs(q)));
    }
}

TEST(SolveGeneric, ExactAtBasisCharge) {
  const HautotModel m{0, 0.0};
  const auto sys = assemble(auto_selection(m, 8, 0.5), m);
  for (Index a = 0; a < sys.size(); ++a) {
    const auto spec = solve_generic(sys, sys.F(a));
    double best = 1e300;
    for (double e : spec.energies) best = std::min(best, std::abs(e - sys.E(a)));
    EXPECT_LT(best, 1e-8) << a;
    ASSERT_FALSE(spec.coincident_rows.empty());
    EXPECT_EQ(spec.coincident_rows.front(), a);
  }
}

TEST(SolveGeneric, LowLevelsAgreeWithOracle) {
  const HautotModel m{0, 0.0};
  const auto sys = assemble(auto_selection(m, 12, 0.5), m);
  const auto spec = solve_generic(sys, 0.5);
  const auto fd = oracle::fd_spectrum(radial_problem(m, 0.5), 3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(spec.energies[k], fd.extrapolated[k], 1e-6);
  EXPECT_TRUE(spec.complex_pairs.empty());
}

TEST(SolveGeneric, EigenvectorsAreRNormalized) {
  const HautotModel m{0, 0.0};
  const auto sys = assemble(auto_selection(m, 6, 0.5), m);
  const auto spec = solve_generic(sys, 0.5);
  for (Index k = 0; k < spec.h.cols(); ++k) {
    const Vector h = spec.h.col(k);
    EXPECT_NEAR(h.dot(sys.R * h), 1.0, 1e-8);
    const double E = spec.energies[static_cast<std::size_t>(k)];
    EXPECT_LT((z_matrix(sys, E, 0.5) * h).norm(), 1e-7 * std::max(1.0, std::abs(E)));
  }
}

TEST(SolveGeneric, PencilResidualVanishes) {
  const HautotModel m{1, 0.3};
  const auto sys = assemble(auto_selection(m, 7, -0.8), m);
  const auto spec = solve_generic(sys, -0.8);
  for (Index k = 0; k < spec.h.cols(); ++k) {
    const double E = spec.energies[static_cast<std::size_t>(k)];
    // [diag(F - F_A) Wt + diag(E_A) R] h = E R h
    const Vector lhs = (-0.8 - sys.F.array()).matrix().asDiagonal() * (sys.Wt * spec.h.col(k)) +
                       sys.E.asDiagonal() * (sys.R * spec.h.col(k));
    EXPECT_LT((lhs - E * sys.R * spec.h.col(k)).norm(), 1e-7 * std::max(1.0, std::abs(E)));
  }
}

TEST(SolveGeneric, ReconstructionMatchesOracleShape) {
  const HautotModel m{0, 0.0};
  const auto sys = assemble(auto_selection(m, 12, 0.5), m);
  const auto spec = solve_generic(sys, 0.5);
  // Ground state: nodeless on (0, 4].
  const Vector h = spec.h.col(0);
  const double s0 = reconstruct(sys, h, 1.0);
  for (double r = 0.1; r <= 4.0; r += 0.1) EXPECT_GT(reconstruct(sys, h, r) * s0, 0.0) << r;
}

TEST(TruncationStudy, ConvergesTowardsOracle) {
  const auto st = truncation_study(HautotModel{0, 0.0}, 0.5, {4, 8, 12}, 3);
  ASSERT_EQ(st.rows.size(), 3u);
  EXPECT_LE(std::abs(st.rows.back().oracle_deviation[0]), std::abs(st.rows.front().oracle_deviation[0]));
  EXPECT_LT(std::abs(st.rows.back().oracle_deviation[0]), 1e-4);
  EXPECT_THROW(truncation_study(HautotModel{0, 0.0}, 0.5, {4}, 3), InputError);
}
