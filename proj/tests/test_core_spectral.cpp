#include <gtest/gtest.h>

#include <cmath>

#include "edham/core_spectral.hpp"
#include "support.hpp"

using namespace edham;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(ParametricOperator, AffineEvaluates) {
  const auto op = ParametricOperator::affine(diag2(1.0, 3.0), diag2(0.5, -0.2));
  const Matrix h = op.evaluate(2.0);
  EXPECT_DOUBLE_EQ(h(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(h(1, 1), 2.6);
  EXPECT_EQ(op.dim(), 2);
}

TEST(ParametricOperator, RejectsNonSymmetric) {
  Matrix a = diag2(1.0, 2.0);
  a(0, 1) = 1.0;
  EXPECT_THROW(ParametricOperator::affine(a, diag2(0.0, 0.0)), InputError);
}

TEST(ParametricOperator, TableInterpolatesAndEnforcesDomain) {
  const auto op = ParametricOperator::table({0.0, 1.0, 3.0}, {diag2(0, 0), diag2(1, 2), diag2(3, 2)});
  EXPECT_DOUBLE_EQ(op.evaluate(0.5)(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(op.evaluate(2.0)(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(op.evaluate(3.0)(1, 1), 2.0);
  EXPECT_THROW(op.evaluate(3.5), InputError);
  EXPECT_THROW(ParametricOperator::table({0.0, 0.0}, {diag2(0, 0), diag2(1, 1)}), InputError);
}

TEST(UniformGrid, EndpointsAndValidation) {
  const auto g = uniform_grid(-1.0, 1.0, 5);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g.front(), -1.0);
  EXPECT_DOUBLE_EQ(g.back(), 1.0);
  EXPECT_THROW(validate_grid({0.0, 0.0, 1.0}, Interval{}), InputError);
  EXPECT_THROW(validate_grid({0.0, 2.0}, Interval{0.0, 1.0}), InputError);
}

TEST(TrackBranches, FollowsCrossingDiagonalLevels) {
  // Levels z and 1 - z cross at z = 1/2 without coupling; tracking by
  // eigenvector overlap must keep each level on its own branch.
  const auto op = ParametricOperator::affine(diag2(0.0, 1.0), diag2(1.0, -1.0));
  const auto set = track_branches(op, uniform_grid(0.0, 1.0, 41));
  ASSERT_EQ(set.branches.size(), 2u);
  for (const auto& s : set.branches[0].samples) EXPECT_NEAR(s.value, s.z, 1e-12);
  for (const auto& s : set.branches[1].samples) EXPECT_NEAR(s.value, 1.0 - s.z, 1e-12);
  EXPECT_GT(set.branches[0].min_overlap, 0.99);
}

TEST(FixedPoints, DiagonalAffineFamily) {
  // E_0(z) = 1 + z/2 = z at z = 2, E_1(z) = 3 - z/5 = z at z = 2.5.
  const auto op = ParametricOperator::affine(diag2(1.0, 3.0), diag2(0.5, -0.2));
  const auto set = find_fixed_points(op, uniform_grid(-10.0, 10.0, 101));
  ASSERT_EQ(set.solutions.size(), 2u);
  std::vector<double> e{set.solutions[0].energy, set.solutions[1].energy};
  std::sort(e.begin(), e.end());
  EXPECT_NEAR(e[0], 2.0, 1e-10);
  EXPECT_NEAR(e[1], 2.5, 1e-10);
  for (const auto& s : set.solutions) {
    EXPECT_LT(s.residual, 1e-9);
    EXPECT_NEAR(s.vector.norm(), 1.0, 1e-12);
    EXPECT_FALSE(s.at_boundary);
  }
}

TEST(FixedPoints, ConstantFamilyGivesEigenvalues) {
  edham::testing::Rng rng(3);
  const Matrix h = edham::testing::random_symmetric(6, rng);
  const auto op = ParametricOperator::affine(h, Matrix::Zero(6, 6));
  const auto set = find_fixed_points_refining(op, uniform_grid(-10.0, 10.0, 200));
  const auto ev = spectral_decompose(h).values;
  ASSERT_EQ(static_cast<Index>(set.solutions.size()), ev.size());
  std::vector<double> e;
  for (const auto& s : set.solutions) e.push_back(s.energy);
  std::sort(e.begin(), e.end());
  for (Index k = 0; k < ev.size(); ++k) EXPECT_NEAR(e[static_cast<std::size_t>(k)], ev(k), 1e-10);
}

TEST(FixedPoints, RootOnGridBoundaryIsFlagged) {
  const auto op = ParametricOperator::affine(diag2(1.0, 50.0), diag2(0.0, 0.0));
  const auto set = find_fixed_points(op, uniform_grid(1.0, 3.0, 11));
  ASSERT_EQ(set.solutions.size(), 1u);
  EXPECT_TRUE(set.solutions[0].at_boundary);
  EXPECT_FALSE(set.warnings.empty());
}

TEST(FixedPoints, EmptyResultIsNotAnError) {
  const auto op = ParametricOperator::affine(diag2(100.0, 200.0), diag2(0.0, 0.0));
  const auto set = find_fixed_points(op, uniform_grid(-1.0, 1.0, 11));
  EXPECT_TRUE(set.solutions.empty());
}

TEST(FixedPoints, RejectsBadTolerance) {
  const auto op = ParametricOperator::affine(diag2(1.0, 2.0), diag2(0.0, 0.0));
  FixedPointOptions opts;
  opts.fp_tol = 0.0;
  EXPECT_THROW(find_fixed_points(op, uniform_grid(0.0, 1.0, 5), opts), InputError);
}

TEST(FixedPoints, MaxBranchesLimitsSearch) {
  const auto op = ParametricOperator::affine(diag2(1.0, 3.0), diag2(0.5, -0.2));
  FixedPointOptions opts;
  opts.tracking.max_branches = 1;
  // The levels cross at z = 2/0.7; below it branch 0 stays lowest.
  const auto set = find_fixed_points(op, uniform_grid(-10.0, 2.6, 64), opts);
  ASSERT_EQ(set.solutions.size(), 1u);
  EXPECT_NEAR(set.solutions[0].energy, 2.0, 1e-10);
  // Past the crossing the tracked level leaves the computed window.
  EXPECT_THROW(find_fixed_points(op, uniform_grid(-10.0, 10.0, 101), opts), RefinementError);
}
