#include <gtest/gtest.h>

#include <cmath>

#include "edham/toy_mass.hpp"

using namespace edham;

TEST(ToyMass, PlusBranchClosedForm) {
  EXPECT_EQ(spectrum_plus(0, ToyModel{1.0, 0.0}), 2.0);
  EXPECT_DOUBLE_EQ(spectrum_plus(1, ToyModel{1.0, 0.0}), std::sqrt(12.0));
  EXPECT_DOUBLE_EQ(spectrum_plus(2, ToyModel{2.0, 1.0}), 1.0 + std::sqrt(1.0 + 10.0));
  for (int n = 1; n < 20; ++n) EXPECT_GT(spectrum_plus(n, ToyModel{0.5, -3.0}), spectrum_plus(n - 1, ToyModel{0.5, -3.0}));
}

TEST(ToyMass, MinusBranchCounts) {
  EXPECT_EQ(minus_branch_nmax(ToyModel{1.0, 1.9}), -1);
  EXPECT_TRUE(spectrum_minus(ToyModel{1.0, 1.9}).empty());
  EXPECT_EQ(minus_branch_nmax(ToyModel{1.0, 2.0}), 0);
  EXPECT_EQ(minus_branch_nmax(ToyModel{1.0, 5.0}), 2);
  const auto pairs = spectrum_minus(ToyModel{1.0, 5.0});
  ASSERT_EQ(pairs.size(), 3u);
  for (const auto& p : pairs) {
    EXPECT_NEAR(p.lower + p.upper, 10.0, 1e-12);
    EXPECT_LE(p.lower, p.upper);
  }
  // A E0^2 = 4 exactly: one degenerate pair at E0.
  const auto edge = spectrum_minus(ToyModel{1.0, 2.0});
  ASSERT_EQ(edge.size(), 1u);
  EXPECT_DOUBLE_EQ(edge[0].lower, 2.0);
  EXPECT_DOUBLE_EQ(edge[0].upper, 2.0);
}

TEST(ToyMass, Validation) {
  EXPECT_THROW(spectrum_plus(0, ToyModel{0.0, 1.0}), InputError);
  EXPECT_THROW(spectrum_plus(-1, ToyModel{1.0, 1.0}), InputError);
  EXPECT_THROW(minus_branch_nmax(ToyModel{-1.0, 1.0}), InputError);
}

TEST(ToyFamily, ConstantMassHarmonicLevels) {
  // -psi'' + x^2 psi: levels 2n + 1.
  const ToyFamily fam(ToyModel{1.0, 0.0}, 1200, 10.0, false, true);
  const auto ep = fam.eigenpairs(3.0, 3);
  for (Index k = 0; k < 3; ++k) EXPECT_NEAR(ep.values(k), 2.0 * static_cast<double>(k) + 1.0, 1e-3);
  EXPECT_THROW(ToyFamily(ToyModel{1.0, 0.0}, 10, 10.0), InputError);
}

TEST(ToyFamily, MassZeroIsRejected) {
  const ToyFamily fam(ToyModel{1.0, 2.0}, 100, 8.0);
  EXPECT_THROW(fam.evaluate(2.0), InputError);
}

TEST(ToyCrosscheck, SolverMatchesClosedFormUpToScale) {
  ToyCrosscheckOptions opts;
  opts.levels = 4;
  opts.grid_points = 500;
  const auto cc = crosscheck_fixed_point(ToyModel{1.0, 5.0}, opts);
  ASSERT_TRUE(cc.convention_factor.has_value());
  EXPECT_NEAR(*cc.convention_factor, 2.0, 1e-3);
  EXPECT_LT(cc.max_relative_misfit, 1e-3);
  EXPECT_TRUE(cc.counts_match);
  EXPECT_TRUE(cc.plus_increasing);
  EXPECT_EQ(cc.plus_found, cc.plus_expected);
  EXPECT_EQ(cc.minus_found, cc.minus_expected);
}

TEST(ToyCrosscheck, NoMinusBranchBelowThreshold) {
  ToyCrosscheckOptions opts;
  opts.levels = 3;
  opts.grid_points = 400;
  const auto cc = crosscheck_fixed_point(ToyModel{1.0, 1.0}, opts);
  EXPECT_EQ(cc.minus_found, 0);
  EXPECT_EQ(cc.minus_expected, 0);
  EXPECT_TRUE(cc.counts_match);
}
