#include <gtest/gtest.h>

#include <cmath>

#include "edham/qes_sextic.hpp"

using namespace edham;

TEST(QesSextic, CouplingFormula) {
  EXPECT_DOUBLE_EQ(qes_coupling(0, SinghModel{0, 0.0}), -5.0);
  EXPECT_DOUBLE_EQ(qes_coupling(2, SinghModel{1, 2.0}), 1.0 - (8.0 + 2.0 + 5.0));
}

TEST(QesSextic, GroundMultiplet) {
  // N = 0: one level, eps = a (l + 3/2).
  const auto s = qes_energies(0, SinghModel{1, 2.0});
  ASSERT_EQ(s.energies.size(), 1u);
  EXPECT_NEAR(s.energies[0], 2.0 * 2.5, 1e-13);
}

TEST(QesSextic, FirstMultipletAtZeroQuartic) {
  // N = 1, l = 0, a = 0: the 2x2 energy matrix has eigenvalues +-sqrt(24).
  const auto s = qes_energies(1, SinghModel{0, 0.0});
  ASSERT_EQ(s.energies.size(), 2u);
  EXPECT_NEAR(s.energies[0], -std::sqrt(24.0), 1e-12);
  EXPECT_NEAR(s.energies[1], std::sqrt(24.0), 1e-12);
  EXPECT_EQ(s.levels[0].nodes, 0);
  EXPECT_EQ(s.levels[1].nodes, 1);
}

TEST(QesSextic, EnergyMatrixStructure) {
  const Matrix T = energy_matrix(3, SinghModel{1, 1.5});
  ASSERT_EQ(T.rows(), 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      if (std::abs(i - j) > 1) {
        EXPECT_EQ(T(i, j), 0.0);
      }
  EXPECT_DOUBLE_EQ(T(0, 0), 1.5 * 2.5);
  EXPECT_DOUBLE_EQ(T(0, 1), -2.0 * 1.0 * 5.0);
  EXPECT_DOUBLE_EQ(T(1, 0), -4.0 * 3.0);
}

TEST(QesSextic, LevelsAreSortedWithIncreasingNodes) {
  const auto s = qes_energies(5, SinghModel{2, 1.0});
  ASSERT_EQ(s.levels.size(), 6u);
  for (std::size_t j = 0; j < s.levels.size(); ++j) {
    EXPECT_EQ(s.levels[j].nodes, static_cast<int>(j));
    if (j) {
      EXPECT_LT(s.energies[j - 1], s.energies[j]);
    }
  }
  EXPECT_LT(s.worst_residual, 1e-10);
}

TEST(QesSextic, WavefunctionSolvesRadialEquation) {
  const SinghModel m{0, 2.0};
  const auto s = qes_energies(2, m);
  const double A = s.coupling;
  const double h = 1e-3;
  for (const auto& lv : s.levels)
    for (double r : {0.3, 0.9, 1.4}) {
      const double u = wavefunction(lv, m, r);
      const double upp = (wavefunction(lv, m, r + h) - 2.0 * u + wavefunction(lv, m, r - h)) / (h * h);
      const double V = A * r * r + m.a * std::pow(r, 4) + std::pow(r, 6);
      EXPECT_NEAR(-upp + V * u, lv.energy * u, 1e-4 * std::max(1.0, std::abs(u)));
    }
}

TEST(QesSextic, LargeNGuard) {
  EXPECT_THROW(qes_energies(30, SinghModel{0, 0.0}), InputError);
  const auto s = qes_energies(30, SinghModel{0, 0.0}, sextic_default_max_N, true);
  EXPECT_EQ(s.energies.size(), 31u);
}

TEST(QesSextic, RejectsNegativeInputs) {
  EXPECT_THROW(qes_energies(-1, SinghModel{0, 0.0}), InputError);
  EXPECT_THROW(qes_energies(1, SinghModel{-1, 0.0}), InputError);
}

TEST(QesSextic, ModerateNWarnsInsteadOfFailing) {
  const auto s = qes_energies(14, SinghModel{0, 0.0});
  EXPECT_EQ(s.energies.size(), 15u);
  EXPECT_FALSE(s.warnings.empty());
}
