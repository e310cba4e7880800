#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "edham/qes_coulomb.hpp"

using namespace edham;

TEST(QesCoulomb, EnergyFormula) {
  EXPECT_DOUBLE_EQ(qes_energy(0, HautotModel{0, 0.0}), 3.0);
  EXPECT_DOUBLE_EQ(qes_energy(1, HautotModel{0, 0.0}), 5.0);
  EXPECT_DOUBLE_EQ(qes_energy(2, HautotModel{1, 2.0}), 4.0 + 2.0 + 3.0 - 1.0);
  EXPECT_THROW(qes_energy(-1, HautotModel{0, 0.0}), InputError);
  EXPECT_THROW(qes_energy(0, HautotModel{-1, 0.0}), InputError);
}

TEST(QesCoulomb, ChargesAtZeroSlope) {
  // Charges are the eigenvalues of the charge matrix; at f = 0 they come in
  // +- pairs: N = 1 gives +-2, N = 2 gives 0 and a symmetric pair.
  const HautotModel m{0, 0.0};
  const auto c0 = qes_charges(0, m);
  ASSERT_EQ(c0.size(), 1u);
  EXPECT_NEAR(c0[0], 0.0, 1e-14);
  const auto c1 = qes_charges(1, m);
  ASSERT_EQ(c1.size(), 2u);
  EXPECT_NEAR(c1[0], -2.0, 1e-12);
  EXPECT_NEAR(c1[1], 2.0, 1e-12);
  const auto c2 = qes_charges(2, m);
  ASSERT_EQ(c2.size(), 3u);
  EXPECT_NEAR(c2[0], -c2[2], 1e-12);
  EXPECT_NEAR(c2[1], 0.0, 1e-12);
}

TEST(QesCoulomb, ChargesAscendAndAreReal) {
  for (double f : {0.0, 1.0, 3.0})
    for (int N = 0; N <= 8; ++N) {
      const auto c = qes_charges(N, HautotModel{1, f});
      ASSERT_EQ(c.size(), static_cast<std::size_t>(N + 1));
      for (std::size_t j = 1; j < c.size(); ++j) EXPECT_LT(c[j - 1], c[j]);
    }
}

TEST(QesCoulomb, MomentsAtZeroSlope) {
  // I_m = Gamma((m+1)/2) / 2.
  const auto t = moments(0.0, 30);
  EXPECT_EQ(t.method, "forward");
  for (int m = 0; m <= 30; ++m) EXPECT_NEAR(t[m], 0.5 * std::tgamma(0.5 * (m + 1)), 1e-13 * t[m]) << m;
}

TEST(QesCoulomb, MomentsAgreeWithQuadrature) {
  for (double f : {0.5, 1.0, 5.0, 20.0}) {
    const auto t = moments(f, 40);
    EXPECT_NE(t.method, "quadrature") << f;
    for (int m = 0; m <= 40; m += 5) EXPECT_NEAR(t[m], moment_quadrature(f, m), 1e-11 * t[m]) << f << " " << m;
  }
}

TEST(QesCoulomb, GroundStateCoulombElement) {
  // N = 0, l = 0, f = 0: psi ~ r exp(-r^2/2), <1/r> = 2 / sqrt(pi).
  const HautotModel m{0, 0.0};
  const auto lv = wavefunction_coeffs(0, 0, m);
  EXPECT_NEAR(coulomb_diagonal(lv, m), 2.0 / std::sqrt(std::numbers::pi), 1e-14);
  EXPECT_NEAR(overlap(lv, lv, m), 1.0, 1e-14);
}

TEST(QesCoulomb, FirstExcitedLevelsClosedForm) {
  // N = 1: F = +2 gives P = 1 + r (nodeless), F = -2 gives P = 1 - r (one node).
  const HautotModel m{0, 0.0};
  const auto levels = qes_levels(1, m);
  ASSERT_EQ(levels.size(), 2u);
  EXPECT_NEAR(levels[0].charge, -2.0, 1e-12);
  EXPECT_NEAR(levels[0].coeffs(0) / levels[0].coeffs(1), -1.0, 1e-12);
  EXPECT_EQ(levels[0].nodes, 1);
  EXPECT_NEAR(levels[1].coeffs(0) / levels[1].coeffs(1), 1.0, 1e-12);
  EXPECT_EQ(levels[1].nodes, 0);
  for (const auto& lv : levels) {
    EXPECT_GT(lv.coeffs(lv.coeffs.size() - 1), 0.0);
    EXPECT_LT(lv.recurrence_residual, 1e-12);
  }
}

TEST(QesCoulomb, NodeCountDecreasesWithCharge) {
  const auto levels = qes_levels(5, HautotModel{0, 1.0});
  for (std::size_t j = 0; j < levels.size(); ++j) EXPECT_EQ(levels[j].nodes, 5 - static_cast<int>(j));
}

TEST(QesCoulomb, WavefunctionSolvesRadialEquation) {
  const HautotModel m{1, 0.7};
  const auto lv = wavefunction_coeffs(3, 1, m);
  const double h = 1e-2;
  auto w = [&](double x) { return wavefunction(lv, m, x); };
  for (double r : {0.4, 1.0, 2.3}) {
    const double u = w(r);
    const double upp = (-w(r + 2 * h) + 16.0 * w(r + h) - 30.0 * u + 16.0 * w(r - h) - w(r - 2 * h)) / (12.0 * h * h);
    const double V = 2.0 / (r * r) + lv.charge / r + m.f * r + r * r;
    EXPECT_NEAR(-upp + V * u, lv.energy * u, 1e-6 * std::max(1.0, std::abs(u)));
  }
}

TEST(QesCoulomb, SturmianMultipletIsOrthogonalInCoulombWeight) {
  const auto W = sturmian_check(4, HautotModel{0, 0.5});
  EXPECT_EQ(W.rows(), 5);
  for (Index j = 0; j < 5; ++j) EXPECT_GT(W(j, j), 0.0);
}

TEST(QesCoulomb, MomentCacheGrowsOnDemand) {
  auto& cache = MomentCache::instance();
  const auto a = cache.get(0.123, 10);
  EXPECT_GE(a->m_max(), 64);
  const auto b = cache.get(0.123, 100);
  EXPECT_GE(b->m_max(), 100);
  EXPECT_DOUBLE_EQ((*a)[7], (*b)[7]);
}

TEST(QesCoulomb, RejectsHugeSlope) { EXPECT_THROW(qes_charges(1, HautotModel{0, 80.0}), InputError); }
