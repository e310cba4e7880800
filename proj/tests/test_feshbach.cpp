#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "edham/feshbach.hpp"
#include "support.hpp"

using namespace edham;

TEST(Partition, SplitsBlocks) {
  Matrix H(3, 3);
  H << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  const auto part = make_partition(H, {2, 0});
  EXPECT_EQ(part.p, (std::vector<Index>{0, 2}));
  EXPECT_EQ(part.q, (std::vector<Index>{1}));
  EXPECT_DOUBLE_EQ(part.H_PP(1, 1), 6.0);
  EXPECT_DOUBLE_EQ(part.H_PQ(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(part.H_QQ(0, 0), 4.0);
}

TEST(Partition, RejectsBadIndexSets) {
  const Matrix H = Matrix::Identity(3, 3);
  EXPECT_THROW(make_partition(H, {}), InputError);
  EXPECT_THROW(make_partition(H, {0, 1, 2}), InputError);
  EXPECT_THROW(make_partition(H, {0, 0}), InputError);
  EXPECT_THROW(make_partition(H, {3}), InputError);
  Matrix A = H;
  A(0, 1) = 1.0;
  EXPECT_THROW(make_partition(A, {0}), InputError);
}

TEST(EffectiveFamily, TwoByTwoExample) {
  // H = [[0, 1], [1, 0]], P = {0}: H_eff(z) = 1/z, fixed points z = +-1.
  Matrix H(2, 2);
  H << 0, 1, 1, 0;
  const auto part = make_partition(H, {0});
  const auto fam = make_effective(part);
  ASSERT_EQ(fam.poles().size(), 1);
  EXPECT_DOUBLE_EQ(fam.poles()(0), 0.0);
  EXPECT_NEAR(fam.evaluate(2.0)(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(fam.slope(2.0)(0, 0), 0.25, 1e-15);
  EXPECT_THROW(fam.evaluate(0.0), NearPoleError);
  const auto spec = selfconsistent_spectrum(fam);
  const auto e = spec.energies();
  ASSERT_EQ(e.size(), 2u);
  EXPECT_NEAR(e[0], -1.0, 1e-12);
  EXPECT_NEAR(e[1], 1.0, 1e-12);
}

TEST(EffectiveFamily, ResolventMatchesDirectSolve) {
  edham::testing::Rng rng(21);
  const Matrix H = edham::testing::random_symmetric(7, rng);
  const auto part = make_partition(H, {0, 3, 5});
  const auto fam = make_effective(part);
  const double z = 0.37;
  const Vector x = Vector::LinSpaced(4, 1.0, 2.0);
  const Matrix zq = z * Matrix::Identity(4, 4) - part.H_QQ;
  EXPECT_LT((fam.resolvent_apply(z, x) - zq.lu().solve(x)).norm(), 1e-10);
  const Matrix direct = part.H_PP + part.H_PQ * zq.lu().solve(part.H_QP);
  EXPECT_LT((fam.evaluate(z) - direct).norm(), 1e-10);
}

TEST(SelfConsistent, ReproducesSpectrumForEveryPartitionSize) {
  edham::testing::Rng rng(31);
  for (Index n : {3, 6, 10}) {
    const Matrix H = edham::testing::random_symmetric(n, rng);
    const auto ev = spectral_decompose(H).values;
    for (Index p = 1; p < n; ++p) {
      std::vector<Index> idx;
      for (Index i = 0; i < p; ++i) idx.push_back(i);
      const auto spec = selfconsistent_spectrum(make_effective(make_partition(H, idx)));
      auto e = spec.energies();
      ASSERT_EQ(static_cast<Index>(e.size()), n) << n << " " << p;
      for (Index k = 0; k < n; ++k) EXPECT_NEAR(e[static_cast<std::size_t>(k)], ev(k), 1e-9);
    }
  }
}

TEST(SelfConsistent, RootCloseToPoleIsRecovered) {
  // Weakly coupled Q state: its eigenvalue sits about w^2 from the pole.
  Matrix H = Matrix::Zero(3, 3);
  H(0, 0) = 0.0;
  H(1, 1) = 1.0;
  H(2, 2) = 2.0;
  H(0, 1) = H(1, 0) = 0.5;
  H(0, 2) = H(2, 0) = 1e-5;
  const auto ev = spectral_decompose(H).values;
  const auto spec = selfconsistent_spectrum(make_effective(make_partition(H, {0})));
  auto e = spec.energies();
  ASSERT_EQ(e.size(), 3u);
  for (Index k = 0; k < 3; ++k) EXPECT_NEAR(e[static_cast<std::size_t>(k)], ev(k), 1e-9);
}

TEST(SelfConsistent, DecoupledStateIsMissing) {
  // A Q eigenvector with no P component never appears as a fixed point.
  Matrix H = Matrix::Zero(3, 3);
  H(0, 0) = 1.0;
  H(1, 1) = 2.0;
  H(2, 2) = 5.0;
  H(0, 1) = H(1, 0) = 0.3;
  const auto spec = selfconsistent_spectrum(make_effective(make_partition(H, {0})));
  for (double e : spec.energies()) EXPECT_GT(std::abs(e - 5.0), 1e-6);
}

TEST(Reconstruction, FullEigenvectorResidual) {
  edham::testing::Rng rng(41);
  const Matrix H = edham::testing::random_symmetric(8, rng);
  const auto part = make_partition(H, {1, 4, 6});
  const auto fam = make_effective(part);
  const auto spec = selfconsistent_spectrum(fam);
  for (const auto& s : spec.fixed_points) {
    const auto full = reconstruct_full(part, fam, s.energy, s.vector);
    EXPECT_NEAR(full.psi.norm(), 1.0, 1e-12);
    EXPECT_LT(full.residual, 1e-9);
    const auto again = reconstruct_full(part, s.energy, s.vector);
    EXPECT_LT(std::min((again.psi - full.psi).norm(), (again.psi + full.psi).norm()), 1e-9);
  }
}

TEST(SelfConsistent, IntervalsReportCounts) {
  edham::testing::Rng rng(51);
  const Matrix H = edham::testing::random_symmetric(6, rng);
  const auto spec = selfconsistent_spectrum(make_effective(make_partition(H, {0, 1})));
  Index expected = 0;
  for (const auto& r : spec.intervals) {
    EXPECT_EQ(r.expected, r.found);
    expected += r.expected;
  }
  EXPECT_EQ(expected, 6);
  EXPECT_EQ(spec.poles.size(), 4u);
}
