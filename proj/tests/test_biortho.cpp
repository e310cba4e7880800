#include <gtest/gtest.h>

#include <cmath>

#include "edham/biortho.hpp"
#include "support.hpp"

using namespace edham;

TEST(Biortho, OrthonormalKetsGiveTransposeDuals) {
  edham::testing::Rng rng(1);
  const Matrix Q = edham::testing::random_orthogonal(5, rng).leftCols(3);
  Vector e(3);
  e << -1.0, 0.5, 2.0;
  const auto sys = build_system(Q, e);
  EXPECT_NEAR(sys.cond_R, 1.0, 1e-12);
  EXPECT_LT((sys.duals - sys.kets.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const auto q = build_K(sys);
  EXPECT_LT(symmetry_defect(q.K), 1e-12);
}

TEST(Biortho, KetsAreNormalizedWithSignConvention) {
  Matrix k(2, 2);
  k << -3.0, 1.0, 0.0, 1.0;
  Vector e(2);
  e << 0.0, 1.0;
  const auto sys = build_system(k, e);
  EXPECT_NEAR(sys.kets.col(0).norm(), 1.0, 1e-15);
  EXPECT_GT(sys.kets(0, 0), 0.0);
  EXPECT_NEAR(sys.R(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Biortho, AuditOnRandomSystem) {
  edham::testing::Rng rng(11);
  const Matrix kets = edham::testing::random_kets(8, 5, 1e4, rng);
  const auto sys = build_system(kets, edham::testing::random_energies(5, rng));
  Vector d(5);
  d << 1.0, 2.0, 0.5, 3.0, 1.5;
  const auto q = build_K(sys);
  const auto metric = build_metric(sys, d);
  const auto r = audit(sys, q, metric);
  EXPECT_LT(r.worst(), 1e-11);
  for (Index a = 0; a < 5; ++a) EXPECT_NEAR(r.constants[static_cast<std::size_t>(a)], d(a), 1e-10 * d(a));
}

TEST(Biortho, CompletenessIsProjectorOntoSpan) {
  edham::testing::Rng rng(5);
  const Matrix kets = edham::testing::random_kets(6, 3, 100.0, rng);
  const auto sys = build_system(kets, edham::testing::random_energies(3, rng));
  const Matrix P = completeness_projector(sys);
  EXPECT_LT((P * sys.kets - sys.kets).norm(), 1e-12);
  EXPECT_LT((P * P - P).norm(), 1e-12);
}

TEST(Biortho, MetricInverseIsInverseOnSpan) {
  edham::testing::Rng rng(8);
  const Matrix kets = edham::testing::random_kets(4, 4, 50.0, rng);
  const auto sys = build_system(kets, edham::testing::random_energies(4, rng));
  const auto m = build_metric(sys, Vector::Constant(4, 2.0));
  EXPECT_LT((m.eta * m.eta_inv - Matrix::Identity(4, 4)).norm(), 1e-10);
}

TEST(Biortho, DegenerateEnergiesRejectedUnlessAllowed) {
  edham::testing::Rng rng(2);
  const Matrix kets = edham::testing::random_kets(4, 2, 10.0, rng);
  Vector e(2);
  e << 1.0, 1.0;
  EXPECT_THROW(build_system(kets, e), DegeneracyError);
  BiorthoOptions opts;
  opts.allow_degenerate = true;
  EXPECT_NO_THROW(build_system(kets, e, opts));
}

TEST(Biortho, IllConditionedBasisRejected) {
  Matrix k(3, 2);
  k << 1.0, 1.0, 0.0, 1e-9, 0.0, 0.0;
  Vector e(2);
  e << 0.0, 1.0;
  EXPECT_THROW(build_system(k, e), IllConditionedBasis);
}

TEST(Biortho, TooManyKetsRejected) {
  Matrix k = Matrix::Identity(2, 3);
  Vector e(3);
  e << 0.0, 1.0, 2.0;
  EXPECT_THROW(build_system(k, e), IllConditionedBasis);
}

TEST(Biortho, MetricAnsatzMustRespectEnergies) {
  edham::testing::Rng rng(4);
  const Matrix kets = edham::testing::random_kets(3, 3, 10.0, rng);
  Vector e(3);
  e << 0.0, 1.0, 2.0;
  const auto sys = build_system(kets, e);
  Matrix U = Matrix::Identity(3, 3);
  EXPECT_NO_THROW(metric_from_ansatz(sys, U));
  U(0, 1) = U(1, 0) = 0.3;
  EXPECT_THROW(metric_from_ansatz(sys, U), InputError);
}

TEST(Biortho, PositiveMetricMakesKHermitianInDisguise) {
  edham::testing::Rng rng(9);
  const Matrix kets = edham::testing::random_kets(5, 5, 20.0, rng);
  const auto sys = build_system(kets, edham::testing::random_energies(5, rng));
  const auto q = build_K(sys);
  const auto m = build_metric(sys, Vector::Ones(5));
  EXPECT_LT(hermitian_similarity_residual(q.K, m, sys), 1e-10);
  auto spec = spanned_spectrum(q.K, sys);
  std::vector<double> e(sys.energies.data(), sys.energies.data() + 5);
  std::sort(e.begin(), e.end());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(spec[i], e[i], 1e-9);
}

TEST(Biortho, WeakOrthogonalityForAffineFamily) {
  edham::testing::Rng rng(12);
  const Matrix H0 = edham::testing::random_symmetric(4, rng);
  Matrix H1 = edham::testing::random_symmetric(4, rng);
  H1 *= 0.5 / spectral_decompose(H1).values.cwiseAbs().maxCoeff();
  const auto fam = ParametricOperator::affine(H0, H1);
  const auto set = find_fixed_points_refining(fam, uniform_grid(-20.0, 20.0, 300));
  ASSERT_GE(set.solutions.size(), 3u);
  const Index m = static_cast<Index>(set.solutions.size());
  Matrix kets(4, m);
  Vector e(m);
  for (Index a = 0; a < m; ++a) {
    kets.col(a) = set.solutions[static_cast<std::size_t>(a)].vector;
    e(a) = set.solutions[static_cast<std::size_t>(a)].energy;
  }
  const auto sys = build_system(kets, e);
  EXPECT_LT(weak_orthogonality_residual(fam, sys).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Biortho, ZeroMetricWeightRejected) {
  edham::testing::Rng rng(13);
  const auto sys = build_system(edham::testing::random_kets(3, 2, 2.0, rng), edham::testing::random_energies(2, rng));
  Vector d(2);
  d << 1.0, 0.0;
  EXPECT_THROW(build_metric(sys, d), InputError);
}
