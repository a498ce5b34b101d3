#include "tdscope/materials.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tdscope;

namespace {

Mat3 random_sym(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) m(i, j) = m(j, i) = scale * u(rng);
  return m;
}

Mat3 random_spd(std::mt19937_64& rng) {
  const Mat3 b = random_sym(rng);
  return b * b.transpose() + 0.5 * Mat3::Identity();
}

}  // namespace

TEST(IsoContrast, DemoValues) {
  const IsoContrast c = iso_contrast(1.0, 2.0);
  EXPECT_DOUBLE_EQ(c.beta, 1.0);
  EXPECT_DOUBLE_EQ(c.q, 1.0 / 3.0);
  const IsoContrast soft = iso_contrast(1.0, 0.5);
  EXPECT_DOUBLE_EQ(soft.beta, -0.5);
  EXPECT_DOUBLE_EQ(soft.q, -1.0 / 3.0);
}

TEST(IsoContrast, ZeroContrast) {
  const IsoContrast c = iso_contrast(3.0, 3.0);
  EXPECT_EQ(c.beta, 0.0);
  EXPECT_EQ(c.q, 0.0);
}

TEST(IsoContrast, RejectsNonPositive) {
  EXPECT_THROW(iso_contrast(0.0, 1.0), DomainError);
  EXPECT_THROW(iso_contrast(1.0, -2.0), DomainError);
}

TEST(IsoContrast, PropertyQInUnitIntervalWithSignOfBeta) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lg(-4.0, 4.0);
  for (int i = 0; i < 500; ++i) {
    const double a = std::exp(lg(rng)), at = std::exp(lg(rng));
    const IsoContrast c = iso_contrast(a, at);
    EXPECT_GT(c.q, -1.0);
    EXPECT_LT(c.q, 1.0);
    EXPECT_EQ(c.q > 0, c.beta > 0);
    // q = (at - a) / (at + a)
    EXPECT_NEAR(c.q, (at - a) / (at + a), 1e-12);
  }
}

TEST(SymTensor, RoundTripAndSymmetry) {
  const SymTensor3 t(1, 2, 3, 0.1, 0.2, 0.3);
  const Mat3 m = t.matrix();
  EXPECT_EQ(m, m.transpose());
  EXPECT_EQ(SymTensor3::from_matrix(m), t);
  Mat3 bad = m;
  bad(0, 1) += 1e-6;
  EXPECT_THROW(SymTensor3::from_matrix(bad), DomainError);
  EXPECT_TRUE(SymTensor3::isotropic(2.5).is_isotropic());
  EXPECT_FALSE(t.is_isotropic());
}

TEST(Spd, SqrtAndCholeski) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Mat3 a = random_spd(rng);
    const Mat3 s = spd_sqrt(a);
    EXPECT_LT((s * s - a).norm(), 1e-12 * a.norm());
    EXPECT_LT((spd_inv_sqrt(a) * s - Mat3::Identity()).norm(), 1e-12);
    const Mat3 l = choleski_sqrt(a);
    EXPECT_LT((l * l.transpose() - a).norm(), 1e-12 * a.norm());
    EXPECT_EQ(l(0, 1), 0.0);
  }
  EXPECT_THROW(choleski_sqrt(Vec3(1, -1, 1).asDiagonal()), DomainError);
  EXPECT_THROW(require_spd(Vec3(1, 0, 1).asDiagonal(), "t"), DomainError);
}

TEST(FactorQ, ReconstructsRandomSymmetric) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Mat3 Q = random_sym(rng, 0.9);
    const QFactor f = factor_Q(Q);
    const Mat3 back = f.q_mat.transpose() * f.sigma2.asDiagonal() * f.q_mat;
    EXPECT_LT((back - Q).norm(), 1e-12);
    for (int k = 0; k < 3; ++k) EXPECT_TRUE(f.sigma2(k) == 1 || f.sigma2(k) == -1 || f.sigma2(k) == 0);
  }
}

TEST(FactorQ, DiagonalKeepsAxisOrder) {
  const QFactor f = factor_Q(Vec3(0.25, -0.5, 0.0).asDiagonal());
  EXPECT_EQ(f.sigma2, Vec3(1, -1, 0));
  EXPECT_NEAR(f.q_mat(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(f.q_mat(1, 1), std::sqrt(0.5), 1e-15);
  EXPECT_EQ(f.q_mat.row(2).norm(), 0.0);
}

TEST(Sigma, FromSigma2) {
  const CVec3 s = sigma_from_sigma2(Vec3(1, -1, 0));
  EXPECT_EQ(s(0), cplx(1, 0));
  EXPECT_EQ(s(1), I_unit);
  EXPECT_EQ(s(2), cplx(0, 0));
  for (int k = 0; k < 2; ++k) EXPECT_EQ(s(k) * s(k), cplx(k == 0 ? 1 : -1, 0));
}

TEST(AnisoContrast, IsotropicCaseMatchesScalar) {
  const AnisoContrast c = aniso_contrast(SymTensor3::isotropic(2.0), SymTensor3::isotropic(5.0));
  const IsoContrast s = iso_contrast(2.0, 5.0);
  EXPECT_LT((c.Q - s.q * Mat3::Identity()).norm(), 1e-14);
  EXPECT_LT((c.beta_t - s.beta * Mat3::Identity()).norm(), 1e-14);
  EXPECT_EQ(c.definite_sign(), 1);
  EXPECT_EQ(aniso_contrast(SymTensor3::isotropic(2.0), SymTensor3::isotropic(1.0)).definite_sign(), -1);
  EXPECT_TRUE(aniso_contrast(SymTensor3::isotropic(2.0), SymTensor3::isotropic(2.0)).is_zero());
}

TEST(AnisoContrast, PropertyQEigenvaluesInUnitInterval) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Mat3 A = random_spd(rng), At = random_spd(rng);
    const AnisoContrast c = aniso_contrast(SymTensor3::from_matrix(detail::sym_part(A)),
                                           SymTensor3::from_matrix(detail::sym_part(At)));
    const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(c.Q).eigenvalues();
    EXPECT_GT(ev.minCoeff(), -1.0);
    EXPECT_LT(ev.maxCoeff(), 1.0);
    EXPECT_LT((c.Q - c.Q.transpose()).norm(), 1e-14);
    // Q = (beta + 2)^-1 beta with beta = A^-1/2 (At - A) A^-1/2
    const Mat3 ris = spd_inv_sqrt(c.A);
    const Mat3 beta = ris * (c.A_tilde - c.A) * ris;
    EXPECT_LT((c.Q - (beta + 2 * Mat3::Identity()).inverse() * beta).norm(), 1e-10);
  }
}

TEST(AnisoContrast, MixedSignIsIndefinite) {
  const AnisoContrast c = aniso_contrast(SymTensor3::isotropic(1.0), SymTensor3::diagonal(2.0, 0.5, 1.0));
  EXPECT_FALSE(c.definite_sign().has_value());
  EXPECT_EQ(c.sigma2, Vec3(1, -1, 0));
}
