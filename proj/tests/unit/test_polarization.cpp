#include "tdscope/polarization.hpp"

#include <gtest/gtest.h>

using namespace tdscope;

namespace {

Mat3 rotation(double a, double b, double c) {
  return (Eigen::AngleAxisd(a, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitY()) *
          Eigen::AngleAxisd(c, Vec3::UnitZ()))
      .toRotationMatrix();
}

}  // namespace

TEST(Polarization, UnitBallClosedForm) {
  EXPECT_EQ(mz_ball_iso(1.0, 1.0).M, pi * Mat3::Identity());
  const auto p = mz_ball_iso(2.0, -0.5);
  EXPECT_NEAR(p.M(0, 0), 4 * pi * 2.0 * -0.5 / 2.5, 1e-14);
  EXPECT_THROW(mz_ball_iso(1.0, -1.0), DomainError);
  EXPECT_THROW(mz_ball_iso(0.0, 1.0), DomainError);
}

TEST(Polarization, EllipsoidWithUnitAxesIsTheBall) {
  for (double bz : {-0.6, 0.5, 3.0}) {
    const auto e = mz_ellipsoid(SymTensor3::isotropic(1.5), SymTensor3::isotropic(1.5 * (1 + bz)), Vec3::Ones());
    EXPECT_LT((e.M - mz_ball_iso(1.5, bz).M).norm(), 1e-13 * e.M.norm());
  }
}

TEST(Polarization, AlignedEllipsoidDiagonalFormula) {
  // isotropic background a, diagonal trial: M_ii = V (a_i - a) / (1 + (a_i - a) N_i / a)
  const double a = 1.2;
  const Vec3 az(2.0, 0.7, 3.0), ax(1.0, 0.6, 1.4);
  const Vec3 N = depolarization_factors(ax);
  const auto e = mz_ellipsoid(SymTensor3::isotropic(a), SymTensor3::diagonal(az(0), az(1), az(2)), ax);
  const double V = 4 * pi / 3 * ax.prod();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.M(i, i), V * (az(i) - a) / (1 + (az(i) - a) * N(i) / a), 1e-13);
  EXPECT_NEAR(e.M(0, 1), 0.0, 1e-14);
}

TEST(Polarization, PropertyRotationCovariance) {
  const SymTensor3 A = SymTensor3::isotropic(1.0);
  const SymTensor3 Az = SymTensor3::isotropic(2.5);
  const Vec3 ax(1.0, 0.5, 0.8);
  const Mat3 M0 = mz_ellipsoid(A, Az, ax).M;
  for (int i = 0; i < 5; ++i) {
    const Mat3 Rm = rotation(0.3 * i, 0.7 + 0.2 * i, -0.4 * i);
    const Mat3 M = mz_ellipsoid(A, Az, ax, Rm).M;
    EXPECT_LT((M - Rm * M0 * Rm.transpose()).norm(), 1e-12 * M0.norm());
  }
}

TEST(Polarization, QuadratureApproachesClosedForm) {
  const SymTensor3 A(1.3, 1.0, 0.8, 0.1, 0.0, 0.05);
  const SymTensor3 Az(2.0, 1.6, 1.5, -0.1, 0.1, 0.0);
  const auto exact = mz_ellipsoid(A, Az, Vec3::Ones());
  double prev = 1e9;
  for (int cells : {8, 12}) {
    const auto q = mz_general(A, Az, voxelize(Shape::ball(1.0), 2.0 / cells));
    const double err = (q.M - exact.M).norm() / exact.M.norm();
    EXPECT_LT(err, 0.08);
    EXPECT_LT(q.asymmetry, 1e-8);
    EXPECT_EQ(q.source, "quadrature");
    prev = err;
  }
  (void)prev;
  const auto z = mz_general(A, A, voxelize(Shape::ball(1.0), 0.25));
  EXPECT_EQ(z.M.norm(), 0.0);
}

TEST(Dz, RoundTripIso) {
  for (double bz : {-0.5, 1.0, 4.0}) {
    const auto p = mz_ball_iso(1.7, bz);
    const Mat3 D = dz_factor(p, DzMode::iso);
    EXPECT_LT((mz_from_dz(p, D, DzMode::iso) - p.M).norm(), 1e-13 * p.M.norm());
  }
  EXPECT_THROW(dz_factor(mz_ball_iso(1.0, 0.0), DzMode::iso), DomainError);
  const auto an = mz_ellipsoid(SymTensor3::isotropic(1.0), SymTensor3::diagonal(2, 3, 4), Vec3::Ones());
  EXPECT_THROW(dz_factor(an, DzMode::iso), DomainError);
}

TEST(Dz, RoundTripAniso) {
  const SymTensor3 A(1.5, 1.0, 0.9, 0.2, 0.0, 0.1);
  for (const SymTensor3& Az : {SymTensor3(3.0, 2.5, 2.0, 0.1), SymTensor3(0.6, 0.4, 0.5, 0.05)}) {
    const auto p = mz_ellipsoid(A, Az, Vec3(1.0, 0.8, 0.6));
    const Mat3 D = dz_factor(p, DzMode::aniso);
    EXPECT_LT((mz_from_dz(p, D, DzMode::aniso) - p.M).norm(), 1e-12 * p.M.norm());
  }
}

TEST(Dz, BallClosedForm) {
  // beta_z = 1: q_z = 1/3 and D_z = sqrt(4 pi / (3 - q_z)) I = sqrt(3 pi / 2) I
  const Mat3 D = dz_factor(mz_ball_iso(1.0, 1.0), DzMode::iso);
  EXPECT_LT((D - std::sqrt(1.5 * pi) * Mat3::Identity()).norm(), 1e-14);
}

TEST(Dz, MixedSignTrialFactorsThroughSigma) {
  const SymTensor3 A = SymTensor3::isotropic(1.0);
  const auto mixed = mz_ellipsoid(A, SymTensor3::diagonal(2.0, 0.5, 1.5), Vec3(1.0, 0.8, 1.2));
  ASSERT_FALSE(mixed.trial.definite_sign().has_value());
  const Mat3 D = dz_factor(mixed, DzMode::aniso);
  EXPECT_LT((mz_from_dz(mixed, D, DzMode::aniso) - mixed.M).norm(), 1e-12 * mixed.M.norm());
}

TEST(Dz, RejectsNonSpdIntermediateAndSingularTrials) {
  const SymTensor3 A = SymTensor3::isotropic(1.0);
  auto flipped = mz_ellipsoid(A, SymTensor3::diagonal(2.0, 3.0, 1.5), Vec3::Ones());
  flipped.M = -flipped.M;
  EXPECT_THROW(dz_factor(flipped, DzMode::aniso), DomainError);
  auto iso_flipped = mz_ball_iso(1.0, 1.0);
  iso_flipped.M = -iso_flipped.M;
  EXPECT_THROW(dz_factor(iso_flipped, DzMode::iso), DomainError);
  const auto singular = mz_ellipsoid(A, SymTensor3::diagonal(2.0, 1.0, 1.5), Vec3::Ones());
  EXPECT_THROW(dz_factor(singular, DzMode::aniso), DomainError);
}
