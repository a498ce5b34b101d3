#include "tdscope/kernels.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tdscope;

namespace {

const double kK = 2.0, kR = 3.0;

SphereSurface sphere(int order = 30) { return make_sphere(Vec3::Zero(), kR, order); }

std::vector<Vec3> sample_points(int n, double r, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-r, r);
  std::vector<Vec3> p;
  while (static_cast<int>(p.size()) < n) {
    const Vec3 x(u(rng), u(rng), u(rng));
    if (x.norm() < r) p.push_back(x);
  }
  return p;
}

}  // namespace

TEST(KernelL, OriginValue) {
  // L(0,0) = int |Phi|^2 = 4 pi R^2 / (4 pi R)^2
  const Background bg = Background::isotropic(1.0, kK);
  EXPECT_LT(std::abs(kernel_L(sphere(), bg, Vec3::Zero(), Vec3::Zero()) - 1 / (4 * pi)), 1e-15);
  EXPECT_NEAR(kernel_L_series(kR, kK, Vec3::Zero(), Vec3::Zero()), 1 / (4 * pi), 1e-14);
}

TEST(KernelL, SeriesMatchesQuadrature) {
  const Background bg = Background::isotropic(1.0, kK);
  const auto pts = sample_points(12, 1.2, 3);
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const cplx q = kernel_L(sphere(), bg, pts[i], pts[i + 1]);
    const double s = kernel_L_series(kR, kK, pts[i], pts[i + 1]);
    EXPECT_LT(std::abs(q - s), 1e-10 * std::abs(s));
    EXPECT_LT(std::abs(q.imag()), 1e-12 * std::abs(s));
  }
}

TEST(KernelL, TruncationConverges) {
  const Vec3 z(0.3, 0.2, -0.5), y(-0.4, 0.6, 0.1);
  const auto full = kernel_L_series_detail(kR, kK, z, y);
  EXPECT_GE(full.terms, static_cast<int>(std::ceil(kK * kR)) + 20);
  const double short_sum = kernel_L_series(kR, kK, z, y, 3);
  EXPECT_GT(std::abs(short_sum - full.value), 1e-8 * std::abs(full.value));
  EXPECT_THROW(kernel_L_series(kR, kK, Vec3(4, 0, 0), y), DomainError);
  EXPECT_THROW(kernel_L_series(kR, 0.0, z, y), DomainError);
}

TEST(KernelG, RealOnClosedSphereAndHermitian) {
  const Background bg = Background::isotropic(1.0, kK);
  const auto pts = sample_points(6, 1.2, 5);
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const CMat3 G = kernel_G(sphere(), bg, pts[i], pts[i + 1]);
    const CMat3 Gt = kernel_G(sphere(), bg, pts[i + 1], pts[i]);
    EXPECT_LT(G.imag().norm(), 1e-10 * G.norm());
    EXPECT_LT((G.adjoint() - Gt).norm(), 1e-13 * G.norm());
  }
}

TEST(KernelG, BlockMatchesPointwise) {
  const Background bg(SymTensor3(1.3, 1.0, 0.9, 0.1), 1.0);
  const auto zs = sample_points(3, 1.0, 8), ys = sample_points(2, 1.0, 9);
  const CMatrix B = kernel_G_block(sphere(), bg, zs, ys);
  for (std::size_t p = 0; p < zs.size(); ++p)
    for (std::size_t q = 0; q < ys.size(); ++q) {
      const CMat3 G = kernel_G(sphere(), bg, zs[p], ys[q]);
      EXPECT_LT((B.block<3, 3>(3 * p, 3 * q) - G).norm(), 1e-13 * G.norm());
    }
}

TEST(KernelG, MixedDerivativeOfL) {
  const Background bg = Background::isotropic(1.0, kK);
  const Vec3 z(0.2, -0.3, 0.4), y(-0.5, 0.1, 0.2);
  const CMat3 G = kernel_G(sphere(), bg, z, y);
  const Mat3 F = kernel_G_from_L(kR, kK, z, y);
  EXPECT_LT((F - G.real()).norm(), 1e-5 * G.norm());
  EXPECT_LT((F - kernel_G_from_L(kR, kK, z, y, -1.0, true)).norm(), 1e-5 * G.norm());
}

TEST(KernelG, FarFieldLimit) {
  const Background bg = Background::isotropic(1.0, 1.0);
  const SphereSurface big = make_sphere(Vec3::Zero(), 200.0, 30);
  const Vec3 z(0.3, 0.1, -0.2), y(-0.4, 0.5, 0.3);
  const Mat3 F = kernel_G_farfield(bg, z, y);
  EXPECT_LT((kernel_G(big, bg, z, y) - F.cast<cplx>()).norm(), 2e-2 * F.norm());
  // Coincident points: (kappa^2 / 4 pi) I / 3
  EXPECT_LT((kernel_G_farfield(bg, z, z) - Mat3::Identity() / (12 * pi)).norm(), 1e-15);
  EXPECT_THROW(kernel_G_farfield(Background(SymTensor3(2, 1, 1), 1.0), z, y), DomainError);
}

TEST(KernelG, AsymptoticCloseToQuadratureForCloseFarPoints) {
  const double R = 50.0, k = 1.0;
  const Background bg = Background::isotropic(1.0, k);
  const SphereSurface s = make_sphere(Vec3::Zero(), R, 70);
  const Vec3 z(0.2, 0.0, 0.1), y(-0.3, 0.4, 0.0);
  const CMat3 G = kernel_G(s, bg, z, y);
  EXPECT_LT((kernel_G_asymptotic(R, k, z, y) - G).norm(), 0.05 * G.norm());
}

TEST(Kernels, RequireInside) {
  const Background bg = Background::isotropic(1.0, kK);
  EXPECT_THROW(kernel_G(sphere(), bg, Vec3(3.5, 0, 0), Vec3::Zero()), DomainError);
  EXPECT_THROW(kernel_L(sphere(), bg, Vec3::Zero(), Vec3(0, 0, -3.0)), DomainError);
}
