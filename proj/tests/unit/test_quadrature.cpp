#include "tdscope/quadrature.hpp"

#include <gtest/gtest.h>

using namespace tdscope;

TEST(GaussLegendre, ExactForDegree2nMinus1) {
  for (int n : {1, 2, 5, 12, 40}) {
    const GaussRule r = gauss_legendre(n, -0.5, 2.0);
    double w = 0.0;
    for (double x : r.weights) w += x;
    EXPECT_NEAR(w, 2.5, 1e-13);
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], p);
      const double ref = (std::pow(2.0, p + 1) - std::pow(-0.5, p + 1)) / (p + 1);
      EXPECT_NEAR(s, ref, 1e-12 * std::max(1.0, std::abs(ref))) << n << " " << p;
    }
  }
  EXPECT_THROW(gauss_legendre(0), DomainError);
}

TEST(SphereQuadrature, AreaAndMoments) {
  const auto nodes = sphere_quadrature(6);
  double w = 0.0, xx = 0.0, xy = 0.0, z4 = 0.0;
  for (const auto& n : nodes) {
    w += n.weight;
    xx += n.weight * n.dir.x() * n.dir.x();
    xy += n.weight * n.dir.x() * n.dir.y();
    z4 += n.weight * std::pow(n.dir.z(), 4);
    EXPECT_NEAR(n.dir.norm(), 1.0, 1e-15);
  }
  EXPECT_NEAR(w, 4 * pi, 1e-13);
  EXPECT_NEAR(xx, 4 * pi / 3, 1e-13);
  EXPECT_NEAR(xy, 0.0, 1e-13);
  EXPECT_NEAR(z4, 4 * pi / 5, 1e-13);
  EXPECT_EQ(nodes.size(), 6u * 12u);
}

TEST(SphereQuadrature, CapArea) {
  for (double th : {0.3, 1.0, 2.5}) {
    double w = 0.0;
    for (const auto& n : sphere_quadrature(10, th)) {
      w += n.weight;
      EXPECT_GE(n.dir.z(), std::cos(th) - 1e-15);
    }
    EXPECT_NEAR(w, 2 * pi * (1 - std::cos(th)), 1e-12);
  }
  EXPECT_THROW(sphere_quadrature(4, 0.0), DomainError);
  EXPECT_THROW(sphere_quadrature(4, 4.0), DomainError);
}

TEST(SphereQuadrature, FullApertureIsClosedRule) {
  const auto a = sphere_quadrature(9);
  const auto b = sphere_quadrature(9, pi);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].dir, b[i].dir);
    EXPECT_EQ(a[i].weight, b[i].weight);
  }
}

TEST(MakeSphere, PhysicalUnits) {
  const SphereSurface s = make_sphere(Vec3(1, 2, 3), 2.5, 8);
  EXPECT_NEAR(s.area(), 4 * pi * 6.25, 1e-11);
  EXPECT_TRUE(s.closed());
  EXPECT_EQ(s.exact_degree(), 15);
  EXPECT_TRUE(s.encloses(Vec3(1, 2, 5.4)));
  EXPECT_FALSE(s.encloses(Vec3(1, 2, 5.6)));
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_NEAR((s.points[i] - s.center).norm(), 2.5, 1e-14);
  EXPECT_FALSE(make_sphere(Vec3::Zero(), 1.0, 8, 1.0).closed());
  EXPECT_THROW(make_sphere(Vec3::Zero(), 0.0, 8), DomainError);
}
