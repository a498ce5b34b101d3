#include "tdscope/quadrature.hpp"
#include "tdscope/specfun.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tdscope;
namespace sf = tdscope::specfun;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(SphBessel, MatchesStdLibrary) {
  for (double x : {1e-3, 0.05, 0.5, 1.0, 3.7, 10.0, 25.0, 60.0}) {
    const auto j = sf::sph_bessel_j_all(50, x);
    for (int n = 0; n <= 50; ++n) {
      const double ref = std::sph_bessel(static_cast<unsigned>(n), x);
      if (std::abs(ref) < 1e-280) continue;
      EXPECT_LT(rel(j[static_cast<std::size_t>(n)], ref), 1e-10) << "n=" << n << " x=" << x;
    }
  }
}

TEST(SphBessel, ClosedFormsLowOrder) {
  for (double x : {0.2, 1.0, 7.5}) {
    EXPECT_NEAR(sf::sph_bessel_j(0, x), std::sin(x) / x, 1e-15);
    EXPECT_NEAR(sf::sph_bessel_j(1, x), std::sin(x) / (x * x) - std::cos(x) / x, 1e-15);
    EXPECT_NEAR(sf::sph_bessel_y(0, x), -std::cos(x) / x, 1e-14);
  }
  EXPECT_EQ(sf::sph_bessel_j(0, 0.0), 1.0);
  EXPECT_EQ(sf::sph_bessel_j(3, 0.0), 0.0);
}

TEST(SphNeumann, MatchesStdLibrary) {
  for (double x : {0.3, 1.0, 5.0, 20.0, 40.0}) {
    const auto y = sf::sph_bessel_y_all(30, x);
    for (int n = 0; n <= 30; ++n) {
      const double ref = std::sph_neumann(static_cast<unsigned>(n), x);
      if (!std::isfinite(ref)) continue;
      EXPECT_LT(rel(y[static_cast<std::size_t>(n)], ref), 1e-10) << "n=" << n << " x=" << x;
    }
  }
}

TEST(SphBessel, PropertyWronskian) {
  // j_n y_{n-1} - j_{n-1} y_n = 1 / x^2
  for (double x : {0.7, 2.0, 9.0, 33.0}) {
    const auto j = sf::sph_bessel_j_all(40, x);
    const auto y = sf::sph_bessel_y_all(40, x);
    for (int n = 1; n <= 40; ++n) {
      const double w = j[n] * y[n - 1] - j[n - 1] * y[n];
      if (!std::isfinite(w)) continue;
      EXPECT_LT(rel(w, 1.0 / (x * x)), 1e-9) << n << " " << x;
    }
  }
}

TEST(SphHankel, OrderZeroClosedForm) {
  for (double x : {0.5, 4.0, 100.0}) {
    const cplx h = sf::sph_hankel1(0, x);
    const cplx ref = -I_unit * std::exp(I_unit * x) / x;
    EXPECT_LT(std::abs(h - ref), 1e-14 * std::abs(ref));
  }
}

TEST(SphDerivative, RecurrenceMatchesDifference) {
  const double x = 2.3, e = 1e-6;
  const auto j = sf::sph_bessel_j_all(10, x);
  const auto d = sf::sph_derivative(j, x);
  for (int n = 0; n <= 9; ++n) {
    const double fd = (sf::sph_bessel_j(n, x + e) - sf::sph_bessel_j(n, x - e)) / (2 * e);
    EXPECT_NEAR(d[static_cast<std::size_t>(n)], fd, 1e-8);
  }
}

TEST(SpecfunErrors, Domain) {
  EXPECT_THROW(sf::sph_bessel_j_all(-1, 1.0), DomainError);
  EXPECT_THROW(sf::sph_bessel_j_all(3, -1.0), DomainError);
  EXPECT_THROW(sf::legendre_p(2, 1.5), DomainError);
  EXPECT_THROW(sf::spherical_harmonic(2, 3, Vec3::UnitZ()), DomainError);
  EXPECT_THROW(sf::spherical_harmonics_all(2, Vec3(1, 1, 0)), DomainError);
}

TEST(Legendre, MatchesStdLibrary) {
  for (double t : {-1.0, -0.73, 0.0, 0.31, 0.999, 1.0}) {
    const auto p = sf::legendre_p_all(60, t);
    for (int n = 0; n <= 60; ++n)
      EXPECT_NEAR(p[static_cast<std::size_t>(n)], std::legendre(static_cast<unsigned>(n), t), 1e-12);
  }
}

TEST(Harmonics, MatchStdSphLegendre) {
  // std::sph_legendre(l, m, theta) = Y_l^m(theta, 0), Condon-Shortley included.
  const double theta = 1.1, ph = 0.7;
  const Vec3 dir(std::sin(theta) * std::cos(ph), std::sin(theta) * std::sin(ph), std::cos(theta));
  const auto y = sf::spherical_harmonics_all(30, dir);
  for (int n = 0; n <= 30; ++n)
    for (int m = 0; m <= n; ++m) {
      const cplx ref = std::sph_legendre(static_cast<unsigned>(n), static_cast<unsigned>(m), theta) *
                       std::polar(1.0, m * ph);
      EXPECT_LT(std::abs(y[sf::harmonic_index(n, m)] - ref), 1e-12) << n << " " << m;
      const cplx neg = ((m % 2) ? -1.0 : 1.0) * std::conj(ref);
      EXPECT_LT(std::abs(y[sf::harmonic_index(n, -m)] - neg), 1e-12);
    }
}

TEST(Harmonics, PropertyAdditionTheorem) {
  // sum_m |Y_n^m|^2 = (2n + 1) / (4 pi) for every direction
  for (const Vec3& d : {Vec3(0, 0, 1), Vec3(0.6, 0, 0.8), Vec3(-0.48, 0.6, 0.64), Vec3(1, 0, 0)}) {
    const auto y = sf::spherical_harmonics_all(25, d.normalized());
    const auto r = sf::real_spherical_harmonics_all(25, d.normalized());
    for (int n = 0; n <= 25; ++n) {
      double s = 0.0, sr = 0.0;
      for (int m = -n; m <= n; ++m) {
        s += std::norm(y[sf::harmonic_index(n, m)]);
        sr += r[sf::harmonic_index(n, m)] * r[sf::harmonic_index(n, m)];
      }
      EXPECT_NEAR(s, (2 * n + 1) / (4 * pi), 1e-12);
      EXPECT_NEAR(sr, (2 * n + 1) / (4 * pi), 1e-12);
    }
  }
}

TEST(Harmonics, RealBasisOrthonormal) {
  const int nmax = 8;
  const auto nodes = sphere_quadrature(nmax + 2);
  const int K = sf::harmonic_count(nmax);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(K, K);
  for (const auto& nd : nodes) {
    const auto r = sf::real_spherical_harmonics_all(nmax, nd.dir);
    const Eigen::Map<const Eigen::VectorXd> v(r.data(), K);
    G += nd.weight * v * v.transpose();
  }
  EXPECT_LT((G - Eigen::MatrixXd::Identity(K, K)).cwiseAbs().maxCoeff(), 1e-13);
  for (int n = 0; n <= 4; ++n)
    for (int m = -n; m <= n; ++m)
      EXPECT_NEAR(sf::real_spherical_harmonic(n, m, Vec3(0.6, 0, 0.8)),
                  sf::real_spherical_harmonics_all(4, Vec3(0.6, 0, 0.8))[sf::harmonic_index(n, m)], 1e-15);
}
