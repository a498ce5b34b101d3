#pragma once

// Two-point imaging kernels G and L: surface quadrature, and the far-field,
// two-scale asymptotic and spherical-harmonic series forms.

#include "tdscope/greens.hpp"
#include "tdscope/specfun.hpp"
#include "tdscope/vie.hpp"

#include <cmath>
#include <vector>

namespace tdscope {

namespace detail {

inline void require_inside(const SphereSurface& s, const Vec3& x, const char* what) {
  if (!s.encloses(x))
    throw DomainError(std::string(what) + ": point lies outside the region bounded by the surface");
}

// j1(x)/x and j2(x)/x, stable at small x.
inline double j1_over_x(double x) {
  if (x < 1e-3) return 1.0 / 3.0 - x * x / 30.0;
  return specfun::sph_bessel_j_all(1, x)[1] / x;
}
inline double j2_over_x(double x) {
  if (x < 1e-3) return x / 15.0 - x * x * x / 210.0;
  return specfun::sph_bessel_j_all(2, x)[2] / x;
}

}  // namespace detail

/// grad Phi(s - x) at every surface node for every point: (Ns x 3 npts),
/// column 3p + k holds component k for point p.
inline CMatrix surface_gradients(const SphereSurface& surf, const Background& bg,
                                 const std::vector<Vec3>& pts, unsigned threads = 1) {
  CMatrix P(static_cast<Eigen::Index>(surf.size()), static_cast<Eigen::Index>(3 * pts.size()));
  detail::parallel_for(pts.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p)
      for (std::size_t s = 0; s < surf.size(); ++s) {
        const CVec3 g = grad_phi(bg, surf.points[s] - pts[p]);
        for (int k = 0; k < 3; ++k)
          P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(3 * p) + k) = g(k);
      }
  });
  return P;
}

/// G_ij(z, y) = int_Gamma conj(d_i Phi(s - z)) d_j Phi(s - y) ds.
inline CMat3 kernel_G(const SphereSurface& surf, const Background& bg, const Vec3& z,
                      const Vec3& y) {
  detail::require_inside(surf, z, "kernel_G");
  detail::require_inside(surf, y, "kernel_G");
  CMat3 G = CMat3::Zero();
  for (std::size_t s = 0; s < surf.size(); ++s) {
    const CVec3 gz = grad_phi(bg, surf.points[s] - z);
    const CVec3 gy = grad_phi(bg, surf.points[s] - y);
    G += surf.weights[s] * gz.conjugate() * gy.transpose();
  }
  return G;
}

/// Blocks G(z_p, y_q) for many points: (3 nz x 3 ny).
inline CMatrix kernel_G_block(const SphereSurface& surf, const Background& bg,
                              const std::vector<Vec3>& zs, const std::vector<Vec3>& ys,
                              unsigned threads = 1) {
  for (const auto& z : zs) detail::require_inside(surf, z, "kernel_G_block");
  for (const auto& y : ys) detail::require_inside(surf, y, "kernel_G_block");
  const CMatrix Pz = surface_gradients(surf, bg, zs, threads);
  CMatrix Py = surface_gradients(surf, bg, ys, threads);
  const Eigen::Map<const Eigen::VectorXd> w(surf.weights.data(),
                                            static_cast<Eigen::Index>(surf.weights.size()));
  Py = w.cast<cplx>().asDiagonal() * Py;
  return Pz.adjoint() * Py;
}

/// Far-field limit (A = I): (kappa^2 / 4 pi) [ j0 b b + (j1/x)(I - 3 b b) ],
/// x = kappa |y - z|, b the unit vector along y - z.
inline Mat3 kernel_G_farfield(const Background& bg, const Vec3& z, const Vec3& y) {
  if ((bg.A() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-14)
    throw DomainError("kernel_G_farfield: requires the background A = I");
  const double k = bg.kappa();
  const Vec3 d = y - z;
  const double x = k * d.norm();
  // Equivalent form (j1/x) I - j2 b b, free of cancellation at small x.
  Mat3 G = detail::j1_over_x(x) * Mat3::Identity();
  if (d.norm() > 0.0) {
    const Vec3 b = d.normalized();
    G -= specfun::sph_bessel_j_all(2, x)[2] * b * b.transpose();
  }
  return k * k / (4.0 * pi) * G;
}

/// Two-term expansion of G for |y - z| << R (sources and receivers on R S).
inline CMat3 kernel_G_asymptotic(double R, double kappa, const Vec3& z, const Vec3& y) {
  if (!(R > 0.0) || !(kappa >= 0.0)) throw DomainError("kernel_G_asymptotic: bad R or kappa");
  const Vec3 d = y - z;
  const double r = d.norm();
  const double x = kappa * r;
  const auto j = specfun::sph_bessel_j_all(2, x);
  Mat3 bb = Mat3::Zero();
  if (r > 0.0) {
    const Vec3 b = d / r;
    bb = b * b.transpose();
  }
  const Mat3 I = Mat3::Identity();
  const Mat3 P2 = I - 3.0 * bb;
  const double c1 = (1.0 + kappa * kappa * R * R) / (12.0 * pi * R * R);
  const cplx c2 = (kappa * R + I_unit) / (4.0 * pi * R * R);
  const double j2x = x > 0.0 ? detail::j2_over_x(x) : 0.0;
  CMat3 G = (c1 * (j[0] * I + j[2] * P2)).cast<cplx>();
  G -= c2 * (r / R) * (j[1] * bb.cast<cplx>() + (I_unit * (kappa * R) + 2.0) * j2x * P2.cast<cplx>());
  return G;
}

/// L(z, y) = int_Gamma conj(Phi(s - z)) Phi(s - y) ds.
inline cplx kernel_L(const SphereSurface& surf, const Background& bg, const Vec3& z,
                     const Vec3& y) {
  detail::require_inside(surf, z, "kernel_L");
  detail::require_inside(surf, y, "kernel_L");
  cplx L = 0.0;
  for (std::size_t s = 0; s < surf.size(); ++s)
    L += surf.weights[s] * std::conj(phi(bg, surf.points[s] - z)) * phi(bg, surf.points[s] - y);
  return L;
}

struct SeriesResult {
  double value = 0.0;
  int terms = 0;  // index of the last retained term
};

/// Series for L on the centred sphere of radius R (A = I):
/// (kappa^2 R^2 / 4 pi) sum (2n+1) |h_n(kR)|^2 j_n(k|z|) j_n(k|y|) P_n(cos).
/// Stops at the smallest N >= kR + 20 whose term is below 1e-14 of the sum,
/// or at n_trunc when given.
inline SeriesResult kernel_L_series_detail(double R, double kappa, const Vec3& z, const Vec3& y,
                                           int n_trunc = -1) {
  if (!(R > 0.0)) throw DomainError("kernel_L_series: R must be positive");
  if (!(kappa > 0.0)) throw DomainError("kernel_L_series: requires kappa > 0");
  if (!(z.norm() < R) || !(y.norm() < R))
    throw DomainError("kernel_L_series: |z| and |y| must be below R");
  const int nmin = static_cast<int>(std::ceil(kappa * R)) + 20;
  const int cap = n_trunc >= 0 ? n_trunc : nmin + 400;
  const auto h = specfun::sph_hankel1_all(cap, kappa * R);
  const auto jz = specfun::sph_bessel_j_all(cap, kappa * z.norm());
  const auto jy = specfun::sph_bessel_j_all(cap, kappa * y.norm());
  const double c = (z.norm() > 0.0 && y.norm() > 0.0)
                       ? std::clamp(z.normalized().dot(y.normalized()), -1.0, 1.0)
                       : 1.0;
  const auto P = specfun::legendre_p_all(cap, c);
  double sum = 0.0;
  SeriesResult out;
  for (int n = 0; n <= cap; ++n) {
    const double jj = jz[static_cast<std::size_t>(n)] * jy[static_cast<std::size_t>(n)];
    double term = 0.0;
    if (jj != 0.0) {
      const double hn = std::abs(h[static_cast<std::size_t>(n)]);
      term = (2.0 * n + 1.0) * hn * hn * jj * P[static_cast<std::size_t>(n)];
    }
    if (!std::isfinite(term)) throw NumericalError("kernel_L_series: term overflow", n);
    sum += term;
    out.terms = n;
    if (n_trunc < 0 && n >= nmin && std::abs(term) < 1e-14 * std::abs(sum)) break;
    if (n_trunc < 0 && n >= nmin && sum == 0.0 && term == 0.0) break;
  }
  out.value = kappa * kappa * R * R / (4.0 * pi) * sum;
  return out;
}

inline double kernel_L_series(double R, double kappa, const Vec3& z, const Vec3& y,
                              int n_trunc = -1) {
  return kernel_L_series_detail(R, kappa, z, y, n_trunc).value;
}

/// G_ij = d^2 L / dz_i dy_j by mixed central differences of the L series,
/// Richardson-extrapolated over steps s and 2s. Default step: wavelength/200.
/// With swap = true the y difference is taken as the outer one.
inline Mat3 kernel_G_from_L(double R, double kappa, const Vec3& z, const Vec3& y,
                            double step = -1.0, bool swap = false) {
  if (!(kappa > 0.0)) throw DomainError("kernel_G_from_L: requires kappa > 0");
  if (step <= 0.0) step = 2.0 * pi / kappa / 200.0;
  auto L = [&](const Vec3& a, const Vec3& b) { return kernel_L_series(R, kappa, a, b); };
  auto mixed = [&](int i, int j, double s) {
    const Vec3 ei = s * Vec3::Unit(i), ej = s * Vec3::Unit(j);
    double v;
    if (!swap)
      v = (L(z + ei, y + ej) - L(z + ei, y - ej)) - (L(z - ei, y + ej) - L(z - ei, y - ej));
    else
      v = (L(z + ei, y + ej) - L(z - ei, y + ej)) - (L(z + ei, y - ej) - L(z - ei, y - ej));
    return v / (4.0 * s * s);
  };
  Mat3 G;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) G(i, j) = (4.0 * mixed(i, j, step) - mixed(i, j, 2.0 * step)) / 3.0;
  return G;
}

}  // namespace tdscope
