#pragma once

// Fundamental solutions of -div(A grad u) - kappa^2 u = delta for a constant
// SPD tensor A, their derivatives, and the voxel self-interaction integrals.

#include "tdscope/materials.hpp"
#include "tdscope/quadrature.hpp"

#include <boost/math/special_functions/ellint_rd.hpp>

#include <array>
#include <cmath>
#include <numbers>

namespace tdscope {

class Background {
 public:
  Background() : Background(SymTensor3::isotropic(1.0), 0.0) {}

  Background(const SymTensor3& A, double kappa) : tensor_(A), kappa_(kappa) {
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
      throw DomainError("Background: kappa must be finite and >= 0");
    A_ = A.matrix();
    require_spd(A_, "Background");
    sqrtA_ = spd_sqrt(A_);
    invSqrtA_ = spd_inv_sqrt(A_);
    invA_ = detail::sym_part(invSqrtA_ * invSqrtA_);
    det_ = A_.determinant();
    sqrt_det_ = std::sqrt(det_);
    iso_ = A.is_isotropic();
  }

  static Background isotropic(double a, double kappa) {
    return Background(SymTensor3::isotropic(a), kappa);
  }

  const SymTensor3& tensor() const { return tensor_; }
  double kappa() const { return kappa_; }
  const Mat3& A() const { return A_; }
  const Mat3& sqrtA() const { return sqrtA_; }
  const Mat3& inv_sqrtA() const { return invSqrtA_; }
  const Mat3& invA() const { return invA_; }
  double detA() const { return det_; }
  double sqrt_detA() const { return sqrt_det_; }
  bool is_isotropic() const { return iso_; }
  /// Scalar coefficient; meaningful only when is_isotropic().
  double a() const { return A_(0, 0); }

  Background with_kappa(double kappa) const { return Background(tensor_, kappa); }

  /// rho = |A^{-1/2} r|.
  double rho(const Vec3& r) const { return std::sqrt(r.dot(invA_ * r)); }

 private:
  SymTensor3 tensor_;
  double kappa_;
  Mat3 A_, sqrtA_, invSqrtA_, invA_;
  double det_ = 1.0, sqrt_det_ = 1.0;
  bool iso_ = true;
};

namespace detail {

inline void require_nonzero(const Vec3& r, const char* what) {
  if (r.squaredNorm() == 0.0) throw SingularityError(std::string(what) + ": r = 0");
}

}  // namespace detail

/// Phi_kappa(r) = exp(i kappa rho) / (4 pi sqrt(det A) rho).
inline cplx phi(const Background& bg, const Vec3& r) {
  detail::require_nonzero(r, "phi");
  const double rho = bg.rho(r);
  return std::exp(I_unit * (bg.kappa() * rho)) / (4.0 * pi * bg.sqrt_detA() * rho);
}

/// Gradient of phi with respect to its argument.
inline CVec3 grad_phi(const Background& bg, const Vec3& r) {
  detail::require_nonzero(r, "grad_phi");
  const double rho = bg.rho(r);
  const double k = bg.kappa();
  // f(rho) = e^{ik rho}/rho, f' = e^{ik rho}(ik rho - 1)/rho^2
  const cplx fp = std::exp(I_unit * (k * rho)) * (I_unit * (k * rho) - 1.0) / (rho * rho);
  const cplx c = fp / (4.0 * pi * bg.sqrt_detA() * rho);
  return c * (bg.invA() * r).cast<cplx>();
}

/// Hessian of phi (symmetric 3x3), valid for r != 0.
inline CMat3 hess_phi(const Background& bg, const Vec3& r) {
  detail::require_nonzero(r, "hess_phi");
  const double rho = bg.rho(r);
  const double k = bg.kappa();
  const cplx e = std::exp(I_unit * (k * rho));
  const double c = 4.0 * pi * bg.sqrt_detA();
  const cplx fp_over_rho = e * (I_unit * (k * rho) - 1.0) / (rho * rho * rho);
  // f'' - f'/rho
  const cplx g = e * (3.0 - 3.0 * I_unit * (k * rho) - k * k * rho * rho) / (rho * rho * rho);
  const Vec3 v = bg.invA() * r;
  CMat3 H = (g / (rho * rho * c)) * (v * v.transpose()).cast<cplx>() +
            (fp_over_rho / c) * bg.invA().cast<cplx>();
  return H;
}

/// |-div(A grad Phi) - kappa^2 Phi| at x by fourth-order central differences
/// (Richardson-extrapolated second differences) with step h.
inline double pde_residual(const Background& bg, const Vec3& x, double h) {
  if (!(h > 0.0) || !(x.norm() > 10.0 * h))
    throw DomainError("pde_residual: requires |x| > 10 h");
  auto f = [&](const Vec3& p) { return phi(bg, p); };
  auto second = [&](int i, int j, double s) -> cplx {
    Vec3 ei = Vec3::Zero(), ej = Vec3::Zero();
    ei(i) = s;
    ej(j) = s;
    if (i == j) return (f(x + ei) - 2.0 * f(x) + f(x - ei)) / (s * s);
    return (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * s * s);
  };
  cplx lap = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (bg.A()(i, j) == 0.0) continue;
      const cplx d = (4.0 * second(i, j, h) - second(i, j, 2.0 * h)) / 3.0;
      lap += bg.A()(i, j) * d;
    }
  return std::abs(-lap - bg.kappa() * bg.kappa() * f(x));
}

// ---------------------------------------------------------------------------
// Ellipsoid depolarization and Eshelby-like tensors

/// Depolarization factors of the ellipsoid with semi-axes a (sum = 1):
/// N_i = (a1 a2 a3 / 3) R_D(a_j^2, a_k^2, a_i^2).
inline Vec3 depolarization_factors(const Vec3& a) {
  if (!(a.minCoeff() > 0.0)) throw DomainError("depolarization_factors: semi-axes must be positive");
  const double p = a(0) * a(1) * a(2);
  Vec3 n;
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    n(i) = p / 3.0 * boost::math::ellint_rd(a(j) * a(j), a(k) * a(k), a(i) * a(i));
  }
  return n;
}

/// Eshelby-like tensor S of the ellipsoid {x : x^T M x < 1} in background A,
/// defined by grad W_0[g] = -S A^{-1} g inside the ellipsoid.
inline Mat3 eshelby_tensor(const Mat3& A, const Mat3& M) {
  require_spd(A, "eshelby_tensor(A)");
  require_spd(M, "eshelby_tensor(M)");
  const Mat3 ra = spd_sqrt(A);
  const Mat3 ria = spd_inv_sqrt(A);
  Eigen::SelfAdjointEigenSolver<Mat3> es(detail::sym_part(ra * M * ra));
  const Vec3 semi = es.eigenvalues().cwiseSqrt().cwiseInverse();
  const Mat3& V = es.eigenvectors();
  const Mat3 P = V * depolarization_factors(semi).asDiagonal() * V.transpose();
  return ria * P * ra;
}

/// Shape matrix of an ellipsoid with the given semi-axes along the columns of
/// the rotation `axes`.
inline Mat3 ellipsoid_shape_matrix(const Vec3& semi_axes, const Mat3& axes = Mat3::Identity()) {
  if (!(semi_axes.minCoeff() > 0.0)) throw DomainError("ellipsoid: semi-axes must be positive");
  return detail::sym_part(axes * semi_axes.cwiseAbs2().cwiseInverse().asDiagonal() *
                          axes.transpose());
}

// ---------------------------------------------------------------------------
// Self-interaction of one voxel

enum class SelfTermModel {
  cube,  // exact cube integral through its boundary
  ball   // volume-equivalent ball: Eshelby static part + dynamic correction
};

namespace detail {

// Integral over the boundary of the origin-centred cube of side h of
// n (x) grad(f), f = phi or phi - phi_0.
template <class Grad>
CMat3 cube_boundary_integral(double h, Grad&& grad, int panels = 4, int order = 10) {
  const GaussRule gl = gauss_legendre(order);
  const double hp = h / panels;
  CMat3 acc = CMat3::Zero();
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int side : {-1, 1}) {
      CVec3 face = CVec3::Zero();
      for (int pu = 0; pu < panels; ++pu)
        for (int pv = 0; pv < panels; ++pv)
          for (int iu = 0; iu < order; ++iu)
            for (int iv = 0; iv < order; ++iv) {
              Vec3 y;
              y(axis) = side * 0.5 * h;
              y(u) = -0.5 * h + hp * (pu + 0.5 + 0.5 * gl.nodes[iu]);
              y(v) = -0.5 * h + hp * (pv + 0.5 + 0.5 * gl.nodes[iv]);
              const double w = 0.25 * hp * hp * gl.weights[iu] * gl.weights[iv];
              face += w * grad(y);
            }
      acc.row(axis) += static_cast<double>(side) * face.transpose();
    }
  }
  return acc;
}

// Integral over the sphere |y| = r of n (x) grad(f).
template <class Grad>
CMat3 sphere_boundary_integral(double r, Grad&& grad, int order = 24) {
  CMat3 acc = CMat3::Zero();
  for (const auto& node : sphere_quadrature(order)) {
    const CVec3 g = grad(Vec3(r * node.dir));
    acc += (node.weight * r * r) * node.dir.cast<cplx>() * g.transpose();
  }
  return acc;
}

inline CMat3 symmetrize(const CMat3& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/// Diagonal block of the discretised grad W_kappa for a cubic voxel of side h:
/// the distributional integral of the Hessian of Phi_kappa over the cell.
inline CMat3 cell_self_term(const Background& bg, double h,
                            SelfTermModel model = SelfTermModel::cube) {
  if (!(h > 0.0)) throw DomainError("cell_self_term: h must be positive");
  if (model == SelfTermModel::cube) {
    // grad Phi is locally integrable, so the divergence theorem applies to the
    // whole cell and no splitting is required.
    return detail::symmetrize(
        detail::cube_boundary_integral(h, [&](const Vec3& y) { return grad_phi(bg, y); }));
  }
  const double r = h * std::cbrt(3.0 / (4.0 * pi));
  const Mat3 S = eshelby_tensor(bg.A(), Mat3::Identity() / (r * r));
  CMat3 out = (-S * bg.invA()).cast<cplx>();
  if (bg.kappa() == 0.0) return detail::symmetrize(out);
  if (bg.is_isotropic()) {
    const double a = bg.a();
    const double kr = bg.kappa() / std::sqrt(a) * r;
    const cplx c = -(std::exp(I_unit * kr) * (1.0 - I_unit * kr) - 1.0) / (3.0 * a);
    return out + c * CMat3::Identity();
  }
  const Background stat = bg.with_kappa(0.0);
  out += detail::sphere_boundary_integral(
      r, [&](const Vec3& y) -> CVec3 { return grad_phi(bg, y) - grad_phi(stat, y); });
  return detail::symmetrize(out);
}


// ---------------------------------------------------------------------------
// Cell-averaged static interaction of two cubic cells (Newell's formulas)

namespace detail {

using ld = long double;

inline ld newell_f(ld x, ld y, ld z) {
  x = std::fabs(x);
  y = std::fabs(y);
  z = std::fabs(z);
  const ld x2 = x * x, y2 = y * y, z2 = z * z, R = std::sqrt(x2 + y2 + z2);
  ld s = 0;
  if (y > 0 && x2 + z2 > 0) s += y / 2 * (z2 - x2) * std::asinh(y / std::sqrt(x2 + z2));
  if (z > 0 && x2 + y2 > 0) s += z / 2 * (y2 - x2) * std::asinh(z / std::sqrt(x2 + y2));
  if (x * y * z > 0) s -= x * y * z * std::atan(y * z / (x * R));
  return s + (2 * x2 - y2 - z2) * R / 6;
}

inline ld newell_g(ld x, ld y, ld z) {
  const ld sg = ((x < 0) != (y < 0)) ? -1 : 1;
  x = std::fabs(x);
  y = std::fabs(y);
  z = std::fabs(z);
  const ld x2 = x * x, y2 = y * y, z2 = z * z, R = std::sqrt(x2 + y2 + z2);
  ld s = 0;
  if (x2 + y2 > 0) s += x * y * z * std::asinh(z / std::sqrt(x2 + y2));
  if (y2 + z2 > 0) s += y / 6 * (3 * z2 - y2) * std::asinh(x / std::sqrt(y2 + z2));
  if (x2 + z2 > 0) s += x / 6 * (3 * z2 - x2) * std::asinh(y / std::sqrt(x2 + z2));
  if (z > 0) s -= z2 * z / 6 * std::atan(x * y / (z * R));
  if (y > 0) s -= z * y2 / 2 * std::atan(x * z / (y * R));
  if (x > 0) s -= z * x2 / 2 * std::atan(y * z / (x * R));
  return sg * (s - x * y * R / 3);
}

template <class F>
double newell_stencil(F f, ld X, ld Y, ld Z) {
  ld s = 0;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c) {
        const ld w = (a ? -1 : 2) * (b ? -1 : 2) * (c ? -1 : 2);
        s += w * f(X + a, Y + b, Z + c);
      }
  return static_cast<double>(s / (4 * std::numbers::pi_v<ld>));
}

}  // namespace detail

/// Average over cell i of int_{cell j} grad grad (1/(4 pi |x - y|)) dy for unit
/// cubic cells at integer offset d = i - j. Scale-free; the self value is -I/3.
inline Mat3 cell_pair_static(const std::array<int, 3>& d) {
  const detail::ld X = d[0], Y = d[1], Z = d[2];
  Mat3 N;
  N(0, 0) = detail::newell_stencil(detail::newell_f, X, Y, Z);
  N(1, 1) = detail::newell_stencil(detail::newell_f, Y, X, Z);
  N(2, 2) = detail::newell_stencil(detail::newell_f, Z, Y, X);
  N(0, 1) = N(1, 0) = detail::newell_stencil(detail::newell_g, X, Y, Z);
  N(0, 2) = N(2, 0) = detail::newell_stencil(detail::newell_g, X, Z, Y);
  N(1, 2) = N(2, 1) = detail::newell_stencil(detail::newell_g, Y, Z, X);
  return -N;
}

}  // namespace tdscope
