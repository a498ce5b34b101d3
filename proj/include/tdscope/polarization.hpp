#pragma once

// Polarization tensors of normalized trial inhomogeneities and their
// Choleski-type factors.

#include "tdscope/vie.hpp"

#include <string>

namespace tdscope {

struct PolarizationTensor {
  Mat3 M = Mat3::Zero();       // polarization tensor of the unit-size trial shape
  Mat3 A = Mat3::Identity();   // background
  Mat3 A_z = Mat3::Identity(); // trial material
  AnisoContrast trial;         // factorisation data (Q_z, q_z, sigma_z^2)
  double volume = 0.0;         // |B| of the normalized shape
  double asymmetry = 0.0;      // |M - M^T| / |M| before symmetrisation
  std::string source;          // "ball", "ellipsoid" or "quadrature"
};

/// Isotropic trial material in a unit ball: M_z = 4 pi a beta_z / (beta_z + 3) I.
inline PolarizationTensor mz_ball_iso(double a, double beta_z) {
  if (!(a > 0.0)) throw DomainError("mz_ball_iso: a must be positive");
  if (!(beta_z > -1.0) || !std::isfinite(beta_z))
    throw DomainError("mz_ball_iso: beta_z must be finite and > -1");
  PolarizationTensor pt;
  pt.A = a * Mat3::Identity();
  pt.A_z = a * (1.0 + beta_z) * Mat3::Identity();
  pt.trial = aniso_contrast(SymTensor3::isotropic(a), SymTensor3::isotropic(a * (1.0 + beta_z)));
  pt.M = (4.0 * pi * a * beta_z / (beta_z + 3.0)) * Mat3::Identity();
  pt.volume = 4.0 * pi / 3.0;
  pt.source = "ball";
  return pt;
}

/// Ellipsoidal trial shape: M_z = |B| (I + (A_z - A) S A^{-1})^{-1} (A_z - A).
inline PolarizationTensor mz_ellipsoid(const SymTensor3& A, const SymTensor3& A_z,
                                       const Vec3& semi_axes,
                                       const Mat3& axes = Mat3::Identity()) {
  const Mat3 a = A.matrix(), az = A_z.matrix();
  require_spd(a, "mz_ellipsoid(A)");
  require_spd(az, "mz_ellipsoid(A_z)");
  const Mat3 S = eshelby_tensor(a, ellipsoid_shape_matrix(semi_axes, axes));
  const Mat3 J = az - a;
  const Mat3 K = Mat3::Identity() + J * S * a.inverse();
  Eigen::FullPivLU<Mat3> lu(K);
  if (!lu.isInvertible() || std::abs(K.determinant()) < 1e-14)
    throw DomainError("mz_ellipsoid: degenerate contrast (singular I + J S A^-1)");
  PolarizationTensor pt;
  pt.A = a;
  pt.A_z = az;
  pt.trial = aniso_contrast(A, A_z);
  pt.volume = 4.0 * pi / 3.0 * semi_axes.prod();
  pt.M = detail::sym_part(pt.volume * lu.solve(J));
  pt.source = "ellipsoid";
  return pt;
}

/// Quadrature definition on a voxelised normalized shape: the kappa = 0 VIE
/// with background A and trial contrast is solved for the three constant
/// fields and integrated.
inline PolarizationTensor mz_general(const SymTensor3& A, const SymTensor3& A_z,
                                     const ScattererGrid& shape, VieOptions opts = {}) {
  PolarizationTensor pt;
  pt.A = A.matrix();
  pt.A_z = A_z.matrix();
  pt.trial = aniso_contrast(A, A_z);
  pt.volume = shape.volume();
  pt.source = "quadrature";
  if (pt.trial.is_zero()) return pt;
  auto sys = assemble(shape, Background(A, 0.0), opts);
  const ContrastSolver solver(sys, pt.trial, MBRoute::normalized);
  CMatrix E(sys->dim(), 3);
  for (int k = 0; k < 3; ++k) E.col(k) = constant_field(*sys, CVec3(Vec3::Unit(k).cast<cplx>()));
  const CMatrix H = solver.apply_MB(E);
  Mat3 M = Mat3::Zero();
  for (std::size_t v = 0; v < sys->voxels(); ++v)
    M += H.block<3, 3>(3 * static_cast<Eigen::Index>(v), 0).real();
  M *= sys->cell_volume();
  const double nm = M.norm();
  pt.asymmetry = nm > 0.0 ? (M - M.transpose()).norm() / nm : 0.0;
  pt.M = detail::sym_part(M);
  return pt;
}

enum class DzMode { iso, aniso };

/// Factor D_z of the polarization tensor.
///  iso:   M_z = 2 a q_z D^T D (A = aI, A_z = a_z I)
///  aniso: M_z = 2 (A^{1/2} q_z^T) sigma_z D^T D sigma_z (q_z A^{1/2})
/// Throws DomainError when the factored matrix is not real SPD, which signals
/// a violated moderate-trial condition.
inline Mat3 dz_factor(const PolarizationTensor& pt, DzMode mode) {
  if (mode == DzMode::iso) {
    if (!SymTensor3::from_matrix(pt.A).is_isotropic(1e-12) ||
        !SymTensor3::from_matrix(pt.A_z).is_isotropic(1e-12))
      throw DomainError("dz_factor(iso): background and trial must be isotropic");
    const double a = pt.A(0, 0);
    const double qz = pt.trial.Q(0, 0);
    if (qz == 0.0) throw DomainError("dz_factor(iso): zero trial contrast has no factor");
    return choleski_sqrt(detail::sym_part(pt.M / (2.0 * a * qz))).transpose();
  }
  if ((pt.trial.sigma2.array() == 0.0).any())
    throw DomainError("dz_factor(aniso): trial contrast Q_z is singular");
  const CMat3 F = pt.trial.sigma().asDiagonal() * (pt.trial.q_mat * spd_sqrt(pt.A)).cast<cplx>();
  const CMat3 Fi = F.inverse();
  const CMat3 P = 0.5 * Fi.transpose() * pt.M.cast<cplx>() * Fi;
  const double scale = P.norm();
  if (P.imag().norm() > 1e-10 * scale)
    throw DomainError("dz_factor(aniso): factored matrix is not real");
  try {
    return choleski_sqrt(detail::sym_part(P.real())).transpose();
  } catch (const DomainError&) {
    throw DomainError("dz_factor(aniso): factored matrix is not SPD (moderate-trial condition violated)");
  }
}

/// M_z rebuilt from a factor, for round-trip checks.
inline Mat3 mz_from_dz(const PolarizationTensor& pt, const Mat3& D, DzMode mode) {
  if (mode == DzMode::iso) return 2.0 * pt.A(0, 0) * pt.trial.Q(0, 0) * D.transpose() * D;
  const CMat3 F = pt.trial.sigma().asDiagonal() * (pt.trial.q_mat * spd_sqrt(pt.A)).cast<cplx>();
  return (2.0 * F.transpose() * (D.transpose() * D).cast<cplx>() * F).real();
}

}  // namespace tdscope
