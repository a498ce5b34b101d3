#pragma once

// Topological-derivative maps and the finite-size expansion check.

#include "tdscope/harmonics.hpp"
#include "tdscope/kernels.hpp"
#include "tdscope/polarization.hpp"

#include <limits>
#include <string>
#include <vector>

namespace tdscope {

enum class KernelMode { quadrature, farfield, asymptotic };

inline std::string to_string(KernelMode m) {
  switch (m) {
    case KernelMode::quadrature: return "quadrature";
    case KernelMode::farfield: return "farfield";
    case KernelMode::asymptotic: return "asymptotic";
  }
  return "?";
}

/// Integration surface for the TD formula: Gamma_s when Gamma_m lies inside it
/// (or coincides), Gamma_m for the reversed nesting. Only the outer surface may
/// be a cap.
inline const SphereSurface& integration_surface(const SphereSurface& gs, const SphereSurface& gm) {
  auto inside = [](const SphereSurface& a, const SphereSurface& b) {
    return (a.center - b.center).norm() + a.radius <= b.radius * (1.0 + 1e-14);
  };
  const SphereSurface* outer;
  const SphereSurface* inner;
  if (inside(gm, gs)) {
    outer = &gs;
    inner = &gm;
  } else if (inside(gs, gm)) {
    outer = &gm;
    inner = &gs;
  } else {
    throw DomainError("integration_surface: source and measurement spheres are not nested");
  }
  if (!inner->closed() && inner != outer)
    throw DomainError("integration_surface: a partial aperture is only allowed on the outer surface");
  return *outer;
}

/// The voxel side of G for a scatterer grid: for sample points z it returns
/// (3N x 3nz) blocks whose column 3p + k holds g_k, g_k(y)_j = G_kj(z_p, y).
class KernelField {
 public:
  KernelField(std::shared_ptr<const VieSystem> sys, SphereSurface surf,
              KernelMode mode = KernelMode::quadrature)
      : sys_(std::move(sys)), surf_(std::move(surf)), mode_(mode) {
    for (const auto& y : sys_->grid().centers) detail::require_inside(surf_, y, "KernelField");
    if (mode_ == KernelMode::quadrature) {
      const CMatrix Py = surface_gradients(surf_, sys_->bg(), sys_->grid().centers,
                                           sys_->options().threads);
      const Eigen::Map<const Eigen::VectorXd> w(surf_.weights.data(),
                                                static_cast<Eigen::Index>(surf_.weights.size()));
      WGyT_ = Py.transpose() * w.cast<cplx>().asDiagonal();
    } else {
      if ((sys_->bg().A() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-14)
        throw DomainError("KernelField: closed-form kernels require A = I");
      if (mode_ == KernelMode::asymptotic && (!surf_.closed() || surf_.center.norm() > 0.0))
        throw DomainError("KernelField: asymptotic kernel requires a closed centred sphere");
    }
  }

  const VieSystem& system() const { return *sys_; }
  const SphereSurface& surface() const { return surf_; }
  KernelMode mode() const { return mode_; }

  CMatrix columns(const std::vector<Vec3>& zs) const {
    for (const auto& z : zs) detail::require_inside(surf_, z, "KernelField::columns");
    const auto& ys = sys_->grid().centers;
    if (mode_ == KernelMode::quadrature) {
      const CMatrix Pz = surface_gradients(surf_, sys_->bg(), zs, sys_->options().threads);
      return WGyT_ * Pz.conjugate();
    }
    CMatrix out(sys_->dim(), static_cast<Eigen::Index>(3 * zs.size()));
    for (std::size_t p = 0; p < zs.size(); ++p)
      for (std::size_t v = 0; v < ys.size(); ++v) {
        const CMat3 G = mode_ == KernelMode::farfield
                            ? CMat3(kernel_G_farfield(sys_->bg(), zs[p], ys[v]).cast<cplx>())
                            : kernel_G_asymptotic(surf_.radius, sys_->bg().kappa(), zs[p], ys[v]);
        // column k of the output block is row k of G
        out.block<3, 3>(3 * static_cast<Eigen::Index>(v), 3 * static_cast<Eigen::Index>(p)) =
            G.transpose();
      }
    return out;
  }

 private:
  std::shared_ptr<const VieSystem> sys_;
  SphereSurface surf_;
  KernelMode mode_;
  CMatrix WGyT_;  // (3N x Ns): grad Phi(s - y_v)_j w_s
};

struct TdMap {
  std::vector<Vec3> points;
  std::vector<double> values;
  std::vector<double> imag_ratio;  // |Im| / |.| of the pre-Re bilinear form
  std::vector<bool> inside_B;
  std::string formula;
  std::string kernel_mode;
  double solve_residual = 0.0;
  double certificate = std::numeric_limits<double>::quiet_NaN();
  std::string certificate_kind;

  std::size_t size() const { return values.size(); }
  double max_imag_ratio() const {
    double m = 0.0;
    for (double v : imag_ratio) m = std::max(m, v);
    return m;
  }
};

namespace detail {

// Shared driver: `form(G, p)` returns the complex pre-Re value for sample p
// from the kernel columns of the current chunk; T = -Re(value).
template <class Form>
TdMap td_map_driver(const KernelField& kf, const std::vector<Vec3>& pts, std::string formula,
                    Form&& form, std::size_t chunk = 256) {
  TdMap map;
  map.points = pts;
  map.formula = std::move(formula);
  map.kernel_mode = to_string(kf.mode());
  map.values.resize(pts.size());
  map.imag_ratio.resize(pts.size());
  map.inside_B.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) map.inside_B[i] = kf.system().grid().shape.contains(pts[i]);
  for (std::size_t b = 0; b < pts.size(); b += chunk) {
    const std::size_t e = std::min(pts.size(), b + chunk);
    const std::vector<Vec3> sub(pts.begin() + static_cast<std::ptrdiff_t>(b),
                                pts.begin() + static_cast<std::ptrdiff_t>(e));
    const CMatrix G = kf.columns(sub);
    const std::vector<cplx> vals = form(G, map.solve_residual);
    for (std::size_t p = 0; p < sub.size(); ++p) {
      const cplx v = vals[p];
      map.values[b + p] = -v.real();
      const double mag = std::abs(v);
      map.imag_ratio[b + p] = mag > 0.0 ? std::abs(v.imag()) / mag : 0.0;
    }
  }
  return map;
}

// Columns 3p..3p+2 of G recombined as sum_k C(l, k) g_k for every p.
inline CMatrix recombine(const CMatrix& G, const CMat3& C) {
  CMatrix out(G.rows(), G.cols());
  const Eigen::Index np = G.cols() / 3;
  for (Eigen::Index p = 0; p < np; ++p) out.middleCols(3 * p, 3) = G.middleCols(3 * p, 3) * C.transpose();
  return out;
}

// Solve with the residual checked on a few columns (the direct path is exact
// up to round-off, the iterative path checks every column itself).
inline CMatrix solve_sampled(const ContrastSolver& solver, const CMatrix& B, double& residual) {
  const CMatrix X = solver.solve_core(B, false);
  const Eigen::Index n = B.cols();
  std::vector<Eigen::Index> idx{0, n / 2, n - 1};
  double worst = 0.0;
  for (Eigen::Index c : idx) {
    if (c < 0 || c >= n) continue;
    worst = std::max(worst, solver.core_residual(X.col(c), B.col(c)));
  }
  if (!(worst < 1e-8)) throw NumericalError("TD map: VIE solve residual above target", worst);
  residual = std::max(residual, worst);
  return X;
}

inline std::vector<cplx> column_pairs(const CMatrix& L, const CMatrix& R, double scale) {
  const Eigen::Index np = L.cols() / 3;
  std::vector<cplx> out(static_cast<std::size_t>(np));
  for (Eigen::Index p = 0; p < np; ++p) {
    cplx s = 0.0;
    for (int l = 0; l < 3; ++l) s += L.col(3 * p + l).dot(R.col(3 * p + l));
    out[static_cast<std::size_t>(p)] = scale * s;
  }
  return out;
}

}  // namespace detail

/// T(z) = -h^3 Re sum_ik (M_z)_ik <g_i, M_B g_k>, straight from the definition.
inline TdMap td_map_direct(const ContrastSolver& solver, const Mat3& Mz, const KernelField& kf,
                           const std::vector<Vec3>& pts) {
  const double h3 = kf.system().cell_volume();
  return detail::td_map_driver(kf, pts, "direct", [&](const CMatrix& G, double& res) {
    const CMatrix X = solver.apply_MB(G, false);
    res = std::max(res, 0.0);
    const Eigen::Index np = G.cols() / 3;
    std::vector<cplx> out(static_cast<std::size_t>(np));
    for (Eigen::Index p = 0; p < np; ++p) {
      cplx s = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
          if (Mz(i, k) != 0.0) s += Mz(i, k) * G.col(3 * p + i).dot(X.col(3 * p + k));
      out[static_cast<std::size_t>(p)] = h3 * s;
    }
    return out;
  });
}

/// Isotropic media: T(z) = -4 a^2 q q_z Re (K, (I - qR)^{-1} K), K = D_z G.
inline TdMap td_map_iso(const ContrastSolver& solver, const PolarizationTensor& trial,
                        const KernelField& kf, const std::vector<Vec3>& pts) {
  const auto& c = solver.contrast();
  if (solver.route() != MBRoute::normalized)
    throw DomainError("td_map_iso: requires the normalized solver route");
  if (!SymTensor3::from_matrix(c.A).is_isotropic(1e-12) ||
      !SymTensor3::from_matrix(c.A_tilde).is_isotropic(1e-12))
    throw DomainError("td_map_iso: true scatterer must be isotropic");
  const double a = c.A(0, 0), q = c.Q(0, 0);
  const double qz = trial.trial.Q(0, 0);
  const double h3 = kf.system().cell_volume();
  if (q == 0.0 || qz == 0.0) {
    return detail::td_map_driver(kf, pts, "iso", [&](const CMatrix& G, double&) {
      return std::vector<cplx>(static_cast<std::size_t>(G.cols() / 3), cplx(0.0));
    });
  }
  const CMat3 D = dz_factor(trial, DzMode::iso).cast<cplx>();
  return detail::td_map_driver(kf, pts, "iso", [&](const CMatrix& G, double& res) {
    const CMatrix K = detail::recombine(G, D);
    const CMatrix Y = detail::solve_sampled(solver, K, res);
    return detail::column_pairs(K, Y, 4.0 * a * a * q * qz * h3);
  });
}

/// Anisotropic scatterer in an isotropic background, isotropic trial:
/// T(z) = -4 a^2 q_z Re sum_l <conj(sigma) q K_l, R'[sigma q K_l]>, K = D_z G,
/// R' = (I - sigma q R q^T sigma)^{-1}.
inline TdMap td_map_aniso_iso(const ContrastSolver& solver, const PolarizationTensor& trial,
                              const KernelField& kf, const std::vector<Vec3>& pts) {
  const auto& c = solver.contrast();
  if (solver.route() != MBRoute::symmetric)
    throw DomainError("td_map_aniso_iso: requires the symmetric solver route");
  if (!SymTensor3::from_matrix(c.A).is_isotropic(1e-12))
    throw DomainError("td_map_aniso_iso: background must be isotropic");
  const double a = c.A(0, 0);
  const double qz = trial.trial.Q(0, 0);
  const double h3 = kf.system().cell_volume();
  if (c.is_zero() || qz == 0.0) {
    return detail::td_map_driver(kf, pts, "aniso_iso", [&](const CMatrix& G, double&) {
      return std::vector<cplx>(static_cast<std::size_t>(G.cols() / 3), cplx(0.0));
    });
  }
  const CMat3 D = dz_factor(trial, DzMode::iso).cast<cplx>();
  const CMat3 S = c.sigma().asDiagonal();
  const CMat3 qm = c.q_mat.cast<cplx>();
  return detail::td_map_driver(kf, pts, "aniso_iso", [&](const CMatrix& G, double& res) {
    const CMatrix K = detail::recombine(G, D);
    CMatrix Fs(K.rows(), K.cols()), Fc(K.rows(), K.cols());
    for (Eigen::Index col = 0; col < K.cols(); ++col) {
      Fs.col(col) = detail::blockwise(S * qm, K.col(col));
      Fc.col(col) = detail::blockwise(S.conjugate() * qm, K.col(col));
    }
    const CMatrix Y = detail::solve_sampled(solver, Fs, res);
    return detail::column_pairs(Fc, Y, 4.0 * a * a * qz * h3);
  });
}

/// General anisotropic media:
/// T(z) = -4 Re sum_l <conj(sigma) Z conj(Y) G_l, R'[sigma Z Y G_l]>,
/// Z = q A^{1/2}, Y = D_z sigma_z q_z A^{1/2}.
inline TdMap td_map_general(const ContrastSolver& solver, const PolarizationTensor& trial,
                            const KernelField& kf, const std::vector<Vec3>& pts) {
  const auto& c = solver.contrast();
  if (solver.route() != MBRoute::symmetric)
    throw DomainError("td_map_general: requires the symmetric solver route");
  if ((trial.A - c.A).cwiseAbs().maxCoeff() > 1e-12 * c.A.norm())
    throw DomainError("td_map_general: trial and true backgrounds differ");
  const double h3 = kf.system().cell_volume();
  if (c.is_zero() || trial.trial.is_zero()) {
    return detail::td_map_driver(kf, pts, "general", [&](const CMatrix& G, double&) {
      return std::vector<cplx>(static_cast<std::size_t>(G.cols() / 3), cplx(0.0));
    });
  }
  const Mat3 ra = spd_sqrt(c.A);
  const CMat3 Dz = dz_factor(trial, DzMode::aniso).cast<cplx>();
  const CMat3 Y = Dz * trial.trial.sigma().asDiagonal() * (trial.trial.q_mat * ra).cast<cplx>();
  const CMat3 S = c.sigma().asDiagonal();
  const CMat3 Z = (c.q_mat * ra).cast<cplx>();
  return detail::td_map_driver(kf, pts, "general", [&](const CMatrix& G, double& res) {
    const CMatrix GY = detail::recombine(G, Y);
    const CMatrix GYc = detail::recombine(G, Y.conjugate());
    CMatrix Fs(G.rows(), G.cols()), Fc(G.rows(), G.cols());
    for (Eigen::Index col = 0; col < G.cols(); ++col) {
      Fs.col(col) = detail::blockwise(S * Z, GY.col(col));
      Fc.col(col) = detail::blockwise(S.conjugate() * Z, GYc.col(col));
    }
    const CMatrix X = detail::solve_sampled(solver, Fs, res);
    return detail::column_pairs(Fc, X, 4.0 * h3);
  });
}

// ---------------------------------------------------------------------------
// Finite-size check of the leading-order expansion

struct FiniteDeltaRow {
  double delta = 0.0;
  std::size_t voxels = 0;
  double lhs = 0.0;           // -Re double integral of conj(E u_delta) E u_B
  double T = 0.0;             // TD with the discrete polarization of the trial pattern
  double T_closed = 0.0;      // TD with the closed-form polarization
  double ratio = 0.0;         // lhs / (delta^3 T)
  double ratio_closed = 0.0;  // lhs / (delta^3 T_closed)
};

/// Scattered field matrix u^s(s'; s) on the surface nodes (rows s', columns s).
inline CMatrix scattered_matrix(const ContrastSolver& solver, const SphereSurface& surf) {
  const auto& sys = solver.system();
  CMatrix Aop(sys.dim(), static_cast<Eigen::Index>(surf.size()));
  for (std::size_t s = 0; s < surf.size(); ++s)
    Aop.col(static_cast<Eigen::Index>(s)) = point_source_gradient(sys, surf.points[s]);
  const CMatrix H = solver.apply_MB(Aop, false);
  return -sys.cell_volume() * (Aop.transpose() * H);
}

/// For each trial ball radius delta centred at z: solves the trial scatterer on
/// its own, forms -Re int int conj(E u_delta) E u_B through the harmonic basis
/// and divides by delta^3 T(z).
inline std::vector<FiniteDeltaRow> td_finite_delta_check(
    const ContrastSolver& true_solver, const SphereSurface& surf, const SymTensor3& A_z,
    const Vec3& z, const std::vector<double>& deltas, int cells_across, int nmax) {
  detail::require_closed(surf, "td_finite_delta_check");
  detail::require_resolved(surf, nmax, "td_finite_delta_check");
  if (cells_across < 5)
    throw DomainError("td_finite_delta_check: trial ball under-resolved (need more than 4 cells across)");
  const auto& sys = true_solver.system();
  const Background& bg = sys.bg();
  const double kappa = bg.kappa();
  const SymTensor3 A = SymTensor3::from_matrix(bg.A());

  const CMatrix UB = scattered_matrix(true_solver, surf);
  const CMatrix CB = e_apply_columns(project_traces(surf, UB, nmax), nmax, kappa, surf.radius);

  const double hu = 2.0 / cells_across;
  const ScattererGrid unit = voxelize(Shape::ball(1.0), hu);
  const PolarizationTensor pd = mz_general(A, A_z, unit, sys.options());
  const PolarizationTensor pc = mz_ellipsoid(A, A_z, Vec3::Ones());
  const KernelField kf(true_solver.system_ptr(), surf, KernelMode::quadrature);
  const double Td = td_map_direct(true_solver, pd.M, kf, {z}).values[0];
  const double Tc = td_map_direct(true_solver, pc.M, kf, {z}).values[0];

  std::vector<FiniteDeltaRow> rows;
  for (double delta : deltas) {
    if (!(delta > 0.0)) throw DomainError("td_finite_delta_check: delta must be positive");
    if (sys.grid().shape.distance(z) <= delta)
      throw DomainError("td_finite_delta_check: trial ball overlaps the scatterer");
    const ScattererGrid tg = voxelize(Shape::ball(delta, z), delta * hu);
    if (tg.size() != unit.size())
      throw NumericalError("td_finite_delta_check: trial pattern differs from the unit pattern",
                           static_cast<double>(tg.size()));
    auto tsys = assemble(tg, bg, sys.options());
    const ContrastSolver ts(tsys, aniso_contrast(A, A_z), MBRoute::normalized);
    const CMatrix Ud = scattered_matrix(ts, surf);
    const CMatrix Cd = e_apply_columns(project_traces(surf, Ud, nmax), nmax, kappa, surf.radius);
    cplx acc = 0.0;
    for (std::size_t s = 0; s < surf.size(); ++s)
      acc += surf.weights[s] * Cd.col(static_cast<Eigen::Index>(s)).dot(CB.col(static_cast<Eigen::Index>(s)));
    acc *= surf.radius * surf.radius;
    FiniteDeltaRow r;
    r.delta = delta;
    r.voxels = tg.size();
    r.lhs = -acc.real();
    r.T = Td;
    r.T_closed = Tc;
    const double d3 = delta * delta * delta;
    r.ratio = r.lhs / (d3 * Td);
    r.ratio_closed = r.lhs / (d3 * Tc);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace tdscope
