#pragma once

// Collocation discretisation of the volume integral equation with
// piecewise-constant densities on cubic voxels, its solvers, and the
// solution operator M_B.

#include "tdscope/greens.hpp"
#include "tdscope/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <thread>
#include <vector>

namespace tdscope {

struct VieOptions {
  SelfTermModel self_model = SelfTermModel::cube;
  // Isotropic backgrounds: cell pairs with all |offset| <= near_cells use the
  // cell-averaged static kernel instead of the midpoint value (0 disables).
  int near_cells = 6;
  std::size_t max_voxels = 20000;
  std::size_t dense_limit = 3000;  // voxels; above this GMRES is used
  int gmres_restart = 80;
  int gmres_max_iter = 2000;
  double gmres_tol = 1e-11;
  unsigned threads = 1;
};

namespace detail {

// Runs f(begin, end) over [0, n) split into contiguous chunks.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  if (threads <= 1 || n < 2 * threads) {
    f(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&f, b, e] { f(b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Discretised grad W_kappa on a voxel grid. Blocks depend only on the lattice
/// offset between cells, so they are stored once per offset.
class VieSystem {
 public:
  VieSystem(ScattererGrid grid, Background bg, VieOptions opts = {})
      : grid_(std::move(grid)), bg_(std::move(bg)), opts_(opts) {
    if (grid_.size() == 0) throw DomainError("assemble: empty grid");
    if (grid_.size() > opts_.max_voxels)
      throw ResourceError("assemble: " + std::to_string(grid_.size()) +
                          " voxels exceeds the configured cap of " +
                          std::to_string(opts_.max_voxels));
    std::array<int, 3> lo{INT32_MAX, INT32_MAX, INT32_MAX}, hi{INT32_MIN, INT32_MIN, INT32_MIN};
    for (const auto& ix : grid_.index)
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], ix[d]);
        hi[d] = std::max(hi[d], ix[d]);
      }
    for (int d = 0; d < 3; ++d) ext_[d] = hi[d] - lo[d] + 1;
    local_.resize(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i)
      for (int d = 0; d < 3; ++d) local_[i][d] = grid_.index[i][d] - lo[d];

    const double h = grid_.h, h3 = h * h * h;
    self_ = cell_self_term(bg_, h, opts_.self_model);
    const std::size_t sx = 2 * ext_[0] - 1, sy = 2 * ext_[1] - 1, sz = 2 * ext_[2] - 1;
    table_.assign(6 * sx * sy * sz, cplx(0.0));
    detail::parallel_for(sx, opts_.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t a = b; a < e; ++a)
        for (std::size_t c = 0; c < sy; ++c)
          for (std::size_t d = 0; d < sz; ++d) {
            const int di = static_cast<int>(a) - (ext_[0] - 1);
            const int dj = static_cast<int>(c) - (ext_[1] - 1);
            const int dk = static_cast<int>(d) - (ext_[2] - 1);
            const CMat3 blk = (di == 0 && dj == 0 && dk == 0)
                                  ? self_
                                  : offset_block({di, dj, dk}, h, h3);
            cplx* t = &table_[6 * ((a * sy + c) * sz + d)];
            t[0] = blk(0, 0);
            t[1] = blk(1, 1);
            t[2] = blk(2, 2);
            t[3] = 0.5 * (blk(0, 1) + blk(1, 0));
            t[4] = 0.5 * (blk(0, 2) + blk(2, 0));
            t[5] = 0.5 * (blk(1, 2) + blk(2, 1));
          }
    });
  }

  const ScattererGrid& grid() const { return grid_; }
  const Background& bg() const { return bg_; }
  const VieOptions& options() const { return opts_; }
  std::size_t voxels() const { return grid_.size(); }
  Eigen::Index dim() const { return static_cast<Eigen::Index>(3 * grid_.size()); }
  double cell_volume() const { return grid_.cell_volume(); }
  const CMat3& self_term() const { return self_; }

  CMat3 block(std::size_t i, std::size_t j) const {
    const cplx* t = entry(i, j);
    CMat3 m;
    m << t[0], t[3], t[4], t[3], t[1], t[5], t[4], t[5], t[2];
    return m;
  }

  /// y = grad W_kappa x.
  void apply_gradW(const CVector& x, CVector& y) const {
    if (x.size() != dim()) throw DomainError("apply_gradW: size mismatch");
    y.resize(dim());
    const std::size_t n = voxels();
    detail::parallel_for(n, opts_.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        cplx a0 = 0.0, a1 = 0.0, a2 = 0.0;
        const auto& li = local_[i];
        for (std::size_t j = 0; j < n; ++j) {
          const cplx* t = entry_local(li, local_[j]);
          const cplx x0 = x[3 * j], x1 = x[3 * j + 1], x2 = x[3 * j + 2];
          a0 += t[0] * x0 + t[3] * x1 + t[4] * x2;
          a1 += t[3] * x0 + t[1] * x1 + t[5] * x2;
          a2 += t[4] * x0 + t[5] * x1 + t[2] * x2;
        }
        y[3 * i] = a0;
        y[3 * i + 1] = a1;
        y[3 * i + 2] = a2;
      }
    });
  }

  CVector gradW(const CVector& x) const {
    CVector y;
    apply_gradW(x, y);
    return y;
  }

 private:
  CMat3 offset_block(const std::array<int, 3>& d, double h, double h3) const {
    const Vec3 r = h * Vec3(d[0], d[1], d[2]);
    const int m = std::max({std::abs(d[0]), std::abs(d[1]), std::abs(d[2])});
    if (!bg_.is_isotropic() || m > opts_.near_cells) return hess_phi(bg_, r) * h3;
    CMat3 blk = (cell_pair_static(d) / bg_.a()).cast<cplx>();
    if (bg_.kappa() > 0.0) blk += (hess_phi(bg_, r) - hess_phi(stat_, r)) * h3;
    return blk;
  }

  const cplx* entry_local(const std::array<int, 3>& a, const std::array<int, 3>& b) const {
    const std::size_t di = static_cast<std::size_t>(a[0] - b[0] + ext_[0] - 1);
    const std::size_t dj = static_cast<std::size_t>(a[1] - b[1] + ext_[1] - 1);
    const std::size_t dk = static_cast<std::size_t>(a[2] - b[2] + ext_[2] - 1);
    const std::size_t sy = 2 * ext_[1] - 1, sz = 2 * ext_[2] - 1;
    return &table_[6 * ((di * sy + dj) * sz + dk)];
  }
  const cplx* entry(std::size_t i, std::size_t j) const { return entry_local(local_[i], local_[j]); }

  ScattererGrid grid_;
  Background bg_;
  VieOptions opts_;
  std::array<int, 3> ext_{};
  std::vector<std::array<int, 3>> local_;
  std::vector<cplx> table_;
  CMat3 self_;
  Background stat_ = bg_.with_kappa(0.0);
};

inline std::shared_ptr<const VieSystem> assemble(const ScattererGrid& grid, const Background& bg,
                                                 VieOptions opts = {}) {
  return std::make_shared<const VieSystem>(grid, bg, opts);
}

// ---------------------------------------------------------------------------
// Pointwise-composed operators  x -> diag x - left . gradW(right . x)

struct PointOp {
  CMat3 diag = CMat3::Identity();
  CMat3 left = CMat3::Zero();
  CMat3 right = CMat3::Identity();
};

namespace detail {

inline CVector blockwise(const CMat3& m, const CVector& x) {
  CVector y(x.size());
  const Eigen::Index n = x.size() / 3;
  for (Eigen::Index i = 0; i < n; ++i) y.segment<3>(3 * i) = m * x.segment<3>(3 * i);
  return y;
}

}  // namespace detail

inline CVector apply_op(const VieSystem& sys, const PointOp& op, const CVector& x) {
  const CVector w = sys.gradW(detail::blockwise(op.right, x));
  return detail::blockwise(op.diag, x) - detail::blockwise(op.left, w);
}

/// Adjoint apply; grad W is complex symmetric so its adjoint is conj(W conj(.)).
inline CVector apply_op_adjoint(const VieSystem& sys, const PointOp& op, const CVector& x) {
  const CVector u = detail::blockwise(op.left.adjoint(), x);
  const CVector w = sys.gradW(u.conjugate()).conjugate();
  return detail::blockwise(op.diag.adjoint(), x) - detail::blockwise(op.right.adjoint(), w);
}

inline CMatrix dense_matrix(const VieSystem& sys, const PointOp& op) {
  const Eigen::Index n = static_cast<Eigen::Index>(sys.voxels());
  CMatrix M(3 * n, 3 * n);
  detail::parallel_for(static_cast<std::size_t>(n), sys.options().threads,
                       [&](std::size_t b, std::size_t e) {
                         for (Eigen::Index j = static_cast<Eigen::Index>(b);
                              j < static_cast<Eigen::Index>(e); ++j)
                           for (Eigen::Index i = 0; i < n; ++i) {
                             CMat3 blk = -op.left *
                                         sys.block(static_cast<std::size_t>(i),
                                                   static_cast<std::size_t>(j)) *
                                         op.right;
                             if (i == j) blk += op.diag;
                             M.block<3, 3>(3 * i, 3 * j) = blk;
                           }
                       });
  return M;
}

/// Operators of the formulation, as pointwise compositions with grad W.
namespace ops {

/// T = I - (A_tilde - A) grad W.
inline PointOp T(const AnisoContrast& c) {
  return {CMat3::Identity(), c.jump().cast<cplx>(), CMat3::Identity()};
}
/// I - Q R_kappa.
inline PointOp I_minus_QR(const AnisoContrast& c, const Background& bg) {
  const Mat3 Q = c.Q;
  return {(Mat3::Identity() - Q).cast<cplx>(), (2.0 * Q * bg.sqrtA()).cast<cplx>(),
          bg.sqrtA().cast<cplx>()};
}
/// I - sigma q R_kappa q^T sigma.
inline PointOp I_minus_sqRqs(const AnisoContrast& c, const Background& bg) {
  const CMat3 s = c.sigma().asDiagonal();
  const CMat3 q = c.q_mat.cast<cplx>();
  return {CMat3::Identity() - s * q * q.transpose() * s, 2.0 * s * q * bg.sqrtA().cast<cplx>(),
          bg.sqrtA().cast<cplx>() * q.transpose() * s};
}
/// R_kappa = I + 2 A^{1/2} grad W A^{1/2}.
inline PointOp R(const Background& bg) {
  return {CMat3::Identity(), (-2.0 * bg.sqrtA()).cast<cplx>(), bg.sqrtA().cast<cplx>()};
}
/// Q R_kappa.
inline PointOp QR(const AnisoContrast& c, const Background& bg) {
  return {c.Q.cast<cplx>(), (-2.0 * c.Q * bg.sqrtA()).cast<cplx>(), bg.sqrtA().cast<cplx>()};
}
/// q R_kappa q^T.
inline PointOp qRq(const AnisoContrast& c, const Background& bg) {
  const Mat3& q = c.q_mat;
  return {(q * q.transpose()).cast<cplx>(), (-2.0 * q * bg.sqrtA()).cast<cplx>(),
          (bg.sqrtA() * q.transpose()).cast<cplx>()};
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Linear solver: dense LU below the voxel limit, restarted GMRES above.

class OperatorSolver {
 public:
  OperatorSolver(std::shared_ptr<const VieSystem> sys, PointOp op)
      : sys_(std::move(sys)), op_(std::move(op)) {
    if (sys_->voxels() <= sys_->options().dense_limit) {
      CMatrix M = dense_matrix(*sys_, op_);
      lu_ = std::make_unique<Eigen::PartialPivLU<CMatrix>>(std::move(M));
    }
  }

  bool direct() const { return static_cast<bool>(lu_); }
  const VieSystem& system() const { return *sys_; }
  const PointOp& op() const { return op_; }
  double last_residual() const { return last_residual_; }
  int last_iterations() const { return last_iters_; }

  CVector apply(const CVector& x) const { return apply_op(*sys_, op_, x); }

  double residual(const CVector& x, const CVector& b) const {
    const double nb = b.norm();
    const double r = (apply(x) - b).norm();
    return nb > 0.0 ? r / nb : r;
  }

  /// Solves op x = b; throws NumericalError if the residual target is missed.
  CVector solve(const CVector& b) const {
    if (b.size() != sys_->dim()) throw DomainError("solve: size mismatch");
    if (!b.allFinite()) throw DomainError("solve: right-hand side is not finite");
    if (b.norm() == 0.0) {
      last_residual_ = 0.0;
      return CVector::Zero(b.size());
    }
    CVector x;
    double target;
    if (lu_) {
      x = lu_->solve(b);
      target = 1e-10;
    } else {
      x = gmres(b);
      target = 1e-8;
    }
    last_residual_ = residual(x, b);
    if (!(last_residual_ < target))
      throw NumericalError("VIE solve residual above target", last_residual_);
    return x;
  }

  /// Column-wise solve. The direct path solves all columns at once and checks
  /// the residual of the whole block.
  CMatrix solve(const CMatrix& B) const {
    if (!lu_) {
      CMatrix X(B.rows(), B.cols());
      for (Eigen::Index c = 0; c < B.cols(); ++c) X.col(c) = solve(CVector(B.col(c)));
      return X;
    }
    CMatrix X = lu_->solve(B);
    double worst = 0.0;
    for (Eigen::Index c = 0; c < B.cols(); ++c) {
      const double nb = B.col(c).norm();
      if (nb == 0.0) continue;
      worst = std::max(worst, residual(X.col(c), B.col(c)));
    }
    last_residual_ = worst;
    if (!(worst < 1e-10)) throw NumericalError("VIE block solve residual above target", worst);
    return X;
  }

  /// Solve without the per-column residual matvec (used when the caller
  /// checks a sample of columns itself).
  CMatrix solve_unchecked(const CMatrix& B) const {
    if (!lu_) return solve(B);
    return lu_->solve(B);
  }

 private:
  CVector gmres(const CVector& b) const {
    const auto& o = sys_->options();
    const int m = o.gmres_restart;
    const double nb = b.norm();
    CVector x = CVector::Zero(b.size());
    int total = 0;
    while (total < o.gmres_max_iter) {
      CVector r = b - apply(x);
      double beta = r.norm();
      if (beta / nb < o.gmres_tol) break;
      std::vector<CVector> V;
      V.reserve(static_cast<std::size_t>(m) + 1);
      V.push_back(r / beta);
      CMatrix H = CMatrix::Zero(m + 1, m);
      std::vector<cplx> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m));
      Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
      g(0) = beta;
      int k = 0;
      for (; k < m && total < o.gmres_max_iter; ++k, ++total) {
        CVector w = apply(V[static_cast<std::size_t>(k)]);
        for (int j = 0; j <= k; ++j) {
          H(j, k) = V[static_cast<std::size_t>(j)].dot(w);
          w -= H(j, k) * V[static_cast<std::size_t>(j)];
        }
        H(k + 1, k) = w.norm();
        if (std::abs(H(k + 1, k)) > 0.0) V.push_back(w / H(k + 1, k).real());
        for (int j = 0; j < k; ++j) {
          const cplx t = std::conj(cs[j]) * H(j, k) + std::conj(sn[j]) * H(j + 1, k);
          H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
          H(j, k) = t;
        }
        const double den = std::hypot(std::abs(H(k, k)), std::abs(H(k + 1, k)));
        cs[k] = den > 0 ? H(k, k) / den : cplx(1.0);
        sn[k] = den > 0 ? H(k + 1, k) / den : cplx(0.0);
        H(k, k) = den;
        H(k + 1, k) = 0.0;
        g(k + 1) = -sn[k] * g(k);
        g(k) = std::conj(cs[k]) * g(k);
        if (std::abs(g(k + 1)) / nb < o.gmres_tol || V.size() <= static_cast<std::size_t>(k + 1)) {
          ++k;
          ++total;
          break;
        }
      }
      // Back substitution on the k x k triangle.
      Eigen::VectorXcd y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
      for (int j = 0; j < k; ++j) x += y(j) * V[static_cast<std::size_t>(j)];
    }
    last_iters_ = total;
    return x;
  }

  std::shared_ptr<const VieSystem> sys_;
  PointOp op_;
  std::unique_ptr<Eigen::PartialPivLU<CMatrix>> lu_;
  mutable double last_residual_ = 0.0;
  mutable int last_iters_ = 0;
};

// ---------------------------------------------------------------------------
// Densities and the solution operator M_B

/// Which algebraically equivalent expression of M_B to evaluate.
enum class MBRoute {
  direct,      // T^{-1} (A_tilde - A)
  normalized,  // 2 A^{1/2} (I - Q R)^{-1} Q A^{1/2}
  symmetric    // 2 A^{1/2} q^T sigma (I - sigma q R q^T sigma)^{-1} sigma q A^{1/2}
};

/// Solver bound to a true scatterer contrast.
class ContrastSolver {
 public:
  ContrastSolver(std::shared_ptr<const VieSystem> sys, AnisoContrast contrast,
                 MBRoute route = MBRoute::normalized)
      : sys_(std::move(sys)), c_(std::move(contrast)), route_(route) {
    if ((c_.A - sys_->bg().A()).cwiseAbs().maxCoeff() > 1e-12 * sys_->bg().A().norm())
      throw DomainError("ContrastSolver: contrast background differs from the system background");
    if (c_.is_zero()) return;
    switch (route_) {
      case MBRoute::direct: solver_.emplace(sys_, ops::T(c_)); break;
      case MBRoute::normalized: solver_.emplace(sys_, ops::I_minus_QR(c_, sys_->bg())); break;
      case MBRoute::symmetric: solver_.emplace(sys_, ops::I_minus_sqRqs(c_, sys_->bg())); break;
    }
  }

  ContrastSolver(std::shared_ptr<const VieSystem> sys, const IsoContrast& c,
                 MBRoute route = MBRoute::normalized)
      : ContrastSolver(std::move(sys), to_aniso(c), route) {}

  const VieSystem& system() const { return *sys_; }
  std::shared_ptr<const VieSystem> system_ptr() const { return sys_; }
  const AnisoContrast& contrast() const { return c_; }
  MBRoute route() const { return route_; }
  bool direct() const { return solver_ && solver_->direct(); }
  double last_residual() const { return solver_ ? solver_->last_residual() : 0.0; }

  /// M_B applied to a block of fields (columns), one 3-vector per voxel.
  CMatrix apply_MB(const CMatrix& G, bool checked = true) const {
    if (G.rows() != sys_->dim()) throw DomainError("apply_MB: size mismatch");
    if (!G.allFinite()) throw DomainError("apply_MB: input is not finite");
    if (!solver_) return CMatrix::Zero(G.rows(), G.cols());
    const Mat3& ra = sys_->bg().sqrtA();
    CMat3 pre, post;
    switch (route_) {
      case MBRoute::direct:
        pre = c_.jump().cast<cplx>();
        post = CMat3::Identity();
        break;
      case MBRoute::normalized:
        pre = (c_.Q * ra).cast<cplx>();
        post = (2.0 * ra).cast<cplx>();
        break;
      case MBRoute::symmetric: {
        const CMat3 s = c_.sigma().asDiagonal();
        pre = s * (c_.q_mat * ra).cast<cplx>();
        post = 2.0 * (ra * c_.q_mat.transpose()).cast<cplx>() * s;
        break;
      }
    }
    CMatrix rhs(G.rows(), G.cols());
    for (Eigen::Index c = 0; c < G.cols(); ++c) rhs.col(c) = detail::blockwise(pre, G.col(c));
    const CMatrix X = checked ? solver_->solve(rhs) : solver_->solve_unchecked(rhs);
    CMatrix out(G.rows(), G.cols());
    for (Eigen::Index c = 0; c < G.cols(); ++c) out.col(c) = detail::blockwise(post, X.col(c));
    return out;
  }

  CVector apply_MB(const CVector& g) const { return apply_MB(CMatrix(g)).col(0); }

  /// Inverse of the route's core operator (I - QR, I - sigma q R q^T sigma,
  /// or T) applied column-wise; zero for a zero contrast.
  CMatrix solve_core(const CMatrix& B, bool checked = true) const {
    if (!solver_) return CMatrix::Zero(B.rows(), B.cols());
    return checked ? solver_->solve(B) : solver_->solve_unchecked(B);
  }

  /// Residual of the core operator on sampled columns (max relative).
  double core_residual(const CMatrix& X, const CMatrix& B) const {
    if (!solver_) return 0.0;
    double worst = 0.0;
    for (Eigen::Index c = 0; c < B.cols(); ++c)
      if (B.col(c).norm() > 0.0) worst = std::max(worst, solver_->residual(X.col(c), B.col(c)));
    return worst;
  }

  /// Density h solving T h = (A_tilde - A) grad u, with the residual checked
  /// against T itself.
  CVector solve_density(const CVector& incident_grad) const {
    const CVector h = apply_MB(incident_grad);
    const CVector rhs = detail::blockwise(c_.jump().cast<cplx>(), incident_grad);
    const double nr = rhs.norm();
    last_T_residual_ = nr > 0.0 ? (apply_op(*sys_, ops::T(c_), h) - rhs).norm() / nr : 0.0;
    const double target = direct() || !solver_ ? 1e-10 : 1e-8;
    if (!(last_T_residual_ < target))
      throw NumericalError("solve_density: residual above target", last_T_residual_);
    return h;
  }

  double last_T_residual() const { return last_T_residual_; }

 private:
  std::shared_ptr<const VieSystem> sys_;
  AnisoContrast c_;
  MBRoute route_;
  std::optional<OperatorSolver> solver_;
  mutable double last_T_residual_ = 0.0;
};

/// Born approximation of the density: (A_tilde - A) grad u.
inline CVector born_density(const AnisoContrast& c, const CVector& incident_grad) {
  return detail::blockwise(c.jump().cast<cplx>(), incident_grad);
}
inline CVector born_density(const IsoContrast& c, const CVector& incident_grad) {
  return born_density(to_aniso(c), incident_grad);
}

/// Gradient of the point-source incident field Phi(x - s) at every voxel.
inline CVector point_source_gradient(const VieSystem& sys, const Vec3& s) {
  CVector g(sys.dim());
  const auto& c = sys.grid().centers;
  for (std::size_t v = 0; v < c.size(); ++v) g.segment<3>(3 * static_cast<Eigen::Index>(v)) = grad_phi(sys.bg(), c[v] - s);
  return g;
}

/// Constant field e repeated on every voxel.
inline CVector constant_field(const VieSystem& sys, const CVec3& e) {
  CVector g(sys.dim());
  for (std::size_t v = 0; v < sys.voxels(); ++v) g.segment<3>(3 * static_cast<Eigen::Index>(v)) = e;
  return g;
}

/// u^s(x) = sum_v grad Phi(x - y_v) . h_v h^3, for x outside every voxel.
inline cplx scattered_field(const VieSystem& sys, const CVector& h, const Vec3& x) {
  if (h.size() != sys.dim()) throw DomainError("scattered_field: size mismatch");
  const double half = 0.5 * sys.grid().h;
  cplx u = 0.0;
  const auto& c = sys.grid().centers;
  for (std::size_t v = 0; v < c.size(); ++v) {
    const Vec3 r = x - c[v];
    if (r.cwiseAbs().maxCoeff() <= half)
      throw DomainError("scattered_field: evaluation point lies inside the scatterer");
    u += grad_phi(sys.bg(), r).cwiseProduct(h.segment<3>(3 * static_cast<Eigen::Index>(v))).sum();
  }
  return u * sys.cell_volume();
}

// ---------------------------------------------------------------------------
// Operator norms

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
};

/// Largest singular value of op: Lanczos on op^H op with full
/// reorthogonalisation from a seeded random vector. Stops once the Ritz
/// residual of the top Ritz value is below tol times that value, or once that
/// value has moved by less than `stall` (relative) over the last 10 steps;
/// the second test is the one that fires when the top of the spectrum is a
/// cluster (R_0 on a fine grid). Ritz values approach from below, so the
/// estimate never exceeds the norm.
inline NormEstimate operator_norm(const VieSystem& sys, const PointOp& op, std::uint64_t seed = 1,
                                  double tol = 1e-8, int max_iter = 500, double stall = 1e-7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CVector x(sys.dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = cplx(u(rng), u(rng));
  x.normalize();
  const int m = static_cast<int>(std::min<Eigen::Index>(max_iter, sys.dim()));
  std::vector<CVector> V{x};
  std::vector<double> alpha, beta;
  double theta = 0.0;
  std::vector<double> history;
  for (int k = 0; k < m; ++k) {
    CVector w = apply_op_adjoint(sys, op, apply_op(sys, op, V.back()));
    alpha.push_back(V.back().dot(w).real());
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& v : V) w -= v.dot(w) * v;
    const double b = w.norm();
    const Eigen::Index n = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      T(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < n) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    theta = es.eigenvalues()(n - 1);
    if (theta <= 0.0) return {0.0, k + 1};
    const double resid = b * std::abs(es.eigenvectors()(n - 1, n - 1));
    history.push_back(theta);
    if (resid <= tol * theta || b <= 1e-14 * theta) return {std::sqrt(theta), k + 1};
    if (k >= 10 && theta - history[history.size() - 11] <= stall * theta) return {std::sqrt(theta), k + 1};
    beta.push_back(b);
    V.push_back(w / b);
  }
  throw NumericalError("operator_norm: Lanczos did not converge", std::sqrt(std::max(theta, 0.0)));
}

enum class NormKind { R_kappa, qR_kappa, qRq };

inline NormEstimate operator_norm(const VieSystem& sys, NormKind which,
                                  const AnisoContrast& c, std::uint64_t seed = 1) {
  switch (which) {
    case NormKind::R_kappa: return operator_norm(sys, ops::R(sys.bg()), seed);
    case NormKind::qR_kappa: {
      if (c.is_zero()) return {0.0, 0};
      return operator_norm(sys, ops::QR(c, sys.bg()), seed);
    }
    case NormKind::qRq: {
      if (c.is_zero()) return {0.0, 0};
      return operator_norm(sys, ops::qRq(c, sys.bg()), seed);
    }
  }
  return {};
}

}  // namespace tdscope
