#pragma once

// Constitutive tensors and the contrast parametrisations used by the
// volume-integral formulation: scalar (beta, q) for isotropic media and the
// matrix contrast Q with its signed factorisation Q = q^T sigma^2 q.

#include "tdscope/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>

namespace tdscope {

/// Real symmetric 3x3 tensor stored as its six independent entries
/// (xx, yy, zz, xy, xz, yz), so symmetry holds exactly.
class SymTensor3 {
 public:
  SymTensor3() : e_{1, 1, 1, 0, 0, 0} {}
  SymTensor3(double xx, double yy, double zz, double xy = 0, double xz = 0,
             double yz = 0)
      : e_{xx, yy, zz, xy, xz, yz} {}

  static SymTensor3 isotropic(double a) { return {a, a, a}; }
  static SymTensor3 diagonal(double a, double b, double c) { return {a, b, c}; }

  /// Throws DomainError unless m is symmetric to 1e-12 relative.
  static SymTensor3 from_matrix(const Mat3& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw DomainError("SymTensor3: matrix is not symmetric");
    return {m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)),
            0.5 * (m(0, 2) + m(2, 0)), 0.5 * (m(1, 2) + m(2, 1))};
  }

  Mat3 matrix() const {
    Mat3 m;
    m << e_[0], e_[3], e_[4], e_[3], e_[1], e_[5], e_[4], e_[5], e_[2];
    return m;
  }

  const std::array<double, 6>& entries() const { return e_; }

  Vec3 eigenvalues() const {
    return Eigen::SelfAdjointEigenSolver<Mat3>(matrix(), Eigen::EigenvaluesOnly)
        .eigenvalues();
  }

  bool is_positive_definite() const { return eigenvalues().minCoeff() > 0.0; }

  /// True when the tensor is a multiple of the identity.
  bool is_isotropic(double tol = 1e-14) const {
    const double a = e_[0];
    const double s = std::max(1.0, std::abs(a)) * tol;
    return std::abs(e_[1] - a) <= s && std::abs(e_[2] - a) <= s &&
           std::abs(e_[3]) <= s && std::abs(e_[4]) <= s && std::abs(e_[5]) <= s;
  }

  friend bool operator==(const SymTensor3&, const SymTensor3&) = default;

 private:
  std::array<double, 6> e_;
};

inline void require_spd(const Mat3& m, const char* what) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError(std::string(what) + ": matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> es(m, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw DomainError(std::string(what) + ": matrix is not positive definite");
}

/// Symmetric square root of an SPD matrix via eigendecomposition.
inline Mat3 spd_sqrt(const Mat3& m) {
  require_spd(m, "spd_sqrt");
  Eigen::SelfAdjointEigenSolver<Mat3> es(m);
  const Mat3& v = es.eigenvectors();
  return v * es.eigenvalues().cwiseSqrt().asDiagonal() * v.transpose();
}

inline Mat3 spd_inv_sqrt(const Mat3& m) {
  require_spd(m, "spd_inv_sqrt");
  Eigen::SelfAdjointEigenSolver<Mat3> es(m);
  const Mat3& v = es.eigenvectors();
  return v * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         v.transpose();
}

/// Lower-triangular L with L L^T = m.
inline Mat3 choleski_sqrt(const Mat3& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("choleski_sqrt: matrix is not symmetric");
  Eigen::LLT<Mat3> llt(m);
  if (llt.info() != Eigen::Success)
    throw DomainError("choleski_sqrt: pivot failure, matrix is not SPD");
  return llt.matrixL();
}

struct IsoContrast {
  double a = 1.0;        // background coefficient
  double a_tilde = 1.0;  // inclusion coefficient
  double beta = 0.0;     // a_tilde / a - 1
  double q = 0.0;        // beta / (beta + 2)
};

inline IsoContrast iso_contrast(double a, double a_tilde) {
  if (!(a > 0.0) || !(a_tilde > 0.0))
    throw DomainError("iso_contrast: coefficients must be positive");
  IsoContrast c;
  c.a = a;
  c.a_tilde = a_tilde;
  c.beta = a_tilde / a - 1.0;
  c.q = c.beta / (c.beta + 2.0);
  return c;
}

/// Signed factorisation Q = q_mat^T diag(sigma2) q_mat.
struct QFactor {
  Mat3 q_mat = Mat3::Zero();
  Vec3 sigma2 = Vec3::Zero();  // entries in {-1, 0, +1}
};

namespace detail {

// Orders eigenpairs so that eigenvector k has its dominant component on axis
// k. A diagonal input therefore keeps its own axis order.
inline std::array<int, 3> axis_aligned_order(const Mat3& v) {
  std::array<int, 3> perm{0, 1, 2}, best = perm;
  double best_score = -1.0;
  do {
    double s = 1.0;
    for (int axis = 0; axis < 3; ++axis) s *= std::abs(v(axis, perm[axis]));
    if (s > best_score + 1e-15) {
      best_score = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace detail

inline QFactor factor_Q(const Mat3& Q) {
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("factor_Q: Q is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> es(detail::sym_part(Q));
  const Vec3 lam = es.eigenvalues();
  const Mat3 vecs = es.eigenvectors();
  const double cutoff = 1e-14 * lam.cwiseAbs().maxCoeff();
  const auto order = detail::axis_aligned_order(vecs);

  QFactor f;
  for (int k = 0; k < 3; ++k) {
    const int src = order[k];
    Vec3 v = vecs.col(src);
    // Dominant component positive, for reproducible output.
    Eigen::Index dom;
    v.cwiseAbs().maxCoeff(&dom);
    if (v(dom) < 0) v = -v;
    const double l = lam(src);
    if (std::abs(l) <= cutoff) {
      f.sigma2(k) = 0.0;
      f.q_mat.row(k).setZero();
    } else {
      f.sigma2(k) = l > 0 ? 1.0 : -1.0;
      f.q_mat.row(k) = std::sqrt(std::abs(l)) * v.transpose();
    }
  }
  return f;
}

/// sigma with sigma^2 = sigma2: +1 -> 1, -1 -> i, 0 -> 0.
inline CVec3 sigma_from_sigma2(const Vec3& sigma2) {
  CVec3 s;
  for (int k = 0; k < 3; ++k)
    s(k) = sigma2(k) > 0 ? cplx(1, 0) : (sigma2(k) < 0 ? I_unit : cplx(0, 0));
  return s;
}

struct AnisoContrast {
  Mat3 A = Mat3::Identity();
  Mat3 A_tilde = Mat3::Identity();
  Mat3 beta_t = Mat3::Zero();  // A^{-1/2} (A_tilde - A) A^{-1/2}
  Mat3 Q = Mat3::Zero();       // (beta_t + 2I)^{-1} beta_t
  Mat3 q_mat = Mat3::Zero();
  Vec3 sigma2 = Vec3::Zero();

  CVec3 sigma() const { return sigma_from_sigma2(sigma2); }
  Mat3 jump() const { return A_tilde - A; }

  /// +1 or -1 when sigma2 = +-I, empty for indefinite or degenerate contrast.
  std::optional<int> definite_sign() const {
    if ((sigma2.array() == 1.0).all()) return 1;
    if ((sigma2.array() == -1.0).all()) return -1;
    return std::nullopt;
  }

  bool is_zero() const { return (sigma2.array() == 0.0).all(); }
};

inline AnisoContrast aniso_contrast(const SymTensor3& A, const SymTensor3& A_tilde) {
  const Mat3 a = A.matrix();
  const Mat3 at = A_tilde.matrix();
  require_spd(a, "aniso_contrast(A)");
  require_spd(at, "aniso_contrast(A_tilde)");
  AnisoContrast c;
  c.A = a;
  c.A_tilde = at;
  const Mat3 ris = spd_inv_sqrt(a);
  c.beta_t = detail::sym_part(ris * (at - a) * ris);
  c.Q = detail::sym_part((c.beta_t + 2.0 * Mat3::Identity()).inverse() * c.beta_t);
  const QFactor f = factor_Q(c.Q);
  c.q_mat = f.q_mat;
  c.sigma2 = f.sigma2;
  return c;
}

inline AnisoContrast to_aniso(const IsoContrast& c) {
  return aniso_contrast(SymTensor3::isotropic(c.a), SymTensor3::isotropic(c.a_tilde));
}

inline std::string describe(const Mat3& m) {
  std::ostringstream os;
  os << "[" << m(0, 0) << "," << m(0, 1) << "," << m(0, 2) << ";" << m(1, 0) << ","
     << m(1, 1) << "," << m(1, 2) << ";" << m(2, 0) << "," << m(2, 1) << ","
     << m(2, 2) << "]";
  return os.str();
}

}  // namespace tdscope
