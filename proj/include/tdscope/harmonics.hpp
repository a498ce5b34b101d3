#pragma once

// Traces on spherical surfaces in the real spherical-harmonic basis and the
// symmetry-restoring operator E.

#include "tdscope/quadrature.hpp"
#include "tdscope/specfun.hpp"

#include <vector>

namespace tdscope {

/// Coefficients c_n^m of a trace f(x) = sum Y_n^m(x^) c_n^m on a sphere, in the
/// real orthonormal basis of the unit sphere. Because the basis is real, the
/// coefficients of conj(f) are conj(c).
struct HarmonicTrace {
  int nmax = 0;
  double radius = 1.0;
  std::vector<cplx> c;  // packed with specfun::harmonic_index

  cplx& operator()(int n, int m) { return c[static_cast<std::size_t>(specfun::harmonic_index(n, m))]; }
  cplx operator()(int n, int m) const {
    return c[static_cast<std::size_t>(specfun::harmonic_index(n, m))];
  }
  double norm2() const {
    double s = 0.0;
    for (const auto& v : c) s += std::norm(v);
    return s;
  }
};

namespace detail {

inline void require_closed(const SphereSurface& s, const char* what) {
  if (!s.closed()) throw DomainError(std::string(what) + ": requires a closed sphere");
}

inline void require_resolved(const SphereSurface& s, int nmax, const char* what) {
  if (nmax < 0 || 2 * nmax > s.exact_degree())
    throw DomainError(std::string(what) + ": nmax exceeds what the surface rule resolves");
}

}  // namespace detail

/// Real harmonic values at the nodes: (Ns x (nmax+1)^2).
inline Eigen::MatrixXd harmonic_matrix(const SphereSurface& surf, int nmax) {
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(surf.size()), specfun::harmonic_count(nmax));
  for (std::size_t s = 0; s < surf.size(); ++s) {
    const auto y = specfun::real_spherical_harmonics_all(nmax, surf.normals[s]);
    for (int k = 0; k < specfun::harmonic_count(nmax); ++k)
      Y(static_cast<Eigen::Index>(s), k) = y[static_cast<std::size_t>(k)];
  }
  return Y;
}

/// Coefficients of node values (one trace per column); unit-sphere measure.
inline CMatrix project_traces(const SphereSurface& surf, const CMatrix& values, int nmax) {
  detail::require_closed(surf, "project_traces");
  detail::require_resolved(surf, nmax, "project_traces");
  if (values.rows() != static_cast<Eigen::Index>(surf.size()))
    throw DomainError("project_traces: size mismatch");
  Eigen::MatrixXd Y = harmonic_matrix(surf, nmax);
  const double r2 = surf.radius * surf.radius;
  for (std::size_t s = 0; s < surf.size(); ++s)
    Y.row(static_cast<Eigen::Index>(s)) *= surf.weights[s] / r2;
  return Y.transpose().cast<cplx>() * values;
}

inline HarmonicTrace project_trace(const SphereSurface& surf, const CVector& values, int nmax) {
  const CMatrix C = project_traces(surf, values, nmax);
  HarmonicTrace t;
  t.nmax = nmax;
  t.radius = surf.radius;
  t.c.assign(C.data(), C.data() + C.size());
  return t;
}

inline CVector synthesize_trace(const HarmonicTrace& t, const SphereSurface& surf) {
  const Eigen::MatrixXd Y = harmonic_matrix(surf, t.nmax);
  const Eigen::Map<const CVector> c(t.c.data(), static_cast<Eigen::Index>(t.c.size()));
  return Y.cast<cplx>() * c;
}

/// E_n = -conj(h_n(kR)) / h_n(kR) for n = 0..nmax.
inline std::vector<cplx> e_multipliers(int nmax, double kappa, double R) {
  if (!(kappa > 0.0)) throw DomainError("e_apply: requires kappa > 0");
  const auto h = specfun::sph_hankel1_all(nmax, kappa * R);
  std::vector<cplx> e(h.size());
  for (std::size_t n = 0; n < h.size(); ++n) {
    const double mag = std::abs(h[n]);
    if (!std::isfinite(mag) || !(mag > 1e-300))
      throw NumericalError("e_apply: h_n(kR) out of floating-point range", static_cast<double>(n));
    // Ratio of conjugates, computed in polar form so it is exactly unimodular.
    e[n] = -std::polar(1.0, -2.0 * std::arg(h[n]));
  }
  return e;
}

/// Applies E coefficient-wise.
inline HarmonicTrace e_apply(const HarmonicTrace& t, const SphereSurface& surf, double kappa) {
  detail::require_closed(surf, "e_apply");
  const auto e = e_multipliers(t.nmax, kappa, surf.radius);
  HarmonicTrace out = t;
  out.radius = surf.radius;
  for (int n = 0; n <= t.nmax; ++n)
    for (int m = -n; m <= n; ++m) out(n, m) *= e[static_cast<std::size_t>(n)];
  return out;
}

/// E applied to coefficient columns.
inline CMatrix e_apply_columns(const CMatrix& C, int nmax, double kappa, double R) {
  const auto e = e_multipliers(nmax, kappa, R);
  CMatrix out = C;
  for (int n = 0; n <= nmax; ++n)
    for (int m = -n; m <= n; ++m) out.row(specfun::harmonic_index(n, m)) *= e[static_cast<std::size_t>(n)];
  return out;
}

}  // namespace tdscope
