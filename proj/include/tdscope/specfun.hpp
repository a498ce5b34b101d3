#pragma once

// Spherical Bessel/Hankel functions, Legendre polynomials and spherical
// harmonics.

#include "tdscope/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tdscope::specfun {

/// Default largest order accepted by the series helpers.
inline constexpr int default_max_order = 60;

/// j_0..j_nmax at x >= 0. Downward (Miller) recurrence for nmax >= x,
/// upward recurrence otherwise.
inline std::vector<double> sph_bessel_j_all(int nmax, double x) {
  if (nmax < 0) throw DomainError("sph_bessel_j_all: negative order");
  if (!(x >= 0.0)) throw DomainError("sph_bessel_j_all: negative argument");
  std::vector<double> j(static_cast<std::size_t>(nmax) + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }
  double j0, j1;
  if (x < 0.1) {
    const double x2 = x * x;
    j0 = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)));
    j1 = x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)));
  } else {
    j0 = std::sin(x) / x;
    j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  }
  j[0] = j0;
  if (nmax == 0) return j;

  if (x > static_cast<double>(nmax)) {
    j[1] = j1;
    for (int n = 1; n < nmax; ++n) j[n + 1] = (2.0 * n + 1.0) / x * j[n] - j[n - 1];
    return j;
  }

  const int start = static_cast<int>(std::max<double>(nmax, x)) + 30 +
                    static_cast<int>(std::sqrt(40.0 * (nmax + x)));
  double f_next = 0.0, f = 1e-300;
  for (int n = start; n >= 1; --n) {
    const double f_prev = (2.0 * n + 1.0) / x * f - f_next;
    f_next = f;
    f = f_prev;
    if (n - 1 <= nmax) j[n - 1] = f;
    if (n <= nmax) j[n] = f_next;
    if (std::abs(f) > 1e250) {
      f *= 1e-250;
      f_next *= 1e-250;
      for (int k = n - 1; k <= nmax; ++k)
        if (k >= 0) j[k] *= 1e-250;
    }
  }
  // Normalise against whichever closed form is better conditioned.
  const double scale = std::abs(j0) >= std::abs(j1) ? j0 / j[0] : j1 / j[1];
  for (auto& v : j) v *= scale;
  return j;
}

/// Spherical Bessel function j_n(x); n is bounded by nmax.
inline double sph_bessel_j(int n, double x, int nmax = default_max_order) {
  if (n < 0 || n > nmax) throw DomainError("sph_bessel_j: order out of range");
  return sph_bessel_j_all(n, x)[static_cast<std::size_t>(n)];
}

/// y_0..y_nmax at x > 0 by upward recurrence.
inline std::vector<double> sph_bessel_y_all(int nmax, double x) {
  if (!(x > 0.0)) throw SingularityError("sph_bessel_y_all: x must be positive");
  std::vector<double> y(static_cast<std::size_t>(nmax) + 1);
  y[0] = -std::cos(x) / x;
  if (nmax >= 1) y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
  for (int n = 1; n < nmax; ++n) y[n + 1] = (2.0 * n + 1.0) / x * y[n] - y[n - 1];
  return y;
}

inline double sph_bessel_y(int n, double x) {
  if (n < 0) throw DomainError("sph_bessel_y: negative order");
  return sph_bessel_y_all(n, x)[static_cast<std::size_t>(n)];
}

/// h^(1)_0..h^(1)_nmax at x > 0.
inline std::vector<cplx> sph_hankel1_all(int nmax, double x) {
  if (!(x > 0.0)) throw SingularityError("sph_hankel1: x must be positive");
  const auto j = sph_bessel_j_all(nmax, x);
  const auto y = sph_bessel_y_all(nmax, x);
  std::vector<cplx> h(j.size());
  for (std::size_t n = 0; n < j.size(); ++n) h[n] = {j[n], y[n]};
  return h;
}

inline cplx sph_hankel1(int n, double x) {
  if (n < 0) throw DomainError("sph_hankel1: negative order");
  return sph_hankel1_all(n, x)[static_cast<std::size_t>(n)];
}

/// Derivative of a spherical Bessel-type family from its values:
/// f_n' = f_{n-1} - (n+1)/x f_n, with f_0' = -f_1.
template <class T>
std::vector<T> sph_derivative(const std::vector<T>& f, double x) {
  std::vector<T> d(f.size());
  if (f.empty()) return d;
  if (f.size() < 2) throw DomainError("sph_derivative: need orders 0 and 1");
  d[0] = -f[1];
  for (std::size_t n = 1; n < f.size(); ++n)
    d[n] = f[n - 1] - (static_cast<double>(n) + 1.0) / x * f[n];
  return d;
}

/// P_0..P_nmax at t in [-1, 1].
inline std::vector<double> legendre_p_all(int nmax, double t) {
  if (std::abs(t) > 1.0 + 1e-14) throw DomainError("legendre_p: |t| > 1");
  t = std::clamp(t, -1.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(nmax) + 1);
  p[0] = 1.0;
  if (nmax >= 1) p[1] = t;
  for (int n = 1; n < nmax; ++n)
    p[n + 1] = ((2.0 * n + 1.0) * t * p[n] - n * p[n - 1]) / (n + 1.0);
  return p;
}

inline double legendre_p(int n, double t) {
  if (n < 0) throw DomainError("legendre_p: negative degree");
  return legendre_p_all(n, t)[static_cast<std::size_t>(n)];
}

/// Index of (n, m) in a packed harmonic array: n^2 + n + m.
inline constexpr int harmonic_index(int n, int m) { return n * n + n + m; }
inline constexpr int harmonic_count(int nmax) { return (nmax + 1) * (nmax + 1); }

/// All orthonormal complex harmonics Y_n^m(dir), n <= nmax, with the
/// Condon-Shortley phase. dir must be a unit vector.
inline std::vector<cplx> spherical_harmonics_all(int nmax, const Vec3& dir) {
  if (std::abs(dir.norm() - 1.0) > 1e-10)
    throw DomainError("spherical_harmonics: direction is not a unit vector");
  const double t = std::clamp(dir.z(), -1.0, 1.0);
  const double st = std::sqrt(std::max(0.0, 1.0 - t * t));
  const double phi = std::atan2(dir.y(), dir.x());
  std::vector<cplx> y(static_cast<std::size_t>(harmonic_count(nmax)));

  double pmm = std::sqrt(1.0 / (4.0 * pi));
  for (int m = 0; m <= nmax; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * st;
    const cplx e = std::polar(1.0, m * phi);
    const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
    auto store = [&](int n, double p) {
      const cplx v = p * e;
      y[harmonic_index(n, m)] = v;
      if (m > 0) y[harmonic_index(n, -m)] = sgn * std::conj(v);
    };
    store(m, pmm);
    if (m == nmax) break;
    double p_prev = pmm;
    double p = std::sqrt(2.0 * m + 3.0) * t * pmm;
    store(m + 1, p);
    for (int n = m + 2; n <= nmax; ++n) {
      const double a = std::sqrt((4.0 * n * n - 1.0) / (static_cast<double>(n) * n - m * m));
      const double b = std::sqrt(((n - 1.0) * (n - 1.0) - m * m) / (4.0 * (n - 1.0) * (n - 1.0) - 1.0));
      const double pn = a * (t * p - b * p_prev);
      p_prev = p;
      p = pn;
      store(n, p);
    }
  }
  return y;
}

inline cplx spherical_harmonic(int n, int m, const Vec3& dir) {
  if (n < 0 || std::abs(m) > n) throw DomainError("spherical_harmonic: |m| > n");
  return spherical_harmonics_all(n, dir)[harmonic_index(n, m)];
}

/// Real orthonormal harmonics: sqrt(2) (-1)^m Re Y_n^m for m > 0,
/// sqrt(2) (-1)^m Im Y_n^|m| for m < 0.
inline double real_spherical_harmonic(int n, int m, const Vec3& dir) {
  if (n < 0 || std::abs(m) > n) throw DomainError("real_spherical_harmonic: |m| > n");
  const cplx y = spherical_harmonic(n, std::abs(m), dir);
  const double sgn = (std::abs(m) % 2 == 0) ? 1.0 : -1.0;
  if (m == 0) return y.real();
  if (m > 0) return std::sqrt(2.0) * sgn * y.real();
  return std::sqrt(2.0) * sgn * y.imag();
}

/// All real orthonormal harmonics up to nmax, packed like the complex ones.
inline std::vector<double> real_spherical_harmonics_all(int nmax, const Vec3& dir) {
  const auto y = spherical_harmonics_all(nmax, dir);
  std::vector<double> r(y.size());
  for (int n = 0; n <= nmax; ++n) {
    r[harmonic_index(n, 0)] = y[harmonic_index(n, 0)].real();
    for (int m = 1; m <= n; ++m) {
      const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
      const cplx v = y[harmonic_index(n, m)];
      r[harmonic_index(n, m)] = std::sqrt(2.0) * sgn * v.real();
      r[harmonic_index(n, -m)] = std::sqrt(2.0) * sgn * v.imag();
    }
  }
  return r;
}

}  // namespace tdscope::specfun
