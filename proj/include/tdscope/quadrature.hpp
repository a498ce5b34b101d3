#pragma once

// Gauss-Legendre rules and product rules on spheres and spherical caps.

#include "tdscope/core.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace tdscope {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [a, b] (Newton iteration on P_n).
inline GaussRule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
  if (n < 1) throw DomainError("gauss_legendre: n must be >= 1");
  GaussRule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      // Recompute the derivative at the converged node.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[static_cast<std::size_t>(i)] = mid - half * x;
    r.nodes[static_cast<std::size_t>(n - 1 - i)] = mid + half * x;
    r.weights[static_cast<std::size_t>(i)] = half * w;
    r.weights[static_cast<std::size_t>(n - 1 - i)] = half * w;
  }
  return r;
}

struct SphereNode {
  Vec3 dir;       // unit direction from the center
  double weight;  // unit-sphere surface weight
};

/// Product rule on the unit sphere: `order` Gauss-Legendre nodes in cos(theta)
/// times 2*order equispaced azimuths. On the full sphere it integrates
/// harmonics of degree <= 2*order - 1 exactly. With an aperture the polar
/// interval is [cos(theta_max), 1].
inline std::vector<SphereNode> sphere_quadrature(int order,
                                                 std::optional<double> aperture = std::nullopt) {
  if (order < 1) throw DomainError("sphere_quadrature: order must be >= 1");
  double tmin = -1.0;
  if (aperture) {
    if (!(*aperture > 0.0) || *aperture > pi + 1e-15)
      throw DomainError("sphere_quadrature: aperture must lie in (0, pi]");
    tmin = *aperture >= pi ? -1.0 : std::cos(*aperture);
  }
  const GaussRule gl = gauss_legendre(order, tmin, 1.0);
  const int nphi = 2 * order;
  const double dphi = 2.0 * pi / nphi;
  std::vector<SphereNode> out;
  out.reserve(static_cast<std::size_t>(order * nphi));
  for (int i = 0; i < order; ++i) {
    const double t = gl.nodes[static_cast<std::size_t>(i)];
    const double st = std::sqrt(std::max(0.0, 1.0 - t * t));
    for (int k = 0; k < nphi; ++k) {
      const double ph = (k + 0.5) * dphi;
      out.push_back({Vec3(st * std::cos(ph), st * std::sin(ph), t),
                     gl.weights[static_cast<std::size_t>(i)] * dphi});
    }
  }
  return out;
}

/// Source/measurement sphere with its quadrature nodes in physical units.
struct SphereSurface {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  int order = 1;
  std::optional<double> aperture;
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> weights;  // surface-measure weights, sum = area

  std::size_t size() const { return points.size(); }
  bool closed() const { return !aperture || *aperture >= pi; }
  int exact_degree() const { return 2 * order - 1; }

  double area() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  /// True when x lies strictly inside the enclosed ball.
  bool encloses(const Vec3& x) const { return (x - center).norm() < radius; }
};

inline SphereSurface make_sphere(const Vec3& center, double radius, int order,
                                 std::optional<double> aperture = std::nullopt) {
  if (!(radius > 0.0)) throw DomainError("make_sphere: radius must be positive");
  SphereSurface s;
  s.center = center;
  s.radius = radius;
  s.order = order;
  s.aperture = aperture;
  for (const auto& n : sphere_quadrature(order, aperture)) {
    s.points.push_back(center + radius * n.dir);
    s.normals.push_back(n.dir);
    s.weights.push_back(n.weight * radius * radius);
  }
  return s;
}

}  // namespace tdscope
