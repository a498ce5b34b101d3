#pragma once

// Scatterer shapes and their voxelisation on a uniform cubic lattice.

#include "tdscope/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace tdscope {

class Shape {
 public:
  enum class Kind { ball, ellipsoid, union_of };

  static Shape ball(double radius, const Vec3& center = Vec3::Zero()) {
    if (!(radius > 0.0)) throw DomainError("Shape::ball: radius must be positive");
    Shape s;
    s.kind_ = Kind::ball;
    s.center_ = center;
    s.semi_ = Vec3::Constant(radius);
    return s;
  }

  /// Ellipsoid with semi-axes along the columns of `axes` (a rotation).
  static Shape ellipsoid(const Vec3& semi_axes, const Vec3& center = Vec3::Zero(),
                         const Mat3& axes = Mat3::Identity()) {
    if (!(semi_axes.minCoeff() > 0.0))
      throw DomainError("Shape::ellipsoid: semi-axes must be positive");
    if ((axes.transpose() * axes - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10 ||
        axes.determinant() < 0.0)
      throw DomainError("Shape::ellipsoid: axes must form a rotation");
    Shape s;
    s.kind_ = Kind::ellipsoid;
    s.center_ = center;
    s.semi_ = semi_axes;
    s.axes_ = axes;
    return s;
  }

  /// Union of disjoint parts.
  static Shape union_of(std::vector<Shape> parts) {
    if (parts.empty()) throw DomainError("Shape::union_of: no parts");
    Shape s;
    s.kind_ = Kind::union_of;
    s.parts_ = std::move(parts);
    double v = 0.0;
    Vec3 c = Vec3::Zero();
    for (const auto& p : s.parts_) {
      v += p.volume();
      c += p.volume() * p.centroid();
    }
    s.center_ = c / v;
    return s;
  }

  Kind kind() const { return kind_; }
  const Vec3& center() const { return center_; }
  const Vec3& semi_axes() const { return semi_; }
  const Mat3& axes() const { return axes_; }
  const std::vector<Shape>& parts() const { return parts_; }

  Vec3 centroid() const { return center_; }

  bool contains(const Vec3& x) const {
    if (kind_ == Kind::union_of)
      return std::any_of(parts_.begin(), parts_.end(),
                         [&](const Shape& p) { return p.contains(x); });
    const Vec3 p = axes_.transpose() * (x - center_);
    return p.cwiseQuotient(semi_).squaredNorm() < 1.0;
  }

  double volume() const {
    if (kind_ == Kind::union_of) {
      double v = 0.0;
      for (const auto& p : parts_) v += p.volume();
      return v;
    }
    return 4.0 * pi / 3.0 * semi_.prod();
  }

  /// Axis-aligned bounding box (lo, hi).
  std::array<Vec3, 2> bounding_box() const {
    if (kind_ == Kind::union_of) {
      Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
      Vec3 hi = -lo;
      for (const auto& p : parts_) {
        const auto b = p.bounding_box();
        lo = lo.cwiseMin(b[0]);
        hi = hi.cwiseMax(b[1]);
      }
      return {lo, hi};
    }
    // Half-widths of a rotated ellipsoid: sqrt(sum_k (R_ik a_k)^2).
    Vec3 half;
    for (int i = 0; i < 3; ++i) half(i) = axes_.row(i).cwiseProduct(semi_.transpose()).norm();
    return {center_ - half, center_ + half};
  }

  /// Largest distance between two points of the shape (exact for a single
  /// ellipsoid; an upper bound from the bounding spheres for unions).
  double diameter() const {
    if (kind_ != Kind::union_of) return 2.0 * semi_.maxCoeff();
    double d = 0.0;
    for (const auto& p : parts_)
      for (const auto& q : parts_)
        d = std::max(d, (p.center_ - q.center_).norm() + p.semi_.maxCoeff() + q.semi_.maxCoeff());
    return d;
  }

  /// Smallest feature size (shortest ellipsoid diameter over all parts).
  double min_feature() const {
    if (kind_ != Kind::union_of) return 2.0 * semi_.minCoeff();
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : parts_) m = std::min(m, p.min_feature());
    return m;
  }

  /// Euclidean distance from x to the shape (0 inside).
  double distance(const Vec3& x) const {
    if (kind_ == Kind::union_of) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& p : parts_) d = std::min(d, p.distance(x));
      return d;
    }
    if (contains(x)) return 0.0;
    const Vec3 p = axes_.transpose() * (x - center_);
    if (kind_ == Kind::ball) return p.norm() - semi_(0);
    // Closest point: y_i = a_i^2 p_i / (a_i^2 + t) with sum (y_i/a_i)^2 = 1,
    // t >= 0; the left side is decreasing in t, so bisection is safe.
    const Vec3 a2 = semi_.cwiseAbs2();
    auto g = [&](double t) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double v = semi_(i) * p(i) / (a2(i) + t);
        s += v * v;
      }
      return s - 1.0;
    };
    double lo = 0.0, hi = p.norm() * semi_.maxCoeff() + 1.0;
    while (g(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > 0.0 ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    Vec3 y;
    for (int i = 0; i < 3; ++i) y(i) = a2(i) * p(i) / (a2(i) + t);
    return (p - y).norm();
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::ball: return "ball";
      case Kind::ellipsoid: return "ellipsoid";
      case Kind::union_of: return "union";
    }
    return "?";
  }

 private:
  Kind kind_ = Kind::ball;
  Vec3 center_ = Vec3::Zero();
  Vec3 semi_ = Vec3::Ones();
  Mat3 axes_ = Mat3::Identity();
  std::vector<Shape> parts_;
};

/// Voxelised scatterer. Cell centres are anchor + h (i + 1/2) for integer
/// lattice indices, so the lattice is symmetric about the anchor.
struct ScattererGrid {
  Shape shape;
  double h = 0.0;
  Vec3 anchor = Vec3::Zero();
  std::vector<Vec3> centers;
  std::vector<std::array<int, 3>> index;

  std::size_t size() const { return centers.size(); }
  double cell_volume() const { return h * h * h; }
  double volume() const { return static_cast<double>(size()) * cell_volume(); }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& x : centers) c += x;
    return size() ? Vec3(c / static_cast<double>(size())) : c;
  }

  /// Sum of x h^3 over the voxels.
  Vec3 first_moment() const {
    Vec3 c = Vec3::Zero();
    for (const auto& x : centers) c += x;
    return c * cell_volume();
  }

  /// True when x lies inside one of the voxel cells (closed cells).
  bool in_any_cell(const Vec3& x) const {
    for (const auto& c : centers)
      if ((x - c).cwiseAbs().maxCoeff() <= 0.5 * h) return true;
    return false;
  }
};

inline ScattererGrid voxelize(const Shape& shape, double h) {
  if (!(h > 0.0)) throw DomainError("voxelize: h must be positive");
  if (!(h < shape.min_feature() / 4.0))
    throw DomainError("voxelize: h must be below a quarter of the smallest feature size");
  ScattererGrid g;
  g.shape = shape;
  g.h = h;
  g.anchor = shape.centroid();
  const auto box = shape.bounding_box();
  std::array<int, 3> lo{}, hi{};
  for (int d = 0; d < 3; ++d) {
    lo[d] = static_cast<int>(std::floor((box[0](d) - g.anchor(d)) / h)) - 1;
    hi[d] = static_cast<int>(std::ceil((box[1](d) - g.anchor(d)) / h)) + 1;
  }
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int k = lo[2]; k <= hi[2]; ++k) {
        const Vec3 x = g.anchor + h * Vec3(i + 0.5, j + 0.5, k + 0.5);
        if (shape.contains(x)) {
          g.centers.push_back(x);
          g.index.push_back({i, j, k});
        }
      }
  if (g.centers.empty()) throw DomainError("voxelize: degenerate shape, no voxel inside");
  return g;
}

/// Default resolution: diam / 20.
inline ScattererGrid voxelize(const Shape& shape) { return voxelize(shape, shape.diameter() / 20.0); }

}  // namespace tdscope
