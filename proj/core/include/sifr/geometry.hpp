#pragma once

#include <array>
#include <vector>

#include "sifr/errors.hpp"

namespace sifr {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

using Point3 = std::array<double, 3>;

/// Oriented 3D box. Geometric center, z-up convention: h spans z, w spans y
/// and l spans x before the heading rotation. theta is the heading about the
/// up axis and is wrapped to (-pi, pi] at construction.
struct Box3D {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double h = 1.0, w = 1.0, l = 1.0;
  double theta = 0.0;

  Box3D() = default;
  Box3D(double cx_, double cy_, double cz_, double h_, double w_, double l_,
        double theta_);
};

/// Fixed ordering: top face counter-clockwise seen from above (+z), then the
/// bottom face with matching xy.
using Corners = std::array<Point3, 8>;

Corners box_corners(const Box3D& b);

/// True when p lies inside b, expanded by `margin` on every face
/// (negative margin shrinks the box).
bool point_in_box(const Box3D& b, const Point3& p, double margin = 0.0);

/// Rotated-footprint area IoU via convex polygon clipping.
double iou_bev(const Box3D& a, const Box3D& b);

/// Footprint-intersection area times vertical overlap over volume union.
/// Both boxes share the up axis.
double iou_3d(const Box3D& a, const Box3D& b);

/// Min over {b, b rotated by pi} of the mean Euclidean distance between
/// order-matched corners.
double corner_distance(const Box3D& a, const Box3D& b);

/// Frustum canonicalization: rotate by -angle about the up axis (so the
/// frustum center axis lands on +x), then translate.
struct FrustumFrame {
  double angle = 0.0;
  Point3 translation{0.0, 0.0, 0.0};
};

Point3 to_frustum_frame(const Point3& p, const FrustumFrame& f);
Point3 from_frustum_frame(const Point3& p, const FrustumFrame& f);
std::vector<Point3> to_frustum_frame(const std::vector<Point3>& pts,
                                     const FrustumFrame& f);
std::vector<Point3> from_frustum_frame(const std::vector<Point3>& pts,
                                       const FrustumFrame& f);
Box3D to_frustum_frame(const Box3D& b, const FrustumFrame& f);
Box3D from_frustum_frame(const Box3D& b, const FrustumFrame& f);

}  // namespace sifr
