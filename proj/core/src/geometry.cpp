#include "sifr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sifr {

namespace {

// Vertices on the clip edge within this distance count as inside, so shared
// edges do not produce slivers.
constexpr double kCollinearTol = 1e-12;

struct Vec2 {
  double x, y;
};

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Intersection of segment sâ–r with the infinite line through aâ–b. Callers
// only ask when s and r straddle the line, so the denominator is nonzero.
Vec2 line_intersect(const Vec2& a, const Vec2& b, const Vec2& s,
                    const Vec2& r) {
  const double a1 = b.y - a.y, b1 = a.x - b.x;
  const double c1 = a1 * a.x + b1 * a.y;
  const double a2 = r.y - s.y, b2 = s.x - r.x;
  const double c2 = a2 * s.x + b2 * s.y;
  const double det = a1 * b2 - a2 * b1;
  return {(b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det};
}

// Sutherland-Hodgman: clip a convex subject polygon against a convex CCW
// clip polygon.
std::vector<Vec2> clip_polygon(std::vector<Vec2> subject,
                               const std::vector<Vec2>& clip) {
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const Vec2& ca = clip[i];
    const Vec2& cb = clip[(i + 1) % clip.size()];
    std::vector<Vec2> out;
    out.reserve(subject.size() + 1);
    for (std::size_t j = 0; j < subject.size(); ++j) {
      const Vec2& s = subject[j];
      const Vec2& e = subject[(j + 1) % subject.size()];
      const bool s_in = cross(ca, cb, s) >= -kCollinearTol;
      const bool e_in = cross(ca, cb, e) >= -kCollinearTol;
      if (s_in && e_in) {
        out.push_back(e);
      } else if (s_in && !e_in) {
        out.push_back(line_intersect(ca, cb, s, e));
      } else if (!s_in && e_in) {
        out.push_back(line_intersect(ca, cb, s, e));
        out.push_back(e);
      }
    }
    subject = std::move(out);
  }
  return subject;
}

double shoelace_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(s);
}

// Footprint corners, CCW.
std::vector<Vec2> footprint(const Box3D& b) {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double hl = 0.5 * b.l, hw = 0.5 * b.w;
  std::vector<Vec2> out;
  out.reserve(4);
  const double lx[4] = {hl, -hl, -hl, hl};
  const double ly[4] = {hw, hw, -hw, -hw};
  for (int i = 0; i < 4; ++i) {
    out.push_back({b.cx + c * lx[i] - s * ly[i], b.cy + s * lx[i] + c * ly[i]});
  }
  return out;
}

void require_valid(const Box3D& b, const char* op) {
  const bool finite = std::isfinite(b.cx) && std::isfinite(b.cy) &&
                      std::isfinite(b.cz) && std::isfinite(b.theta);
  if (!finite || !(b.h > 0.0) || !(b.w > 0.0) || !(b.l > 0.0)) {
    throw InvalidInputError(std::string(op) + ": degenerate box");
  }
}

}  // namespace

double wrap_angle(double theta) {
  double r = std::remainder(theta, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

Box3D::Box3D(double cx_, double cy_, double cz_, double h_, double w_,
             double l_, double theta_)
    : cx(cx_), cy(cy_), cz(cz_), h(h_), w(w_), l(l_), theta(wrap_angle(theta_)) {
  require_valid(*this, "Box3D");
}

Corners box_corners(const Box3D& b) {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double hl = 0.5 * b.l, hw = 0.5 * b.w, hh = 0.5 * b.h;
  const double lx[4] = {hl, -hl, -hl, hl};
  const double ly[4] = {hw, hw, -hw, -hw};
  Corners out;
  for (int i = 0; i < 8; ++i) {
    const int f = i % 4;
    const double z = i < 4 ? hh : -hh;
    out[i] = {b.cx + c * lx[f] - s * ly[f], b.cy + s * lx[f] + c * ly[f],
              b.cz + z};
  }
  return out;
}

bool point_in_box(const Box3D& b, const Point3& p, double margin) {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double dx = p[0] - b.cx, dy = p[1] - b.cy, dz = p[2] - b.cz;
  // Rotate the offset back into the box frame.
  const double bx = c * dx + s * dy;
  const double by = -s * dx + c * dy;
  return std::abs(bx) <= 0.5 * b.l + margin &&
         std::abs(by) <= 0.5 * b.w + margin &&
         std::abs(dz) <= 0.5 * b.h + margin;
}

double iou_bev(const Box3D& a, const Box3D& b) {
  require_valid(a, "iou_bev");
  require_valid(b, "iou_bev");
  const std::vector<Vec2> fa = footprint(a), fb = footprint(b);
  const double inter = shoelace_area(clip_polygon(fa, fb));
  const double area_a = a.l * a.w, area_b = b.l * b.w;
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  require_valid(a, "iou_3d");
  require_valid(b, "iou_3d");
  const std::vector<Vec2> fa = footprint(a), fb = footprint(b);
  const double inter_area = shoelace_area(clip_polygon(fa, fb));
  const double z_lo = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  const double z_hi = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
  const double inter = inter_area * std::max(0.0, z_hi - z_lo);
  const double uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double corner_distance(const Box3D& a, const Box3D& b) {
  require_valid(a, "corner_distance");
  require_valid(b, "corner_distance");
  const Corners ca = box_corners(a);
  auto mean_dist = [&ca](const Corners& cb) {
    double s = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double dx = ca[i][0] - cb[i][0];
      const double dy = ca[i][1] - cb[i][1];
      const double dz = ca[i][2] - cb[i][2];
      s += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return s / 8.0;
  };
  Box3D flipped = b;
  flipped.theta = wrap_angle(b.theta + kPi);
  return std::min(mean_dist(box_corners(b)), mean_dist(box_corners(flipped)));
}

Point3 to_frustum_frame(const Point3& p, const FrustumFrame& f) {
  const double c = std::cos(f.angle), s = std::sin(f.angle);
  // Rotation by -angle about +z.
  return {c * p[0] + s * p[1] + f.translation[0],
          -s * p[0] + c * p[1] + f.translation[1], p[2] + f.translation[2]};
}

Point3 from_frustum_frame(const Point3& p, const FrustumFrame& f) {
  const double c = std::cos(f.angle), s = std::sin(f.angle);
  const double x = p[0] - f.translation[0];
  const double y = p[1] - f.translation[1];
  return {c * x - s * y, s * x + c * y, p[2] - f.translation[2]};
}

std::vector<Point3> to_frustum_frame(const std::vector<Point3>& pts,
                                     const FrustumFrame& f) {
  std::vector<Point3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(to_frustum_frame(p, f));
  return out;
}

std::vector<Point3> from_frustum_frame(const std::vector<Point3>& pts,
                                       const FrustumFrame& f) {
  std::vector<Point3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(from_frustum_frame(p, f));
  return out;
}

Box3D to_frustum_frame(const Box3D& b, const FrustumFrame& f) {
  const Point3 c = to_frustum_frame({b.cx, b.cy, b.cz}, f);
  return Box3D(c[0], c[1], c[2], b.h, b.w, b.l, b.theta - f.angle);
}

Box3D from_frustum_frame(const Box3D& b, const FrustumFrame& f) {
  const Point3 c = from_frustum_frame({b.cx, b.cy, b.cz}, f);
  return Box3D(c[0], c[1], c[2], b.h, b.w, b.l, b.theta + f.angle);
}

}  // namespace sifr
