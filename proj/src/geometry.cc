#include "rxn/geometry.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "rxn/errors.h"

namespace rxn::geom {
namespace {

constexpr double kAreaEps = 1e-12;

bool is_convex_ccw_or_cw(const std::array<Point, 4>& v) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Point a = v[i];
    const Point b = v[(i + 1) % 4];
    const Point c = v[(i + 2) % 4];
    const double z = cross(b - a, c - b);
    if (std::abs(z) <= kAreaEps) continue;
    const int s = z > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return sign != 0;
}

}  // namespace

double norm(Point p) { return std::hypot(p.x, p.y); }

AxisBox::AxisBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    throw GeometryError("box coordinates must be finite");
  }
  if (x_min > x_max || y_min > y_max) {
    throw GeometryError("box has min > max");
  }
}

double AxisBox::diagonal() const { return std::hypot(width(), height()); }

double polygon_area(std::span<const Point> poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    twice += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return std::abs(twice) / 2.0;
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
  // Andrew's monotone chain; collinear points dropped, output CCW.
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i - 1] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<Point> clip_convex(std::span<const Point> subject,
                               std::span<const Point> clip) {
  std::vector<Point> output(subject.begin(), subject.end());
  for (std::size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Point a = clip[i];
    const Point b = clip[(i + 1) % clip.size()];
    const Point edge = b - a;
    auto inside = [&](Point p) { return cross(edge, p - a) >= 0.0; };
    auto intersect = [&](Point p, Point q) {
      const Point d = q - p;
      const double denom = cross(edge, d);
      const double t = cross(a - p, edge) / -denom;
      return p + t * d;
    };
    std::vector<Point> input;
    input.swap(output);
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Point cur = input[j];
      const Point prev = input[(j + input.size() - 1) % input.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) output.push_back(intersect(prev, cur));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(intersect(prev, cur));
      }
    }
  }
  return output;
}

OrientedQuad::OrientedQuad(const std::array<Point, 4>& vertices)
    : vertices_(vertices) {
  for (const Point& p : vertices_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw GeometryError("quad coordinates must be finite");
    }
  }
  hull_ = convex_hull({vertices_.begin(), vertices_.end()});
  if (hull_.size() < 3 || polygon_area(hull_) <= kAreaEps) {
    throw GeometryError("oriented quad has zero area");
  }
  if (!is_convex_ccw_or_cw(vertices_)) {
    // Crossed or mis-ordered input: reorder by angle around the centroid.
    Point c{0, 0};
    for (const Point& p : vertices_) c = c + 0.25 * p;
    std::array<Point, 4> sorted = vertices_;
    std::stable_sort(sorted.begin(), sorted.end(), [c](Point a, Point b) {
      return std::atan2(a.y - c.y, a.x - c.x) < std::atan2(b.y - c.y, b.x - c.x);
    });
    // Keep the first input vertex first so the tail/head convention survives.
    auto first = std::find(sorted.begin(), sorted.end(), vertices_[0]);
    std::rotate(sorted.begin(), first, sorted.end());
    vertices_ = sorted;
  }
}

OrientedQuad OrientedQuad::from_flat(std::span<const double> xy) {
  if (xy.size() != 8) {
    throw GeometryError("oriented quad needs 8 numbers, got " +
                        std::to_string(xy.size()));
  }
  return OrientedQuad(std::array<Point, 4>{Point{xy[0], xy[1]}, Point{xy[2], xy[3]},
                                           Point{xy[4], xy[5]}, Point{xy[6], xy[7]}});
}

double OrientedQuad::area() const { return polygon_area(hull_); }

Point OrientedQuad::centroid() const {
  double a2 = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0; i < hull_.size(); ++i) {
    const Point p = hull_[i];
    const Point q = hull_[(i + 1) % hull_.size()];
    const double w = cross(p, q);
    a2 += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

AxisBox OrientedQuad::bounding_box() const {
  double x0 = vertices_[0].x;
  double x1 = x0;
  double y0 = vertices_[0].y;
  double y1 = y0;
  for (const Point& p : vertices_) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return AxisBox(x0, y0, x1, y1);
}

std::array<double, 8> OrientedQuad::to_array() const {
  std::array<double, 8> out{};
  for (int i = 0; i < 4; ++i) {
    out[2 * i] = vertices_[i].x;
    out[2 * i + 1] = vertices_[i].y;
  }
  return out;
}

Point centroid(const Region& r) {
  if (const auto* box = std::get_if<AxisBox>(&r)) return box->center();
  return std::get<OrientedQuad>(r).centroid();
}

double area(const Region& r) {
  if (const auto* box = std::get_if<AxisBox>(&r)) return box->area();
  return std::get<OrientedQuad>(r).area();
}

AxisBox bounding_box(const Region& r) {
  if (const auto* box = std::get_if<AxisBox>(&r)) return *box;
  return std::get<OrientedQuad>(r).bounding_box();
}

std::vector<Point> polygon(const Region& r) {
  if (const auto* box = std::get_if<AxisBox>(&r)) {
    return {{box->x_min(), box->y_min()},
            {box->x_max(), box->y_min()},
            {box->x_max(), box->y_max()},
            {box->x_min(), box->y_max()}};
  }
  return std::get<OrientedQuad>(r).hull();
}

bool is_quad(const Region& r) { return std::holds_alternative<OrientedQuad>(r); }

bool same_region(const Region& a, const Region& b) { return a == b; }

double iou_axis(const AxisBox& a, const AxisBox& b) {
  const double ix = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double iy = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  const double inter = (ix > 0 && iy > 0) ? ix * iy : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) {
    // Both degenerate: only identical degenerate boxes count as a match.
    return a == b && a.x_min() == a.x_max() && a.y_min() == a.y_max() ? 1.0 : 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

double iou_polygons(std::span<const Point> a, std::span<const Point> b) {
  const double area_a = polygon_area(a);
  const double area_b = polygon_area(b);
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const std::vector<Point> inter = clip_convex(a, b);
  const double ai = polygon_area(inter);
  const double uni = area_a + area_b - ai;
  if (uni <= 0.0) return 0.0;
  return std::clamp(ai / uni, 0.0, 1.0);
}

}  // namespace

double iou_oriented(const OrientedQuad& a, const OrientedQuad& b) {
  return iou_polygons(a.hull(), b.hull());
}

double iou(const Region& a, const Region& b, IouMode mode) {
  const auto* ba = std::get_if<AxisBox>(&a);
  const auto* bb = std::get_if<AxisBox>(&b);
  if (ba && bb) return iou_axis(*ba, *bb);
  if (mode == IouMode::kAxisHull) return iou_axis(bounding_box(a), bounding_box(b));
  const std::vector<Point> pa = polygon(a);
  const std::vector<Point> pb = polygon(b);
  return iou_polygons(pa, pb);
}

double center_distance_normalized(const Region& a, const Region& b,
                                  const AxisBox& diagram) {
  const double diag = diagram.diagonal();
  if (!(diag > 0.0)) throw GeometryError("diagram has zero diagonal");
  return norm(centroid(a) - centroid(b)) / diag;
}

}  // namespace rxn::geom
