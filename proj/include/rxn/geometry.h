// Axis-aligned boxes (molecules, text, identifiers), oriented quadrilaterals
// (arrows), and the IoU / distance functions used by reasoning and evaluation.

#ifndef RXN_GEOMETRY_H_
#define RXN_GEOMETRY_H_

#include <array>
#include <span>
#include <variant>
#include <vector>

namespace rxn::geom {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
double norm(Point p);

class AxisBox {
 public:
  AxisBox() = default;
  // Throws GeometryError when min > max or a coordinate is not finite.
  AxisBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }
  double diagonal() const;
  Point center() const { return {(x_min_ + x_max_) / 2, (y_min_ + y_max_) / 2}; }
  bool contains(Point p) const {
    return p.x >= x_min_ && p.x <= x_max_ && p.y >= y_min_ && p.y <= y_max_;
  }
  std::array<double, 4> to_array() const { return {x_min_, y_min_, x_max_, y_max_}; }

  bool operator==(const AxisBox&) const = default;

 private:
  double x_min_ = 0.0;
  double y_min_ = 0.0;
  double x_max_ = 0.0;
  double y_max_ = 0.0;
};

// Four vertices as given by the detector (kept for serialization and for the
// tail/head convention), plus a counter-clockwise convex hull used for areas
// and clipping. Crossed or non-convex vertex lists are convexified.
class OrientedQuad {
 public:
  // Throws GeometryError when the hull has zero area.
  explicit OrientedQuad(const std::array<Point, 4>& vertices);
  static OrientedQuad from_flat(std::span<const double> xy);  // 8 numbers

  const std::array<Point, 4>& vertices() const { return vertices_; }
  const std::vector<Point>& hull() const { return hull_; }
  double area() const;
  Point centroid() const;
  AxisBox bounding_box() const;
  std::array<double, 8> to_array() const;

  bool operator==(const OrientedQuad& other) const {
    return vertices_ == other.vertices_;
  }

 private:
  std::array<Point, 4> vertices_;
  std::vector<Point> hull_;
};

using Region = std::variant<AxisBox, OrientedQuad>;

// Area-weighted centroid for quads, box center for boxes.
Point centroid(const Region& r);
double area(const Region& r);
AxisBox bounding_box(const Region& r);
// Counter-clockwise convex polygon.
std::vector<Point> polygon(const Region& r);
bool is_quad(const Region& r);
bool same_region(const Region& a, const Region& b);

// Signed-area-free polygon utilities.
double polygon_area(std::span<const Point> poly);
std::vector<Point> convex_hull(std::vector<Point> pts);
// Sutherland-Hodgman clipping of two counter-clockwise convex polygons.
std::vector<Point> clip_convex(std::span<const Point> subject,
                               std::span<const Point> clip);

double iou_axis(const AxisBox& a, const AxisBox& b);
double iou_oriented(const OrientedQuad& a, const OrientedQuad& b);

enum class IouMode {
  kPolygon,   // convex-polygon IoU; boxes are treated as rectangles
  kAxisHull,  // IoU of axis-aligned bounding boxes
};

// Dispatches on the region types. Mixed box/quad pairs use polygon IoU in
// kPolygon mode.
double iou(const Region& a, const Region& b, IouMode mode = IouMode::kPolygon);

// Centroid distance divided by the diagram diagonal. Throws GeometryError
// when the diagram has zero diagonal.
double center_distance_normalized(const Region& a, const Region& b,
                                  const AxisBox& diagram);

}  // namespace rxn::geom

#endif  // RXN_GEOMETRY_H_
