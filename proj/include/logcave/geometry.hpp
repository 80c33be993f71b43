#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace logcave {

using Point2 = std::array<double, 2>;
using Triangle = std::array<int, 3>;

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline double triangle_area(const Point2& a, const Point2& b, const Point2& c) {
  const double twice = cross(a, b, c);
  return 0.5 * (twice < 0 ? -twice : twice);
}

// Barycentric coordinates of p with respect to (a, b, c); extends affinely
// outside the triangle.
std::array<double, 3> barycentric(const Point2& p, const Point2& a, const Point2& b,
                                  const Point2& c);

// Counter-clockwise convex hull (indices), collinear boundary points dropped.
std::vector<int> convex_hull_2d(std::span<const Point2> points);

double polygon_area(std::span<const Point2> points, std::span<const int> hull);

// Triangles (counter-clockwise, indices into `points`) of the upper convex hull
// of the lifted set {(points[i], heights[i])}. Points on or below the hull are
// not vertices; coplanar regions are triangulated arbitrarily but
// deterministically. Throws DEGENERATE_HULL when the points are collinear.
std::vector<Triangle> upper_hull_triangulation(std::span<const Point2> points,
                                               std::span<const double> heights);

// Bucket grid over a triangulation for repeated point location.
class TriangleLocator {
 public:
  TriangleLocator(std::span<const Point2> vertices, std::span<const Triangle> triangles);
  // Index of a triangle containing p (closed, barycentric slack `tolerance`),
  // or -1.
  int locate(const Point2& p, double tolerance = 1e-12) const;

 private:
  std::pair<int, int> cell(const Point2& p) const;

  std::vector<Point2> vertices_;
  std::vector<Triangle> triangles_;
  Point2 lo_{0, 0}, hi_{0, 0};
  int cells_ = 1;
  std::vector<std::vector<int>> buckets_;
};

// Index of the triangle containing p (closed), or -1.
int locate_triangle(std::span<const Point2> vertices, std::span<const Triangle> triangles,
                    const Point2& p, double tolerance = 1e-12);

}  // namespace logcave
