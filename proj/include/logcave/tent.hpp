#pragma once

#include <limits>
#include <span>
#include <vector>

#include "logcave/geometry.hpp"

namespace logcave {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// A closed concave piecewise-affine log-density: affine on each knot interval
// (1D) or triangle (2D), -inf outside the convex hull of the knots.
class TentFunction {
 public:
  TentFunction() = default;

  // Knots must be strictly increasing; at least two of them.
  static TentFunction make_1d(std::vector<double> knots, std::vector<double> values);
  // Triangles index into `knots` and must tile their convex hull.
  static TentFunction make_2d(std::vector<Point2> knots, std::vector<double> values,
                              std::vector<Triangle> triangles);

  int dim() const { return dim_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& knots_1d() const { return knots1_; }
  const std::vector<Point2>& knots_2d() const { return knots2_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }

  // Hull of a 1D tent.
  double lower() const { return knots1_.front(); }
  double upper() const { return knots1_.back(); }
  // Bounding box of a 2D tent.
  Point2 box_min() const { return box_min_; }
  Point2 box_max() const { return box_max_; }

  double eval_log(double x) const;
  double eval_log(const Point2& x) const;
  double eval_log(std::span<const double> x) const;
  double eval(double x) const;
  double eval(const Point2& x) const;

  double total_mass() const;

  // Knot attaining the maximal value (lowest index on ties) and the density
  // there. For 1D tents the point's second coordinate is zero.
  struct Maximum {
    Point2 point;
    double density;
    int knot;
  };
  Maximum max_density() const;

  // Concavity certificate. In 1D no interior knot value may fall below the
  // chord of its neighbours; in 2D, across each interior edge, the opposite
  // vertex may not rise above the plane of the neighbouring triangle.
  // Violations are measured in log units relative to 1 + |value|.
  bool is_concave(double tolerance) const;
  // Largest relative violation (<= 0 when strictly concave).
  double concavity_violation() const;

  TentFunction shifted(double delta) const;
  // Same tent rescaled to unit mass.
  TentFunction normalized() const;

  // Slope of the affine piece on [knot_k, knot_{k+1}] (1D).
  double slope(std::size_t piece) const;

 private:
  int dim_ = 0;
  std::vector<double> knots1_;
  std::vector<Point2> knots2_;
  std::vector<double> values_;
  std::vector<Triangle> triangles_;
  std::vector<std::array<Point2, 2>> tri_boxes_;
  Point2 box_min_{0, 0}, box_max_{0, 0};
};

}  // namespace logcave
