#pragma once

#include "logcave/density.hpp"

namespace logcave {

// Integration window and resolution. 1D uses [lo, hi]; 2D uses the box
// [lo2, hi2] with cells2 x cells2 tensor cells. Gauss-Legendre orders
// supported: 4, 5, 6, 8, 10, 12, 16, 20.
struct QuadratureSpec {
  double lo = 0.0;
  double hi = 1.0;
  int cells = 2000;
  int nodes_per_cell = 8;
  Point2 lo2{0, 0};
  Point2 hi2{1, 1};
  int cells2 = 120;

  // Smallest window holding all but 1e-10 of each density's mass (1D) or the
  // box spanning 1 - 1e-10 coordinate quantiles and tent hulls (2D). With
  // a > 0 the window is widened until the weighted tails of the catalog
  // densities outside it are below 1e-8.
  static QuadratureSpec covering(const DensityLike& f, const DensityLike& g, double a = 0.0);
};

struct WeightExponent {
  double a = 0.0;
};

// Mass each density must keep inside the window.
inline constexpr double kWindowMass = 1.0 - 1e-8;

// ∫ |f - g|, in [0, 2].
double tv_distance(const DensityLike& f, const DensityLike& g, const QuadratureSpec& q);

// ∫ exp(a ||x||) |f - g|. Tent pairs in 1D are integrated in closed form
// between knots and crossings. DIVERGENT when the weighted mass of either
// density outside the window exceeds 1e-4.
double weighted_tv(const DensityLike& f, const DensityLike& g, WeightExponent w, const QuadratureSpec& q);

// max exp(a ||x||) |f - g| over a scan of cells * nodes_per_cell points (1D)
// or the 2D node grid, plus every tent knot and kink; a lower bound on the sup.
double weighted_sup(const DensityLike& f, const DensityLike& g, WeightExponent w, const QuadratureSpec& q);

// (∫ (sqrt f - sqrt g)^2)^{1/2}, in [0, sqrt 2].
double hellinger(const DensityLike& f, const DensityLike& g, const QuadratureSpec& q);

// ∫ f0 log(f0 / f) with 0 log 0 = 0; +inf when f < 1e-300 somewhere on a
// cell where f0 has mass above 1e-10.
double kl_divergence(const DensityLike& f0, const DensityLike& f, const QuadratureSpec& q);

// ∫ log((b + f_star) / (b + f_n)) dF0 over the window.
double smoothed_log_ratio(const DensityLike& f_star, const DensityLike& f_n, const AnalyticDensity& f0, double b,
                          const QuadratureSpec& q);

}  // namespace logcave
