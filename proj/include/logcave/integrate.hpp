#pragma once

#include <array>
#include <span>

#include <Eigen/Dense>

namespace logcave {

// Largest argument for which exp() is finite.
inline constexpr double kMaxLogValue = 709.782712893384;

// ∫ exp(affine) over a segment of the given length whose endpoint log-values
// are y_left and y_right.
double integrate_exp_segment(double y_left, double y_right, double length);

// ∫ exp(affine) over a dim-simplex (dim in {1, 2}) with the given vertex
// log-values and volume: dim! * volume * exp[y_0, ..., y_dim].
double integrate_exp_simplex(std::span<const double> values, double volume, int dim);

// Upper-triangular table T with T(i, j) = exp[t_i, ..., t_j], the divided
// differences of exp over consecutive runs of `nodes` (repeated nodes allowed).
// Computed as the exponential of the bidiagonal Opitz matrix by scaling and
// squaring, which stays accurate for clustered and confluent nodes.
Eigen::MatrixXd exp_divided_differences(std::span<const double> nodes);

// Weighted integrals over a segment with linear log-density from y_left
// (t = 0) to y_right (t = 1), scaled by the segment length:
//   zero  = ∫ e^φ,            left  = ∫ (1-t) e^φ,    right = ∫ t e^φ,
//   left2 = ∫ (1-t)^2 e^φ,    cross = ∫ t(1-t) e^φ,   right2 = ∫ t^2 e^φ.
struct SegmentMoments {
  double zero;
  double left;
  double right;
  double left2;
  double cross;
  double right2;
};
SegmentMoments segment_moments(double y_left, double y_right, double length);

// Same idea over a triangle of the given area with vertex log-values y:
// zero = ∫ e^φ, first[k] = ∫ λ_k e^φ, second[k][l] = ∫ λ_k λ_l e^φ where λ are
// barycentric coordinates.
struct TriangleMoments {
  double zero;
  std::array<double, 3> first;
  std::array<std::array<double, 3>, 3> second;
};
TriangleMoments triangle_moments(const std::array<double, 3>& y, double area);

}  // namespace logcave
