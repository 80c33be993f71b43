#pragma once

#include <vector>

#include "logcave/concave_1d.hpp"

namespace logcave {

// Weights c_k = sum_i w_i * hat_k(x_i) of the hat functions on a uniform grid
// of `cells` cells over [lo, hi]. Data outside the grid is rejected.
std::vector<double> grid_hat_weights(double lo, double hi, int cells, const WeightedSample1d& data);

struct GridFit1d {
  double lo = 0.0, hi = 1.0;
  std::vector<double> phi;  // log-density at the cells + 1 grid nodes
  int newton_steps = 0;
  double objective = 0.0;   // sum_k c_k phi_k - ∫ exp(phi) + 1
};

// Maximises sum_k c_k phi_k - ∫ exp(phi) + 1 over grid-piecewise-linear phi
// with nonpositive second differences by a primal-dual interior point method
// (Newton on the banded reduced system, centring parameter 0.1) until the
// complementarity gap drops below `gap`. Independent of the active-set solver;
// meant as a slow reference.
GridFit1d solve_grid_barrier(double lo, double hi, const std::vector<double>& node_weights,
                             double gap = 1e-10);

}  // namespace logcave
