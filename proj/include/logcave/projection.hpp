#pragma once

#include "logcave/analytic.hpp"
#include "logcave/concave_1d.hpp"
#include "logcave/tent.hpp"

namespace logcave {

// Tail mass of f0 left outside the projection window.
inline constexpr double kProjectionTailCut = 1e-8;

// Log-concave projection of a univariate catalog density onto a uniform grid
// over [lo, hi].
struct ProjectionProblem {
  AnalyticDensity f0;
  double lo = 0.0;
  double hi = 1.0;
  int grid_resolution = 2000;  // cells
  double tolerance = 1e-6;     // bound on the KKT residual; solved to <= 1e-13

  // Window from the f0 quantiles at kProjectionTailCut / 2 on each side,
  // replaced by the support end where that is finite. Checks the hypotheses
  // (univariate, finite first moment, finite ∫ f0 log+ f0, nonempty support
  // interior) and throws INVALID_F0 when one fails.
  static ProjectionProblem make(const AnalyticDensity& f0, int grid_resolution = 2000, double tolerance = 1e-6);
};

// Node weights ∫ f0 hat_k over the window, per cell by 8-point Gauss-Legendre
// (cells split at the kinks of f0).
std::vector<double> projection_hat_weights(const ProjectionProblem& problem);

// Maximises G(phi) = ∫ f0 phi - ∫ exp(phi) + 1 over concave phi linear on the
// grid cells. With phi linear per cell the first term is sum_k c_k phi_k, so
// this is the weighted active-set problem on the grid nodes. `start` selects
// the initial iterate. NON_CONVERGENCE if the KKT residual stays above
// tolerance.
TentFunction project_kl(const ProjectionProblem& problem, StartRule start = StartRule::kSmoothed);

// G(phi) over the problem window for a 1D tent; -inf when the tent vanishes
// where f0 puts mass above 1e-10.
double projection_objective(const ProjectionProblem& problem, const TentFunction& f);

// Normalised geometric mean sqrt(f1 f2) / ∫ sqrt(f1 f2) on the union of the
// knots inside the common hull. DISJOINT_SUPPORT if the hulls overlap in at
// most a point.
TentFunction geometric_mean_combine(const TentFunction& f1, const TentFunction& f2);

// d_KL(f0, f) - d_KL(f0, f_star) = ∫ f0 (log f_star - log f) over the window
// of ProjectionProblem::make(f0); +inf when f vanishes on f0 mass.
double projection_gap(const AnalyticDensity& f0, const TentFunction& f, const TentFunction& f_star);

}  // namespace logcave
