#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "logcave/sample.hpp"
#include "logcave/tent.hpp"

namespace logcave {

enum class StepRule { kDiminishing, kBacktracking };

struct FitOptions {
  int max_iterations = 1000;
  double objective_tolerance = 1e-10;
  StepRule step_rule = StepRule::kDiminishing;
  int grid_resolution = 4000;  // grid oracle only
  std::uint64_t seed = 0;      // 2D restart perturbations
  int restarts = 3;            // 2D
  int subgradient_iterations = 300;  // 2D, per restart
};

// L(y) = (1/n) sum_i hbar_y(X_i) - ∫ exp(hbar_y) + 1, where hbar_y is the
// least concave majorant of the pairs (X_i, y_i) on the convex hull of the
// sample.
double objective(const Sample& sample, std::span<const double> values);

// Gradient of L where it exists (a supergradient elsewhere): for each
// observation that is a vertex of the majorant, the data share of its
// piecewise-linear basis function minus the integral of that basis function
// against exp(hbar_y); zero for observations strictly below the majorant.
// Tied observations credit the lowest index among those with the largest value.
std::vector<double> objective_subgradient(const Sample& sample, std::span<const double> values);

// Least concave majorant of (X_i, y_i), as a tent on the sample hull.
// 2D raises DEGENERATE_HULL for collinear samples.
TentFunction least_concave_majorant(const Sample& sample, std::span<const double> values);

// Log-concave maximum likelihood estimate from a 1D sample with at least two
// distinct points. NON_CONVERGENCE if the iteration budget runs out first.
TentFunction fit_mle_1d(const Sample& sample, const FitOptions& opts = {});

// Log-concave maximum likelihood estimate from a 2D sample whose hull has
// positive area. Subgradient ascent on the observation values from several
// seeded starts, then an active-set Newton refinement on the triangulation of
// the best iterate.
TentFunction fit_mle_2d(const Sample& sample, const FitOptions& opts = {});

// Dispatches on the sample dimension.
TentFunction fit_mle(const Sample& sample, const FitOptions& opts = {});

// Reference fit on a uniform grid of `grid_resolution` cells over the sample
// range (1D), solved by an interior point method that shares no code with
// fit_mle_1d.
TentFunction grid_oracle_fit(const Sample& sample, int grid_resolution);

// (1/n) sum_i log f(X_i).
double mean_log_likelihood(const TentFunction& f, const Sample& sample);

}  // namespace logcave
