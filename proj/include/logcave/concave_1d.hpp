#pragma once

#include <span>
#include <vector>

namespace logcave {

// Sorted distinct nodes with positive weights summing to one.
struct WeightedSample1d {
  std::vector<double> x;
  std::vector<double> w;
};

// Collapses tied observations into one node of weight multiplicity / n.
WeightedSample1d collapse_ties(std::span<const double> xs);

enum class StartRule {
  kSmoothed,  // least concave majorant of a log kernel density estimate
  kUniform,   // flat log-density over the node range
};

struct ActiveSetOptions {
  int max_iterations = 1000;
  double tolerance = 1e-10;
  StartRule start = StartRule::kSmoothed;
};

struct ConcaveFit1d {
  std::vector<double> phi;  // log-density at every node
  std::vector<char> knot;   // nodes where the slope may change
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
};

// Maximises sum_i w_i phi(x_i) - ∫ exp(phi) + 1 over concave phi that are
// linear between nodes and -inf outside [x_0, x_{m-1}]. The maximiser has unit
// mass. Active-set Newton on knot values: each pass solves the tridiagonal
// Newton system on the current knot set, steps back to the first knot whose
// kink would turn convex and drops it, and once stationary adds the node with
// the largest directional derivative until none is positive.
ConcaveFit1d solve_concave_1d(const WeightedSample1d& data, const ActiveSetOptions& opts);

}  // namespace logcave
