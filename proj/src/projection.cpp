#include "logcave/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "logcave/error.hpp"

namespace logcave {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInternalTolerance = 1e-13;
using Gauss8 = boost::math::quadrature::gauss<double, 8>;

// ∫_a^b g over cells no wider than `width`, split at the kinks of f0.
template <class G>
double composite(const AnalyticDensity& f0, double a, double b, double width, G&& g) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts{a, b};
  for (double x : f0.breakpoints()) {
    if (x > a && x < b) cuts.push_back(x);
  }
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k], hi = cuts[k + 1];
    const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / width)));
    for (int p = 0; p < pieces; ++p) {
      const double u = lo + (hi - lo) * p / pieces, v = p + 1 == pieces ? hi : lo + (hi - lo) * (p + 1) / pieces;
      s += Gauss8::integrate(g, u, v);
    }
  }
  return s;
}

double mass_between(const AnalyticDensity& f0, double a, double b) {
  if (!(b > a)) return 0.0;
  return std::max(0.0, f0.cdf(b) - f0.cdf(a));
}

Interval window_of(const AnalyticDensity& f0) {
  const Interval s = f0.support();
  const double lo = std::isfinite(s.lo) ? s.lo : f0.quantile(0.5 * kProjectionTailCut);
  const double hi = std::isfinite(s.hi) ? s.hi : f0.quantile(1.0 - 0.5 * kProjectionTailCut);
  return {lo, hi};
}

}  // namespace

ProjectionProblem ProjectionProblem::make(const AnalyticDensity& f0, int grid_resolution, double tolerance) {
  if (f0.dim() != 1) throw Error(ErrorCode::kInvalidF0, "the projection is univariate only");
  if (grid_resolution < 2) throw Error(ErrorCode::kInvalidInput, "grid_resolution must be >= 2");
  if (!(tolerance > 0.0)) throw Error(ErrorCode::kInvalidInput, "tolerance must be positive");
  const Interval w = window_of(f0);
  if (!(w.hi > w.lo)) throw Error(ErrorCode::kInvalidF0, "support of f0 has empty interior");
  const double width = (w.hi - w.lo) / 2000.0;
  const double moment = composite(f0, w.lo, w.hi, width, [&](double x) { return std::fabs(x) * f0.pdf(x); });
  const double entropy_part = composite(f0, w.lo, w.hi, width, [&](double x) {
    const double p = f0.pdf(x);
    return p > 1.0 ? p * std::log(p) : 0.0;
  });
  if (!std::isfinite(moment)) throw Error(ErrorCode::kInvalidF0, "first absolute moment of f0 is not finite");
  if (!std::isfinite(entropy_part)) throw Error(ErrorCode::kInvalidF0, "∫ f0 log+ f0 is not finite");
  return {f0, w.lo, w.hi, grid_resolution, tolerance};
}

std::vector<double> projection_hat_weights(const ProjectionProblem& pr) {
  const int cells = pr.grid_resolution;
  const double h = (pr.hi - pr.lo) / cells;
  std::vector<double> c(cells + 1, 0.0);
  for (int k = 0; k < cells; ++k) {
    const double a = pr.lo + h * k, b = k + 1 == cells ? pr.hi : pr.lo + h * (k + 1);
    c[k] += composite(pr.f0, a, b, b - a, [&](double x) { return pr.f0.pdf(x) * (b - x) / (b - a); });
    c[k + 1] += composite(pr.f0, a, b, b - a, [&](double x) { return pr.f0.pdf(x) * (x - a) / (b - a); });
  }
  return c;
}

TentFunction project_kl(const ProjectionProblem& pr, StartRule start) {
  const std::vector<double> c = projection_hat_weights(pr);
  double total = 0.0;
  for (double v : c) total += v;
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidF0, "f0 has no mass on the projection window");
  WeightedSample1d data;
  const int cells = pr.grid_resolution;
  for (int k = 0; k <= cells; ++k) {
    if (!(c[k] > 0.0)) continue;
    data.x.push_back(k == cells ? pr.hi : pr.lo + (pr.hi - pr.lo) * k / cells);
    data.w.push_back(c[k] / total);
  }
  if (data.x.size() < 2) throw Error(ErrorCode::kInvalidF0, "f0 charges fewer than two grid nodes");
  ActiveSetOptions opts;
  opts.max_iterations = 20 * static_cast<int>(data.x.size()) + 100;
  // G is flat near its maximiser, so the knot set needs a residual far below
  // any useful tolerance before two starts agree in sup norm.
  opts.tolerance = std::min(pr.tolerance, kInternalTolerance);
  opts.start = start;
  const ConcaveFit1d fit = solve_concave_1d(data, opts);
  if (!fit.converged) {
    throw Error(ErrorCode::kNonConvergence, "projection stopped after " + std::to_string(fit.iterations) +
                                                " iterations with KKT residual " + std::to_string(fit.kkt_residual));
  }
  std::vector<double> knots, values;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    if (!fit.knot[i]) continue;
    knots.push_back(data.x[i]);
    values.push_back(fit.phi[i]);
  }
  return TentFunction::make_1d(std::move(knots), std::move(values)).normalized();
}

double projection_objective(const ProjectionProblem& pr, const TentFunction& f) {
  if (f.dim() != 1) throw Error(ErrorCode::kInvalidInput, "projection objective needs a 1D tent");
  const double lo = std::max(pr.lo, f.lower()), hi = std::min(pr.hi, f.upper());
  const double uncovered = mass_between(pr.f0, pr.lo, std::min(lo, pr.hi)) + mass_between(pr.f0, std::max(hi, pr.lo), pr.hi);
  if (!(hi > lo) || uncovered > 1e-10) return -kInf;
  const double width = (pr.hi - pr.lo) / pr.grid_resolution;
  const double data = composite(pr.f0, lo, hi, width, [&](double x) { return pr.f0.pdf(x) * f.eval_log(x); });
  return data - f.total_mass() + 1.0;
}

TentFunction geometric_mean_combine(const TentFunction& f1, const TentFunction& f2) {
  if (f1.dim() != 1 || f2.dim() != 1) throw Error(ErrorCode::kInvalidInput, "geometric mean is implemented for 1D tents");
  const double lo = std::max(f1.lower(), f2.lower()), hi = std::min(f1.upper(), f2.upper());
  if (!(hi > lo)) throw Error(ErrorCode::kDisjointSupport, "the tents overlap in at most a point");
  std::vector<double> knots{lo, hi};
  for (const auto* f : {&f1, &f2}) {
    for (double x : f->knots_1d()) {
      if (x > lo && x < hi) knots.push_back(x);
    }
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  std::vector<double> values;
  for (double x : knots) values.push_back(0.5 * (f1.eval_log(x) + f2.eval_log(x)));
  return TentFunction::make_1d(std::move(knots), std::move(values)).normalized();
}

double projection_gap(const AnalyticDensity& f0, const TentFunction& f, const TentFunction& f_star) {
  if (f.dim() != 1 || f_star.dim() != 1) throw Error(ErrorCode::kInvalidInput, "projection gap needs 1D tents");
  const ProjectionProblem pr = ProjectionProblem::make(f0);
  auto uncovered = [&](const TentFunction& t) {
    return mass_between(f0, pr.lo, std::min(t.lower(), pr.hi)) + mass_between(f0, std::max(t.upper(), pr.lo), pr.hi);
  };
  if (uncovered(f) > 1e-10) return kInf;
  if (uncovered(f_star) > 1e-10) return -kInf;
  const double lo = std::max({pr.lo, f.lower(), f_star.lower()});
  const double hi = std::min({pr.hi, f.upper(), f_star.upper()});
  const double width = (pr.hi - pr.lo) / pr.grid_resolution;
  return composite(f0, lo, hi, width, [&](double x) { return f0.pdf(x) * (f_star.eval_log(x) - f.eval_log(x)); });
}

}  // namespace logcave
