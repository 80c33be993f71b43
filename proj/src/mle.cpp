#include "logcave/mle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "logcave/barrier_1d.hpp"
#include "logcave/concave_1d.hpp"
#include "logcave/error.hpp"
#include "logcave/integrate.hpp"

namespace logcave {
namespace {

// The majorant as a tent plus, for every observation, the tent knots and
// weights that interpolate it.
struct Majorant {
  TentFunction tent;
  std::vector<int> knot_owner;  // observation index behind each tent knot
  std::vector<std::array<std::pair<int, double>, 3>> interp;
};

void check_values(const Sample& sample, std::span<const double> values) {
  if (values.size() != sample.n()) {
    throw Error(ErrorCode::kInvalidInput, "need one value per observation");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "values must be finite");
    if (v > kMaxLogValue) throw Error(ErrorCode::kOverflow, "value exceeds the exponential range");
  }
}

// For each distinct location, the observation with the largest value (lowest
// index on ties); `rep[i]` maps every observation to its representative.
template <class Key>
std::vector<int> representatives(std::size_t n, std::span<const double> values, Key key, std::vector<int>& rep) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  std::vector<int> reps;
  rep.assign(n, -1);
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    int best = order[k];
    while (e < n && key(order[e]) == key(order[k])) {
      if (values[order[e]] > values[best] || (values[order[e]] == values[best] && order[e] < best)) best = order[e];
      ++e;
    }
    for (std::size_t q = k; q < e; ++q) rep[order[q]] = best;
    reps.push_back(best);
    k = e;
  }
  return reps;
}

Majorant majorant_1d(const Sample& sample, std::span<const double> values) {
  const std::size_t n = sample.n();
  std::vector<int> rep;
  const std::vector<int> reps = representatives(n, values, [&](int i) { return sample.x(i); }, rep);
  if (reps.size() < 2) throw Error(ErrorCode::kDegenerateHull, "all observations coincide");
  // Upper hull by monotone chain; reps are sorted by location.
  std::vector<int> hull;
  for (int i : reps) {
    while (hull.size() >= 2) {
      const int a = hull[hull.size() - 2], b = hull.back();
      const double c = (sample.x(b) - sample.x(a)) * (values[i] - values[a]) -
                       (values[b] - values[a]) * (sample.x(i) - sample.x(a));
      if (c >= 0.0) hull.pop_back();
      else break;
    }
    hull.push_back(i);
  }
  std::vector<double> knots, vals;
  for (int i : hull) knots.push_back(sample.x(i)), vals.push_back(values[i]);
  Majorant m{TentFunction::make_1d(knots, vals), hull, {}};
  m.interp.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sample.x(i);
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    std::size_t k = std::clamp<std::size_t>(it - knots.begin(), 1, knots.size() - 1);
    const double t = std::clamp((x - knots[k - 1]) / (knots[k] - knots[k - 1]), 0.0, 1.0);
    m.interp[i] = {{{static_cast<int>(k - 1), 1.0 - t}, {static_cast<int>(k), t}, {0, 0.0}}};
  }
  return m;
}

Majorant majorant_2d(const Sample& sample, std::span<const double> values) {
  const std::size_t n = sample.n();
  std::vector<int> rep;
  const std::vector<int> reps = representatives(n, values, [&](int i) { return sample.point(i); }, rep);
  std::vector<Point2> pts;
  std::vector<double> hs;
  for (int i : reps) pts.push_back(sample.point(i)), hs.push_back(values[i]);
  const std::vector<Triangle> tris = upper_hull_triangulation(pts, hs);

  std::vector<int> knot_of(pts.size(), -1);
  std::vector<int> owner;
  std::vector<Point2> knots;
  std::vector<double> vals;
  for (const auto& t : tris) {
    for (int v : t) {
      if (knot_of[v] >= 0) continue;
      knot_of[v] = static_cast<int>(knots.size());
      knots.push_back(pts[v]);
      vals.push_back(hs[v]);
      owner.push_back(reps[v]);
    }
  }
  std::vector<Triangle> remapped;
  for (const auto& t : tris) remapped.push_back({knot_of[t[0]], knot_of[t[1]], knot_of[t[2]]});
  Majorant m{TentFunction::make_2d(knots, vals, remapped), owner, {}};
  const auto& tt = m.tent.triangles();
  const TriangleLocator locator(m.tent.knots_2d(), tt);
  m.interp.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = sample.point(i);
    int t = locator.locate(p, 1e-9);
    if (t < 0) t = locate_triangle(m.tent.knots_2d(), tt, p, 1e300);
    const auto& tri = tt[t];
    auto l = barycentric(p, knots[tri[0]], knots[tri[1]], knots[tri[2]]);
    m.interp[i] = {{{tri[0], l[0]}, {tri[1], l[1]}, {tri[2], l[2]}}};
  }
  return m;
}

Majorant majorant(const Sample& sample, std::span<const double> values) {
  check_values(sample, values);
  if (sample.dim() == 1) {
    if (sample.n() < 2) throw Error(ErrorCode::kInvalidInput, "need at least 2 observations in 1D");
    return majorant_1d(sample, values);
  }
  if (sample.dim() == 2) {
    if (sample.n() < 3) throw Error(ErrorCode::kInvalidInput, "need at least 3 observations in 2D");
    return majorant_2d(sample, values);
  }
  throw Error(ErrorCode::kInvalidInput, "sample dimension must be 1 or 2");
}

double interpolate(const Majorant& m, std::size_t i) {
  double s = 0.0;
  for (const auto& [k, w] : m.interp[i]) s += w * m.tent.values()[k];
  return s;
}

}  // namespace

double objective(const Sample& sample, std::span<const double> values) {
  const Majorant m = majorant(sample, values);
  double data = 0.0;
  for (std::size_t i = 0; i < sample.n(); ++i) data += interpolate(m, i);
  return data / static_cast<double>(sample.n()) - m.tent.total_mass() + 1.0;
}

std::vector<double> objective_subgradient(const Sample& sample, std::span<const double> values) {
  const Majorant m = majorant(sample, values);
  const TentFunction& t = m.tent;
  std::vector<double> knot_grad(t.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(sample.n());
  for (std::size_t i = 0; i < sample.n(); ++i) {
    for (const auto& [k, w] : m.interp[i]) knot_grad[k] += inv_n * w;
  }
  const auto& v = t.values();
  if (t.dim() == 1) {
    const auto& x = t.knots_1d();
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      const SegmentMoments s = segment_moments(v[k], v[k + 1], x[k + 1] - x[k]);
      knot_grad[k] -= s.left;
      knot_grad[k + 1] -= s.right;
    }
  } else {
    const auto& p = t.knots_2d();
    for (const auto& tri : t.triangles()) {
      const TriangleMoments tm =
          triangle_moments({v[tri[0]], v[tri[1]], v[tri[2]]}, triangle_area(p[tri[0]], p[tri[1]], p[tri[2]]));
      for (int k = 0; k < 3; ++k) knot_grad[tri[k]] -= tm.first[k];
    }
  }
  std::vector<double> grad(sample.n(), 0.0);
  for (std::size_t k = 0; k < t.size(); ++k) grad[m.knot_owner[k]] = knot_grad[k];
  return grad;
}

TentFunction least_concave_majorant(const Sample& sample, std::span<const double> values) {
  return majorant(sample, values).tent;
}

TentFunction fit_mle_1d(const Sample& sample, const FitOptions& opts) {
  if (sample.dim() != 1) throw Error(ErrorCode::kInvalidInput, "fit_mle_1d needs a 1D sample");
  if (sample.n() < 2) throw Error(ErrorCode::kInvalidInput, "need n >= 2 observations in 1D");
  const WeightedSample1d data = collapse_ties(sample.coords());
  if (data.x.size() < 2) throw Error(ErrorCode::kDegenerateHull, "all observations coincide");
  ActiveSetOptions as;
  as.max_iterations = opts.max_iterations;
  as.tolerance = opts.objective_tolerance;
  as.start = StartRule::kSmoothed;
  const ConcaveFit1d fit = solve_concave_1d(data, as);
  if (!fit.converged) {
    throw Error(ErrorCode::kNonConvergence, "1D active set stopped after " + std::to_string(fit.iterations) +
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

TentFunction fit_mle(const Sample& sample, const FitOptions& opts) {
  if (sample.dim() == 1) return fit_mle_1d(sample, opts);
  if (sample.dim() == 2) return fit_mle_2d(sample, opts);
  throw Error(ErrorCode::kInvalidInput, "sample dimension must be 1 or 2");
}

TentFunction grid_oracle_fit(const Sample& sample, int grid_resolution) {
  if (sample.dim() != 1) throw Error(ErrorCode::kInvalidInput, "the grid oracle is 1D only");
  if (grid_resolution < 100) throw Error(ErrorCode::kInvalidInput, "grid_resolution must be >= 100");
  const WeightedSample1d data = collapse_ties(sample.coords());
  if (data.x.size() < 2) throw Error(ErrorCode::kDegenerateHull, "all observations coincide");
  const double lo = data.x.front(), hi = data.x.back();
  const GridFit1d g = solve_grid_barrier(lo, hi, grid_hat_weights(lo, hi, grid_resolution, data));
  std::vector<double> knots(grid_resolution + 1);
  for (int k = 0; k <= grid_resolution; ++k) knots[k] = lo + (hi - lo) * k / grid_resolution;
  knots.back() = hi;
  return TentFunction::make_1d(std::move(knots), g.phi).normalized();
}

double mean_log_likelihood(const TentFunction& f, const Sample& sample) {
  if (f.dim() != sample.dim()) throw Error(ErrorCode::kInvalidInput, "dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < sample.n(); ++i) {
    s += f.dim() == 1 ? f.eval_log(sample.x(i)) : f.eval_log(sample.point(i));
  }
  return s / static_cast<double>(sample.n());
}

}  // namespace logcave
