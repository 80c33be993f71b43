#include "logcave/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "logcave/error.hpp"

namespace logcave {
namespace {

constexpr int kScanPoints = 10000;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Nudges b up by a relative hair so the bound also holds between the points
// the maximisation visited.
double pad(double b) { return b + 1e-12 * (1.0 + std::fabs(b)); }

template <class F>
double golden_max(F&& g, double lo, double hi) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double gc = g(c), gd = g(d);
  for (int it = 0; it < 100 && b - a > 1e-14 * (1.0 + std::fabs(a)); ++it) {
    if (gc >= gd) {
      b = d, d = c, gd = gc;
      c = b - r * (b - a), gc = g(c);
    } else {
      a = c, c = d, gc = gd;
      d = a + r * (b - a), gd = g(d);
    }
  }
  return std::max({gc, gd, g(lo), g(hi)});
}

// max over x in [lo, hi] of g, by a grid scan with golden refinement around
// every grid-local maximum.
template <class F>
double maximise_1d(F&& g, double lo, double hi, int points) {
  std::vector<double> xs(points + 1), gs(points + 1);
  for (int i = 0; i <= points; ++i) {
    xs[i] = lo + (hi - lo) * i / points;
    gs[i] = g(xs[i]);
  }
  double best = *std::max_element(gs.begin(), gs.end());
  for (int i = 0; i <= points; ++i) {
    const bool left_ok = i == 0 || gs[i] >= gs[i - 1];
    const bool right_ok = i == points || gs[i] >= gs[i + 1];
    if (!left_ok || !right_ok || !std::isfinite(gs[i])) continue;
    const double a = xs[std::max(i - 1, 0)], b = xs[std::min(i + 1, points)];
    best = std::max(best, golden_max(g, a, b));
  }
  return best;
}

EnvelopeResult tent_envelope(const TentFunction& t, double margin) {
  EnvelopeResult r;
  const auto& v = t.values();
  double a = 0.0;
  if (t.dim() == 1) {
    const double left = std::fabs(t.slope(0));
    const double right = std::fabs(t.slope(t.size() - 2));
    a = std::min(left, right) * (1.0 - margin);
  }
  if (!(a > 0.0)) {
    a = kCompactSupportRate;
    r.degenerate_support = true;
  }
  // log f + a||x|| is convex on every piece, so its maximum sits at a knot.
  double b = -kInf;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double norm = t.dim() == 1 ? std::fabs(t.knots_1d()[k]) : std::hypot(t.knots_2d()[k][0], t.knots_2d()[k][1]);
    b = std::max(b, v[k] + a * norm);
  }
  r.envelope = {a, b};
  return r;
}

EnvelopeResult analytic_envelope_1d(const AnalyticDensity& f, double window, double margin) {
  EnvelopeResult r;
  const Interval support = f.support();
  const double m = f.mode();
  double rate = kInf;
  if (std::isfinite(support.lo) && std::isfinite(support.hi)) {
    r.degenerate_support = true;
  } else {
    const double peak = f.log_pdf(m);
    for (int side : {-1, 1}) {
      for (int i = 0; i <= kScanPoints / 2; ++i) {
        const double dist = 0.5 * window + 0.5 * window * i / (kScanPoints / 2);
        const double lp = f.log_pdf(m + side * dist);
        if (!std::isfinite(lp)) continue;
        rate = std::min(rate, (peak - lp) / dist);
      }
    }
    if (!std::isfinite(rate)) r.degenerate_support = true;
  }
  const double a = r.degenerate_support ? kCompactSupportRate : rate * (1.0 - margin);
  if (!(a > 0.0)) {
    throw Error(ErrorCode::kInvalidF0, "density does not decay over the scanned window");
  }
  auto g = [&](double x) { return f.log_pdf(x) + a * std::fabs(x); };
  double lo = m - window, hi = m + window;
  if (r.degenerate_support) lo = support.lo, hi = support.hi;
  lo = std::max(lo, support.lo);
  hi = std::min(hi, support.hi);
  double b = maximise_1d(g, lo, hi, kScanPoints);
  if (lo < 0.0 && hi > 0.0) b = std::max(b, g(0.0));
  r.envelope = {a, pad(b)};
  return r;
}

EnvelopeResult analytic_envelope_2d(const AnalyticDensity& f, double window, double margin) {
  EnvelopeResult r;
  const auto box = f.support_box();
  const bool compact = std::isfinite(box[0].lo) && std::isfinite(box[0].hi) &&
                       std::isfinite(box[1].lo) && std::isfinite(box[1].hi);
  const Point2 m = f.mode_2d();
  double rate = kInf;
  if (!compact) {
    const double peak = f.log_pdf(m);
    const int angles = 90, radii = 100;
    for (int k = 0; k < angles; ++k) {
      const double th = 2.0 * std::numbers::pi * k / angles;
      for (int i = 0; i <= radii; ++i) {
        const double dist = 0.5 * window * (1.0 + static_cast<double>(i) / radii);
        const double lp = f.log_pdf(Point2{m[0] + dist * std::cos(th), m[1] + dist * std::sin(th)});
        if (!std::isfinite(lp)) continue;
        rate = std::min(rate, (peak - lp) / dist);
      }
    }
  }
  if (compact || !std::isfinite(rate)) r.degenerate_support = true;
  const double a = r.degenerate_support ? kCompactSupportRate : rate * (1.0 - margin);
  if (!(a > 0.0)) {
    throw Error(ErrorCode::kInvalidF0, "density does not decay over the scanned window");
  }
  auto g = [&](const Point2& x) { return f.log_pdf(x) + a * std::hypot(x[0], x[1]); };
  Point2 lo{m[0] - window, m[1] - window}, hi{m[0] + window, m[1] + window};
  for (int d = 0; d < 2; ++d) {
    lo[d] = std::max(lo[d], box[d].lo);
    hi[d] = std::min(hi[d], box[d].hi);
  }
  const int grid = 300;
  Point2 best_x = m;
  double best = g(m);
  for (int i = 0; i <= grid; ++i) {
    for (int j = 0; j <= grid; ++j) {
      const Point2 x{lo[0] + (hi[0] - lo[0]) * i / grid, lo[1] + (hi[1] - lo[1]) * j / grid};
      const double v = g(x);
      if (v > best) best = v, best_x = x;
    }
  }
  // Compass search from the best grid point.
  double step = std::max(hi[0] - lo[0], hi[1] - lo[1]) / grid;
  while (step > 1e-12) {
    bool moved = false;
    for (const Point2 dir : {Point2{1, 0}, Point2{-1, 0}, Point2{0, 1}, Point2{0, -1}}) {
      const Point2 x{best_x[0] + step * dir[0], best_x[1] + step * dir[1]};
      const double v = g(x);
      if (v > best) best = v, best_x = x, moved = true;
    }
    if (!moved) step *= 0.5;
  }
  r.envelope = {a, pad(best)};
  return r;
}

}  // namespace

EnvelopeResult tail_envelope(const DensityLike& f, double window, double margin) {
  if (!(window > 0.0)) throw Error(ErrorCode::kInvalidInput, "envelope window must be positive");
  if (!(margin >= 0.0 && margin < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "envelope margin must lie in [0, 1)");
  }
  if (const auto* t = std::get_if<TentFunction>(&f)) return tent_envelope(*t, margin);
  const auto& a = std::get<AnalyticDensity>(f);
  return a.dim() == 1 ? analytic_envelope_1d(a, window, margin)
                      : analytic_envelope_2d(a, window, margin);
}

}  // namespace logcave
