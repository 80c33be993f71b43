#include "logcave/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "logcave/envelope.hpp"
#include "logcave/error.hpp"
#include "logcave/integrate.hpp"

namespace logcave {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTail = 1e-10;

using Fn = std::function<double(double)>;

template <int N>
double gauss_n(const Fn& g, double a, double b) {
  return boost::math::quadrature::gauss<double, N>::integrate(g, a, b);
}

double gauss(int order, const Fn& g, double a, double b) {
  switch (order) {
    case 4: return gauss_n<4>(g, a, b);
    case 5: return gauss_n<5>(g, a, b);
    case 6: return gauss_n<6>(g, a, b);
    case 8: return gauss_n<8>(g, a, b);
    case 10: return gauss_n<10>(g, a, b);
    case 12: return gauss_n<12>(g, a, b);
    case 16: return gauss_n<16>(g, a, b);
    case 20: return gauss_n<20>(g, a, b);
    default: throw Error(ErrorCode::kInvalidInput, "nodes_per_cell must be one of 4, 5, 6, 8, 10, 12, 16, 20");
  }
}

// Gauss-Legendre nodes and weights on [-1, 1], for the 2D tensor rule.
std::pair<std::vector<double>, std::vector<double>> gauss_rule(int order) {
  std::vector<double> x, w;
  auto take = [&](auto tag) {
    using G = decltype(tag);
    const auto& ab = G::abscissa();
    const auto& wt = G::weights();
    for (std::size_t i = 0; i < ab.size(); ++i) {
      if (ab[i] == 0.0) {
        x.push_back(0.0), w.push_back(wt[i]);
      } else {
        x.push_back(ab[i]), w.push_back(wt[i]);
        x.push_back(-ab[i]), w.push_back(wt[i]);
      }
    }
  };
  using boost::math::quadrature::gauss;
  switch (order) {
    case 4: take(gauss<double, 4>()); break;
    case 5: take(gauss<double, 5>()); break;
    case 6: take(gauss<double, 6>()); break;
    case 8: take(gauss<double, 8>()); break;
    case 10: take(gauss<double, 10>()); break;
    case 12: take(gauss<double, 12>()); break;
    case 16: take(gauss<double, 16>()); break;
    case 20: take(gauss<double, 20>()); break;
    default: throw Error(ErrorCode::kInvalidInput, "nodes_per_cell must be one of 4, 5, 6, 8, 10, 12, 16, 20");
  }
  return {x, w};
}

void check_spec(const QuadratureSpec& q, int dim) {
  if (q.nodes_per_cell < 4) throw Error(ErrorCode::kInvalidInput, "nodes_per_cell must be >= 4");
  if (dim == 1) {
    if (!(q.hi > q.lo) || q.cells < 1) throw Error(ErrorCode::kInvalidInput, "quadrature window needs hi > lo and cells >= 1");
  } else if (!(q.hi2[0] > q.lo2[0] && q.hi2[1] > q.lo2[1]) || q.cells2 < 1) {
    throw Error(ErrorCode::kInvalidInput, "quadrature box needs hi2 > lo2 and cells2 >= 1");
  }
}

int common_dim(const DensityLike& f, const DensityLike& g) {
  const int d = density_dim(f);
  if (d != density_dim(g)) throw Error(ErrorCode::kInvalidInput, "densities of different dimension");
  return d;
}

// ---------------------------------------------------------------- 1D ----

void check_window_1d(const DensityLike& f, const QuadratureSpec& q) {
  const double inside = density_mass_in(f, q.lo, q.hi);
  if (inside < density_total_mass(f) - (1.0 - kWindowMass)) {
    throw Error(ErrorCode::kWindowTooSmall, "window [" + std::to_string(q.lo) + ", " + std::to_string(q.hi) +
                                                "] leaves mass " + std::to_string(density_total_mass(f) - inside) + " outside");
  }
}

// Central range holding all but 2e-6 of the mass (catalog) or the hull (tents).
Interval bulk(const DensityLike& f) {
  if (const auto* t = std::get_if<TentFunction>(&f)) return {t->lower(), t->upper()};
  const auto& a = std::get<AnalyticDensity>(f);
  return {a.quantile(1e-6), a.quantile(1.0 - 1e-6)};
}

// True when the density blows up at x from the side `dir` (+1 or -1).
bool singular_at(const DensityLike& f, double x, double dir, double span) {
  const double near = density_pdf(f, x + dir * 1e-12 * std::max(1.0, std::fabs(x)));
  const double far = density_pdf(f, x + dir * 1e-3 * span);
  return std::isinf(near) || near > 30.0 * std::max(far, 1e-300);
}

// Window cells split at every kink of the inputs (and at 0 when weighted).
// Cells inside the joint bulk are no wider than its length / cells, the rest
// no wider than (hi - lo) / cells; next to a breakpoint where a density is
// unbounded the cells shrink geometrically towards it.
std::vector<double> cuts_1d(std::initializer_list<const DensityLike*> fs, const QuadratureSpec& q, bool weighted) {
  std::vector<double> cuts{q.lo, q.hi};
  std::vector<double> breaks;
  double core_lo = kInf, core_hi = -kInf;
  for (const auto* f : fs) {
    for (double x : density_breakpoints(*f)) {
      if (x > q.lo && x < q.hi) cuts.push_back(x);
      if (x >= q.lo && x <= q.hi) breaks.push_back(x);
    }
    const Interval c = bulk(*f);
    core_lo = std::min(core_lo, c.lo), core_hi = std::max(core_hi, c.hi);
  }
  core_lo = std::max(core_lo, q.lo), core_hi = std::min(core_hi, q.hi);
  const bool has_core = core_hi > core_lo;
  if (has_core) cuts.push_back(core_lo), cuts.push_back(core_hi);
  if (weighted && q.lo < 0.0 && q.hi > 0.0) cuts.push_back(0.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double outer = (q.hi - q.lo) / q.cells;
  const double inner = has_core ? std::min(outer, (core_hi - core_lo) / q.cells) : outer;
  std::vector<double> out{cuts.front()};
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
    const double width = has_core && mid > core_lo && mid < core_hi ? inner : outer;
    const int pieces = std::max(1, static_cast<int>(std::ceil((cuts[k + 1] - cuts[k]) / width - 1e-9)));
    for (int p = 1; p < pieces; ++p) out.push_back(cuts[k] + (cuts[k + 1] - cuts[k]) * p / pieces);
    out.push_back(cuts[k + 1]);
  }
  std::vector<double> graded;
  for (double x : breaks) {
    const auto it = std::lower_bound(out.begin(), out.end(), x);
    for (double dir : {-1.0, 1.0}) {
      const bool right = dir > 0;
      if (right ? (it == out.end() || it + 1 == out.end()) : it == out.begin()) continue;
      const double w = std::max(right ? *(it + 1) - x : x - *(it - 1), outer);
      bool sing = false;
      for (const auto* f : fs) sing = sing || singular_at(*f, x, dir, q.hi - q.lo);
      if (!sing) continue;
      // Stop where the cells would drop below floating-point resolution at x.
      const double floor = 1e-13 * std::max(1.0, std::fabs(x));
      for (double h = 0.2 * w; h > floor; h *= 0.2) graded.push_back(x + dir * h);
    }
  }
  if (!graded.empty()) {
    out.insert(out.end(), graded.begin(), graded.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

double sum_cells(const std::vector<double>& cuts, int order, const Fn& g) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) s += gauss(order, g, cuts[k], cuts[k + 1]);
  return s;
}

// ∫_a^b |d| for a continuous d, split at the sign changes seen on a
// 9-point scan.
double integrate_abs(const Fn& d, double a, double b, int order) {
  constexpr int kScan = 8;
  // Endpoint values can be infinite at a density's jump or pole; scan just
  // inside instead.
  auto probe = [&](double x, double inward) {
    const double v = d(x);
    return std::isfinite(v) ? std::pair{x, v} : std::pair{x + inward, d(x + inward)};
  };
  const double nudge = 1e-9 * (b - a);
  std::vector<double> xs{a};
  auto [prev_x, prev] = probe(a, nudge);
  for (int i = 1; i <= kScan; ++i) {
    const auto [x, v] = i == kScan ? probe(b, -nudge) : probe(a + (b - a) * i / kScan, 0.0);
    if ((prev < 0.0 && v > 0.0) || (prev > 0.0 && v < 0.0)) {
      std::uintmax_t iters = 100;
      const auto r = boost::math::tools::toms748_solve(d, prev_x, x, prev, v,
                                                       boost::math::tools::eps_tolerance<double>(50), iters);
      xs.push_back(std::clamp(0.5 * (r.first + r.second), prev_x, x));
    }
    prev_x = x, prev = v;
  }
  xs.push_back(b);
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    if (xs[k + 1] > xs[k]) s += std::fabs(gauss(order, d, xs[k], xs[k + 1]));
  }
  return s;
}

// Weighted mass of an analytic density outside the window; kInf when the
// weighted tail does not decay.
double weighted_tail_1d(const AnalyticDensity& f, double a, const QuadratureSpec& q) {
  const Interval s = f.support();
  const double ext = 20.0 * std::max(q.hi - q.lo, 1.0);
  auto g = [&](double x) { return std::exp(a * std::fabs(x) + f.log_pdf(x)); };
  double tail = 0.0;
  for (int side : {-1, 1}) {
    const double from = side > 0 ? q.hi : q.lo;
    const double to = side > 0 ? std::min(q.hi + ext, s.hi) : std::max(q.lo - ext, s.lo);
    if (side > 0 ? !(to > from) : !(from > to)) continue;
    const double far = side > 0 ? q.hi + ext : q.lo - ext;
    if ((side > 0 ? s.hi > far : s.lo < far) && g(far) > 1e-12 * std::max(g(from), 1e-300)) return kInf;
    const double lo = std::min(from, to), hi = std::max(from, to);
    const int cells = 400;
    for (int k = 0; k < cells; ++k) tail += gauss_n<8>(g, lo + (hi - lo) * k / cells, lo + (hi - lo) * (k + 1) / cells);
  }
  return tail;
}

// Weighted mass of a catalog density outside the window (2D: an envelope
// bound outside the largest centred disc in the box).
double weighted_tail(const AnalyticDensity& an, double a, const QuadratureSpec& q) {
  if (an.dim() == 1) return weighted_tail_1d(an, a, q);
  const auto box = an.support_box();
  if (box[0].lo >= q.lo2[0] && box[0].hi <= q.hi2[0] && box[1].lo >= q.lo2[1] && box[1].hi <= q.hi2[1]) return 0.0;
  const EnvelopeResult env = tail_envelope(an, 10.0, 0.05);
  const double c = env.envelope.a - a;
  if (!(c > 0.0)) return kInf;
  const double r = std::min({-q.lo2[0], q.hi2[0], -q.lo2[1], q.hi2[1]});
  return r > 0.0 ? 2.0 * std::numbers::pi * std::exp(env.envelope.b - c * r) * (r / c + 1.0 / (c * c)) : kInf;
}

void check_weighted_tail(const DensityLike& f, double a, const QuadratureSpec& q) {
  const auto* an = std::get_if<AnalyticDensity>(&f);
  if (an == nullptr) {
    const auto& t = std::get<TentFunction>(f);
    if (t.dim() == 1 ? (t.lower() < q.lo || t.upper() > q.hi)
                     : (t.box_min()[0] < q.lo2[0] || t.box_min()[1] < q.lo2[1] || t.box_max()[0] > q.hi2[0] ||
                        t.box_max()[1] > q.hi2[1])) {
      throw Error(ErrorCode::kDivergent, "tent support leaves the window; weighted tail unaccounted");
    }
    return;
  }
  const double tail = weighted_tail(*an, a, q);
  if (!(tail <= 1e-4)) {
    throw Error(ErrorCode::kDivergent, "weighted mass outside the window is " + std::to_string(tail) + " (> 1e-4)");
  }
}

// ∫ exp(a|x|) |f - g| for two 1D tents, exact on every piece where both
// log-densities and the weight are affine.
double weighted_tv_tents(const TentFunction& f, const TentFunction& g, double a, const QuadratureSpec& q) {
  std::vector<double> cuts{q.lo, q.hi};
  for (const auto* t : {&f, &g}) {
    for (double x : t->knots_1d()) {
      if (x > q.lo && x < q.hi) cuts.push_back(x);
    }
  }
  if (q.lo < 0.0 && q.hi > 0.0) cuts.push_back(0.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  // Log-density of a tent restricted to [u, v] as its two end values, or
  // nullopt when the piece lies outside the hull.
  auto ends = [](const TentFunction& t, double u, double v) -> std::optional<std::array<double, 2>> {
    if (u < t.lower() || v > t.upper()) return std::nullopt;
    return std::array<double, 2>{t.eval_log(u), t.eval_log(v)};
  };
  auto piece = [&](const std::optional<std::array<double, 2>>& y, double wu, double wv, double len) {
    return y ? integrate_exp_segment((*y)[0] + wu, (*y)[1] + wv, len) : 0.0;
  };
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double u = cuts[k], v = cuts[k + 1];
    if (!(v > u)) continue;
    const auto yf = ends(f, u, v), yg = ends(g, u, v);
    std::vector<double> xs{u, v};
    if (yf && yg) {
      const double du = (*yf)[0] - (*yg)[0], dv = (*yf)[1] - (*yg)[1];
      if ((du < 0.0 && dv > 0.0) || (du > 0.0 && dv < 0.0)) xs.insert(xs.begin() + 1, u + (v - u) * du / (du - dv));
    }
    for (std::size_t p = 0; p + 1 < xs.size(); ++p) {
      const double x0 = xs[p], x1 = xs[p + 1];
      if (!(x1 > x0)) continue;
      auto at = [&](const std::optional<std::array<double, 2>>& y, double x) {
        return (*y)[0] + ((*y)[1] - (*y)[0]) * (x - u) / (v - u);
      };
      const double w0 = a * std::fabs(x0), w1 = a * std::fabs(x1);
      std::optional<std::array<double, 2>> sf, sg;
      if (yf) sf = std::array<double, 2>{at(yf, x0), at(yf, x1)};
      if (yg) sg = std::array<double, 2>{at(yg, x0), at(yg, x1)};
      s += std::fabs(piece(sf, w0, w1, x1 - x0) - piece(sg, w0, w1, x1 - x0));
    }
  }
  return s;
}

// ---------------------------------------------------------------- 2D ----

// Fast pointwise log-density for repeated 2D evaluation.
class Eval2 {
 public:
  explicit Eval2(const DensityLike& f) : f_(f) {
    if (const auto* t = std::get_if<TentFunction>(&f)) {
      tent_ = t;
      locator_.emplace(t->knots_2d(), t->triangles());
    }
  }
  double log_pdf(const Point2& x) const {
    if (tent_ == nullptr) return density_log_pdf(f_, x);
    const int k = locator_->locate(x, 1e-12);
    if (k < 0) return kNegInf;
    const auto& tri = tent_->triangles()[k];
    const auto& p = tent_->knots_2d();
    const auto l = barycentric(x, p[tri[0]], p[tri[1]], p[tri[2]]);
    const auto& v = tent_->values();
    return l[0] * v[tri[0]] + l[1] * v[tri[1]] + l[2] * v[tri[2]];
  }

 private:
  const DensityLike& f_;
  const TentFunction* tent_ = nullptr;
  std::optional<TriangleLocator> locator_;
};

// Coordinate window [lo, hi] of the d-th marginal holding all but `tail`.
Interval marginal_window(const AnalyticDensity& a, int d, double tail) {
  switch (a.family()) {
    case Family::kNormal2: {
      const auto& p = a.params();
      const double sd = std::sqrt(d == 0 ? p[2] : p[3]);
      const boost::math::normal n(p[d], sd);
      return {boost::math::quantile(n, 0.5 * tail), boost::math::quantile(boost::math::complement(n, 0.5 * tail))};
    }
    case Family::kProduct: {
      const AnalyticDensity& m = a.parts()[d];
      const Interval s = m.support();
      return {std::isfinite(s.lo) ? s.lo : m.quantile(0.5 * tail), std::isfinite(s.hi) ? s.hi : m.quantile(1.0 - 0.5 * tail)};
    }
    case Family::kMixture: {
      Interval w{kInf, -kInf};
      for (const auto& part : a.parts()) {
        const Interval pw = marginal_window(part, d, tail);
        w.lo = std::min(w.lo, pw.lo);
        w.hi = std::max(w.hi, pw.hi);
      }
      return w;
    }
    default: throw Error(ErrorCode::kInvalidInput, "not a bivariate catalog density");
  }
}

// Upper bound on the mass of an analytic bivariate density outside the box.
double outside_box(const AnalyticDensity& a, const QuadratureSpec& q) {
  switch (a.family()) {
    case Family::kNormal2: {
      const auto& p = a.params();
      double out = 0.0;
      for (int d = 0; d < 2; ++d) {
        const boost::math::normal n(p[d], std::sqrt(d == 0 ? p[2] : p[3]));
        out += boost::math::cdf(n, q.lo2[d]) + boost::math::cdf(boost::math::complement(n, q.hi2[d]));
      }
      return out;
    }
    case Family::kProduct: {
      double out = 0.0;
      for (int d = 0; d < 2; ++d) {
        const AnalyticDensity& m = a.parts()[d];
        out += m.cdf(q.lo2[d]) + (1.0 - m.cdf(q.hi2[d]));
      }
      return out;
    }
    case Family::kMixture: {
      double out = 0.0;
      for (std::size_t i = 0; i < a.parts().size(); ++i) out += a.weights()[i] * outside_box(a.parts()[i], q);
      return out;
    }
    default: throw Error(ErrorCode::kInvalidInput, "not a bivariate catalog density");
  }
}

void check_window_2d(const DensityLike& f, const QuadratureSpec& q) {
  if (const auto* t = std::get_if<TentFunction>(&f)) {
    if (t->box_min()[0] < q.lo2[0] || t->box_min()[1] < q.lo2[1] || t->box_max()[0] > q.hi2[0] ||
        t->box_max()[1] > q.hi2[1]) {
      throw Error(ErrorCode::kWindowTooSmall, "tent hull leaves the quadrature box");
    }
    return;
  }
  const double out = outside_box(std::get<AnalyticDensity>(f), q);
  if (out > 1.0 - kWindowMass) {
    throw Error(ErrorCode::kWindowTooSmall, "quadrature box leaves mass " + std::to_string(out) + " outside");
  }
}

// Tensor Gauss-Legendre sum of g(x, log f(x), log g(x)) over the box.
double integrate_2d(const DensityLike& f, const DensityLike& g, const QuadratureSpec& q,
                    const std::function<double(const Point2&, double, double)>& h) {
  const Eval2 ef(f), eg(g);
  const auto [nodes, weights] = gauss_rule(q.nodes_per_cell);
  const double wx = (q.hi2[0] - q.lo2[0]) / q.cells2, wy = (q.hi2[1] - q.lo2[1]) / q.cells2;
  double s = 0.0;
  for (int i = 0; i < q.cells2; ++i) {
    for (int j = 0; j < q.cells2; ++j) {
      const double cx = q.lo2[0] + wx * (i + 0.5), cy = q.lo2[1] + wy * (j + 0.5);
      double cell = 0.0;
      for (std::size_t a = 0; a < nodes.size(); ++a) {
        for (std::size_t b = 0; b < nodes.size(); ++b) {
          const Point2 x{cx + 0.5 * wx * nodes[a], cy + 0.5 * wy * nodes[b]};
          cell += weights[a] * weights[b] * h(x, ef.log_pdf(x), eg.log_pdf(x));
        }
      }
      s += cell * 0.25 * wx * wy;
    }
  }
  return s;
}

double safe_exp(double v) { return v == kNegInf ? 0.0 : std::exp(v); }

}  // namespace

QuadratureSpec QuadratureSpec::covering(const DensityLike& f, const DensityLike& g, double a) {
  QuadratureSpec q;
  const int dim = common_dim(f, g);
  if (dim == 1) {
    q.lo = kInf, q.hi = -kInf;
    for (const auto* d : {&f, &g}) {
      Interval w = density_support(*d);
      if (const auto* a = std::get_if<AnalyticDensity>(d)) {
        if (!std::isfinite(w.lo)) w.lo = a->quantile(0.5 * kTail);
        if (!std::isfinite(w.hi)) w.hi = a->quantile(1.0 - 0.5 * kTail);
      }
      q.lo = std::min(q.lo, w.lo);
      q.hi = std::max(q.hi, w.hi);
    }
  } else {
    q.lo2 = {kInf, kInf};
    q.hi2 = {-kInf, -kInf};
    for (const auto* d : {&f, &g}) {
      for (int k = 0; k < 2; ++k) {
        Interval w;
        if (const auto* t = std::get_if<TentFunction>(d)) {
          w = {t->box_min()[k], t->box_max()[k]};
        } else {
          w = marginal_window(std::get<AnalyticDensity>(*d), k, 0.25 * kTail);
        }
        q.lo2[k] = std::min(q.lo2[k], w.lo);
        q.hi2[k] = std::max(q.hi2[k], w.hi);
      }
    }
  }
  if (!(a > 0.0)) return q;
  auto tail = [&] {
    double t = 0.0;
    for (const auto* d : {&f, &g}) {
      if (const auto* an = std::get_if<AnalyticDensity>(d)) t = std::max(t, weighted_tail(*an, a, q));
    }
    return t;
  };
  for (int it = 0; it < 60 && tail() > 1e-8; ++it) {
    if (dim == 1) {
      const double grow = 0.1 * (q.hi - q.lo);
      q.lo -= grow, q.hi += grow;
    } else {
      for (int k = 0; k < 2; ++k) {
        const double grow = 0.1 * (q.hi2[k] - q.lo2[k]);
        q.lo2[k] -= grow, q.hi2[k] += grow;
      }
    }
  }
  return q;
}

double weighted_tv(const DensityLike& f, const DensityLike& g, WeightExponent w, const QuadratureSpec& q) {
  if (!(w.a >= 0.0)) throw Error(ErrorCode::kInvalidInput, "weight exponent must be nonnegative");
  const int dim = common_dim(f, g);
  check_spec(q, dim);
  if (dim == 2) {
    check_window_2d(f, q), check_window_2d(g, q);
    if (w.a > 0.0) check_weighted_tail(f, w.a, q), check_weighted_tail(g, w.a, q);
    return integrate_2d(f, g, q, [&](const Point2& x, double lf, double lg) {
      return std::exp(w.a * std::hypot(x[0], x[1])) * std::fabs(safe_exp(lf) - safe_exp(lg));
    });
  }
  check_window_1d(f, q), check_window_1d(g, q);
  if (w.a > 0.0) check_weighted_tail(f, w.a, q), check_weighted_tail(g, w.a, q);
  const auto* tf = std::get_if<TentFunction>(&f);
  const auto* tg = std::get_if<TentFunction>(&g);
  if (tf && tg) return weighted_tv_tents(*tf, *tg, w.a, q);
  const std::vector<double> cuts = cuts_1d({&f, &g}, q, w.a > 0.0);
  const Fn d = [&](double x) {
    return std::exp(w.a * std::fabs(x)) * (safe_exp(density_log_pdf(f, x)) - safe_exp(density_log_pdf(g, x)));
  };
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) s += integrate_abs(d, cuts[k], cuts[k + 1], q.nodes_per_cell);
  return s;
}

double tv_distance(const DensityLike& f, const DensityLike& g, const QuadratureSpec& q) {
  return weighted_tv(f, g, WeightExponent{0.0}, q);
}

double weighted_sup(const DensityLike& f, const DensityLike& g, WeightExponent w, const QuadratureSpec& q) {
  if (!(w.a >= 0.0)) throw Error(ErrorCode::kInvalidInput, "weight exponent must be nonnegative");
  const int dim = common_dim(f, g);
  check_spec(q, dim);
  double best = 0.0;
  if (dim == 2) {
    check_window_2d(f, q), check_window_2d(g, q);
    if (w.a > 0.0) check_weighted_tail(f, w.a, q), check_weighted_tail(g, w.a, q);
    const Eval2 ef(f), eg(g);
    auto visit = [&](const Point2& x) {
      const double v = std::exp(w.a * std::hypot(x[0], x[1])) * std::fabs(safe_exp(ef.log_pdf(x)) - safe_exp(eg.log_pdf(x)));
      best = std::max(best, v);
    };
    const int m = q.cells2 * q.nodes_per_cell;
    for (int i = 0; i <= m; ++i) {
      for (int j = 0; j <= m; ++j) {
        visit({q.lo2[0] + (q.hi2[0] - q.lo2[0]) * i / m, q.lo2[1] + (q.hi2[1] - q.lo2[1]) * j / m});
      }
    }
    for (const auto* d : {&f, &g}) {
      if (const auto* t = std::get_if<TentFunction>(d)) {
        for (const auto& k : t->knots_2d()) visit(k);
      }
    }
    return best;
  }
  check_window_1d(f, q), check_window_1d(g, q);
  if (w.a > 0.0) check_weighted_tail(f, w.a, q), check_weighted_tail(g, w.a, q);
  auto visit = [&](double x) {
    if (x < q.lo || x > q.hi) return;
    const double v = std::exp(w.a * std::fabs(x)) * std::fabs(safe_exp(density_log_pdf(f, x)) - safe_exp(density_log_pdf(g, x)));
    best = std::max(best, v);
  };
  const long m = static_cast<long>(q.cells) * q.nodes_per_cell;
  for (long i = 0; i <= m; ++i) visit(q.lo + (q.hi - q.lo) * static_cast<double>(i) / static_cast<double>(m));
  for (const auto* d : {&f, &g}) {
    for (double x : density_breakpoints(*d)) {
      const double eps = 1e-12 * (1.0 + std::fabs(x));
      visit(x), visit(x - eps), visit(x + eps);
    }
  }
  return best;
}

double hellinger(const DensityLike& f, const DensityLike& g, const QuadratureSpec& q) {
  const int dim = common_dim(f, g);
  check_spec(q, dim);
  auto sq = [](double lf, double lg) {
    const double d = safe_exp(0.5 * lf) - safe_exp(0.5 * lg);
    return d * d;
  };
  double s = 0.0;
  if (dim == 2) {
    check_window_2d(f, q), check_window_2d(g, q);
    s = integrate_2d(f, g, q, [&](const Point2&, double lf, double lg) { return sq(lf, lg); });
  } else {
    check_window_1d(f, q), check_window_1d(g, q);
    s = sum_cells(cuts_1d({&f, &g}, q, false), q.nodes_per_cell,
                  [&](double x) { return sq(density_log_pdf(f, x), density_log_pdf(g, x)); });
  }
  return std::sqrt(std::max(s, 0.0));
}

double kl_divergence(const DensityLike& f0, const DensityLike& f, const QuadratureSpec& q) {
  const int dim = common_dim(f0, f);
  check_spec(q, dim);
  constexpr double kTiny = 1e-300;
  const double log_tiny = std::log(kTiny);
  auto term = [&](double l0, double l) { return l0 == kNegInf ? 0.0 : std::exp(l0) * (l0 - l); };
  if (dim == 2) {
    check_window_2d(f0, q), check_window_2d(f, q);
    const Eval2 e0(f0), ef(f);
    const auto [nodes, weights] = gauss_rule(q.nodes_per_cell);
    const double wx = (q.hi2[0] - q.lo2[0]) / q.cells2, wy = (q.hi2[1] - q.lo2[1]) / q.cells2;
    double s = 0.0;
    for (int i = 0; i < q.cells2; ++i) {
      for (int j = 0; j < q.cells2; ++j) {
        const double cx = q.lo2[0] + wx * (i + 0.5), cy = q.lo2[1] + wy * (j + 0.5);
        double mass = 0.0, cell = 0.0;
        bool vanishes = false;
        for (std::size_t a = 0; a < nodes.size(); ++a) {
          for (std::size_t b = 0; b < nodes.size(); ++b) {
            const Point2 x{cx + 0.5 * wx * nodes[a], cy + 0.5 * wy * nodes[b]};
            const double l0 = e0.log_pdf(x), l = ef.log_pdf(x), wt = weights[a] * weights[b] * 0.25 * wx * wy;
            mass += wt * safe_exp(l0);
            if (l0 == kNegInf) continue;
            if (l < log_tiny) {
              vanishes = true;
              continue;
            }
            cell += wt * term(l0, l);
          }
        }
        if (vanishes && mass > 1e-10) return kInf;
        s += cell;
      }
    }
    return s;
  }
  check_window_1d(f0, q), check_window_1d(f, q);
  const std::vector<double> cuts = cuts_1d({&f0, &f}, q, false);
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    bool vanishes = false;
    const double cell = gauss(q.nodes_per_cell, [&](double x) {
      const double l0 = density_log_pdf(f0, x), l = density_log_pdf(f, x);
      if (l0 == kNegInf) return 0.0;
      if (l < log_tiny) {
        vanishes = true;
        return 0.0;
      }
      return term(l0, l);
    }, a, b);
    if (vanishes && density_mass_in(f0, a, b) > 1e-10) return kInf;
    s += cell;
  }
  return s;
}

double smoothed_log_ratio(const DensityLike& f_star, const DensityLike& f_n, const AnalyticDensity& f0, double b,
                          const QuadratureSpec& q) {
  if (!(b > 0.0)) throw Error(ErrorCode::kInvalidInput, "smoothing constant b must be positive");
  const DensityLike d0 = f0;
  const int dim = common_dim(f_star, f_n);
  if (dim != f0.dim()) throw Error(ErrorCode::kInvalidInput, "densities of different dimension");
  check_spec(q, dim);
  if (dim == 2) {
    check_window_2d(d0, q);
    const Eval2 e0(d0);
    return integrate_2d(f_star, f_n, q, [&](const Point2& x, double ls, double ln) {
      return safe_exp(e0.log_pdf(x)) * std::log((b + safe_exp(ls)) / (b + safe_exp(ln)));
    });
  }
  check_window_1d(d0, q);
  const std::vector<double> cuts = cuts_1d({&f_star, &f_n, &d0}, q, false);
  return sum_cells(cuts, q.nodes_per_cell, [&](double x) {
    return f0.pdf(x) * std::log((b + safe_exp(density_log_pdf(f_star, x))) / (b + safe_exp(density_log_pdf(f_n, x))));
  });
}

}  // namespace logcave
