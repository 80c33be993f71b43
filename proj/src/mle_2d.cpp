#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "logcave/error.hpp"
#include "logcave/integrate.hpp"
#include "logcave/mle.hpp"
#include "logcave/philox.hpp"

namespace logcave {
namespace {

// Distinct observations, centred and divided by their RMS radius so that the
// solver sees the same problem for every affine copy of the sample.
struct Problem {
  std::vector<Point2> x;  // original coordinates
  std::vector<Point2> z;
  std::vector<double> w;
  double scale = 1.0;
  double hull_area = 0.0;
};

Problem prepare(const Sample& sample) {
  const std::size_t n = sample.n();
  std::vector<Point2> pts = sample.points_2d();
  std::sort(pts.begin(), pts.end());
  Problem p;
  for (std::size_t i = 0; i < n; ++i) {
    if (!p.z.empty() && p.z.back() == pts[i]) {
      p.w.back() += 1.0;
    } else {
      p.z.push_back(pts[i]);
      p.w.push_back(1.0);
    }
  }
  for (double& v : p.w) v /= static_cast<double>(n);
  // Offsets from the lowest point are exact for exactly translated samples,
  // so everything below is translation invariant bit for bit.
  p.x = p.z;
  const Point2 ref = p.z.front();
  for (auto& q : p.z) q = {q[0] - ref[0], q[1] - ref[1]};
  Point2 mean{0, 0};
  for (std::size_t i = 0; i < p.z.size(); ++i) {
    mean[0] += p.w[i] * p.z[i][0];
    mean[1] += p.w[i] * p.z[i][1];
  }
  double ms = 0.0;
  for (std::size_t i = 0; i < p.z.size(); ++i) {
    const double dx = p.z[i][0] - mean[0], dy = p.z[i][1] - mean[1];
    ms += p.w[i] * (dx * dx + dy * dy);
  }
  p.scale = std::sqrt(ms);
  if (!(p.scale > 0.0)) throw Error(ErrorCode::kDegenerateHull, "all observations coincide");
  for (auto& q : p.z) q = {(q[0] - mean[0]) / p.scale, (q[1] - mean[1]) / p.scale};
  const std::vector<int> hull = convex_hull_2d(p.z);
  p.hull_area = hull.size() >= 3 ? polygon_area(p.z, hull) : 0.0;
  if (!(p.hull_area > 1e-10)) throw Error(ErrorCode::kDegenerateHull, "observations are collinear");
  return p;
}

struct LiftValue {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> hbar;
};

// The concave surrogate sum_i w_i y_i - ∫ exp(hbar_y) + 1 and its
// supergradient. `value` is taken at hbar, where the surrogate and the
// majorant objective agree; the majorant objective itself is not concave in y.
LiftValue lift(const Problem& p, const std::vector<double>& y) {
  const std::size_t m = p.z.size();
  const std::vector<Triangle> tris = upper_hull_triangulation(p.z, y);
  const TriangleLocator locator(p.z, tris);
  LiftValue out;
  out.grad = p.w;
  out.hbar.resize(m);
  double data = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    int t = locator.locate(p.z[i], 1e-9);
    if (t < 0) t = locate_triangle(p.z, tris, p.z[i], 1e300);
    const auto& tri = tris[t];
    const auto l = barycentric(p.z[i], p.z[tri[0]], p.z[tri[1]], p.z[tri[2]]);
    double h = 0.0;
    for (int k = 0; k < 3; ++k) h += l[k] * y[tri[k]];
    out.hbar[i] = h;
    data += p.w[i] * h;
  }
  double mass = 0.0;
  for (const auto& tri : tris) {
    const TriangleMoments tm = triangle_moments({y[tri[0]], y[tri[1]], y[tri[2]]},
                                                triangle_area(p.z[tri[0]], p.z[tri[1]], p.z[tri[2]]));
    mass += tm.zero;
    for (int k = 0; k < 3; ++k) out.grad[tri[k]] -= tm.first[k];
  }
  out.value = data - mass + 1.0;
  return out;
}

struct Iterate {
  std::vector<double> y;  // majorant values at every observation
  double value = -std::numeric_limits<double>::infinity();
};

Iterate subgradient_ascent(const Problem& p, const FitOptions& opts) {
  const std::size_t m = p.z.size();
  Iterate best;
  for (int r = 0; r < std::max(opts.restarts, 1); ++r) {
    std::vector<double> y(m, -std::log(p.hull_area));
    if (r > 0) {
      PhiloxStream rng(opts.seed, static_cast<std::uint64_t>(r));
      for (double& v : y) v += 0.2 * (rng.uniform() - 0.5);
    }
    double step = 1.0;
    for (int k = 1; k <= opts.subgradient_iterations; ++k) {
      const LiftValue lv = lift(p, y);
      if (lv.value > best.value) best = {lv.hbar, lv.value};
      const double norm = std::sqrt(std::inner_product(lv.grad.begin(), lv.grad.end(), lv.grad.begin(), 0.0));
      if (norm < opts.objective_tolerance) break;
      const double floor = *std::min_element(lv.hbar.begin(), lv.hbar.end()) - 40.0;
      auto advance = [&](double s) {
        std::vector<double> next(m);
        for (std::size_t i = 0; i < m; ++i) next[i] = std::max(lv.hbar[i] + s * lv.grad[i] / norm, floor);
        return next;
      };
      if (opts.step_rule == StepRule::kDiminishing) {
        y = advance(1.0 / std::sqrt(static_cast<double>(k)));
        continue;
      }
      step = std::min(2.0 * step, 1.0);
      std::vector<double> next = advance(step);
      while (step > 1e-12 && lift(p, next).value <= lv.value) {
        step *= 0.5;
        next = advance(step);
      }
      if (step <= 1e-12) break;
      y = std::move(next);
    }
  }
  return best;
}

// Shor's r-algorithm on -L: subgradient steps in a metric dilated along
// successive subgradient differences, with the adaptive step length rule.
// Stops after kQuiet iterations without relative gain above `tolerance`.
Iterate dilation_ascent(const Problem& p, const std::vector<double>& y0, int max_iterations, double tolerance) {
  constexpr double kBeta = 1.0 / 3.0;
  constexpr int kQuiet = 50;
  const auto m = static_cast<Eigen::Index>(p.z.size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd x = Eigen::VectorXd::Map(y0.data(), m);
  auto eval = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
    const LiftValue lv = lift(p, std::vector<double>(v.data(), v.data() + m));
    g = -Eigen::VectorXd::Map(lv.grad.data(), m);
    return lv;
  };
  Eigen::VectorXd g;
  LiftValue cur = eval(x, g);
  Iterate best{cur.hbar, cur.value};
  double h = 0.1;
  int quiet = 0;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd gt = b.transpose() * g;
    const double ng = gt.norm();
    if (!(ng > 1e-300)) break;
    const Eigen::VectorXd d = b * gt / ng;
    Eigen::VectorXd g_new, x_new = x;
    LiftValue lv;
    int steps = 0;
    try {
      do {
        x_new -= h * d;
        lv = eval(x_new, g_new);
        ++steps;
      } while (g_new.dot(d) > 0.0 && steps < 50);
    } catch (const Error& e) {
      // A runaway step left the exponential range; keep the best iterate.
      if (e.code() != ErrorCode::kOverflow) throw;
      break;
    }
    if (steps == 1) h *= 0.95;
    else if (steps > 3) h *= 1.2;
    const double gain = lv.value - best.value;
    if (lv.value > best.value) best = {lv.hbar, lv.value};
    quiet = gain > tolerance * (1.0 + std::fabs(best.value)) ? 0 : quiet + 1;
    if (quiet >= kQuiet && it > 2 * m) break;
    const Eigen::VectorXd r = b.transpose() * (g_new - g);
    const double nr = r.norm();
    if (nr > 1e-300) {
      const Eigen::VectorXd xi = r / nr;
      b += (kBeta - 1.0) * (b * xi) * xi.transpose();
    }
    x = std::move(x_new);
    g = std::move(g_new);
  }
  return best;
}

// Active-set Newton refinement over a fixed knot set and triangulation.
// Concavity across every interior edge is a linear constraint on the knot
// values; the working set holds the edges currently kept flat. At a working-set
// optimum, negative multipliers release edges, flat edges whose multiplier
// still pushes towards convexity are flipped when the flipped diagonal can bend
// the other way, and observations with a positive directional derivative
// become new knots.
class Refiner {
 public:
  // Starts from the majorant of the given values.
  Refiner(const Problem& p, const std::vector<double>& y, double tolerance, int max_iterations)
      : p_(p), tol_(tolerance), max_iterations_(max_iterations) {
    state_.y = y;
    state_.tris = upper_hull_triangulation(p.z, y);
    state_.knot.assign(p.z.size(), 0);
    for (const auto& t : state_.tris) {
      for (int v : t) state_.knot[v] = 1;
    }
  }

  bool run() {
    Cache cache = analyse(state_);
    bool stalled = false;
    int polish = 0;  // extra Newton steps taken past the stationarity test
    for (iterations_ = 0; iterations_ < max_iterations_; ++iterations_) {
      const Model md = model(state_, cache);
      const Eigen::MatrixXd a = working_rows(state_, cache);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
      Eigen::MatrixXd z;
      null_space(a, cache.knots.size(), qr, z);
      if (a.rows() > 0 && a.rows() > qr.rank()) {
        // Keep the working rows independent so the multipliers are unique.
        const std::vector<EdgeKey> keys = working_keys(state_, cache);
        for (Eigen::Index r = qr.rank(); r < a.rows(); ++r) state_.working.erase(keys[qr.colsPermutation().indices()[r]]);
        continue;
      }
      const Eigen::VectorXd gz = z.transpose() * md.g;
      Eigen::VectorXd d;
      double decrement = 0.0;
      if (z.cols() > 0) {
        const Eigen::MatrixXd hz = z.transpose() * md.h * z;
        const Eigen::VectorXd dz = hz.ldlt().solve(gz);
        d = z * dz;
        decrement = gz.dot(dz);
      } else {
        d = Eigen::VectorXd::Zero(md.g.size());
      }
      const double gz_max = gz.size() ? gz.lpNorm<Eigen::Infinity>() : 0.0;
      const bool stationary = gz_max <= 0.1 * tol_ && (polish >= 2 || decrement <= 1e-28);
      if (gz_max <= 0.1 * tol_ && !stationary) ++polish;
      if (stalled || stationary || decrement <= 1e-30) {
        stalled = false;
        polish = 0;
        residual_ = gz_max;
        if (prune(cache)) continue;
        if (release_or_flip(md, a, qr, cache)) continue;
        const Insertion ins = best_insertion(state_, cache);
        residual_ = std::max(residual_, ins.derivative);
        if (ins.j >= 0 && ins.derivative > tol_) {
          insert(ins, cache);
          continue;
        }
        converged_ = residual_ <= tol_;
        return converged_;
      }
      // Step back to the first free edge that would turn convex.
      const Eigen::VectorXd theta = knot_values(state_, cache);
      double t_max = 1.0;
      int blocking = -1;
      // Rows in the span of the working set only see rounding along d.
      const double noise = 1e-11 * d.lpNorm<Eigen::Infinity>();
      for (std::size_t e = 0; e < cache.edges.size(); ++e) {
        if (state_.working.count(cache.edges[e].key)) continue;
        const double ce = row_dot(cache, e, theta), de = row_dot(cache, e, d);
        if (de <= noise) continue;
        const double t = std::max(0.0, -ce) / de;
        if (t < t_max) t_max = t, blocking = static_cast<int>(e);
      }
      if (t_max <= 1e-10) {
        state_.working.insert(cache.edges[blocking].key);
        continue;
      }
      double t = t_max;
      bool halved = false;
      const double noise_floor = 1e-14 * (1.0 + std::fabs(md.value));
      if (decrement > 1e-14) {
        while (t > 1e-10 * t_max) {
          if (value_at(state_, cache, theta + t * d) >= md.value + 1e-4 * t * decrement - noise_floor) break;
          t *= 0.5;
          halved = true;
        }
        if (t <= 1e-10 * t_max) {
          stalled = true;
          continue;
        }
      }
      set_knot_values(state_, cache, theta + t * d);
      if (!halved && blocking >= 0) state_.working.insert(cache.edges[blocking].key);
    }
    converged_ = false;
    return false;
  }

  double value() const {
    Cache c = analyse(state_);
    return model(state_, c).value;
  }
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

  // Knot coordinates (standardised), values, and triangles indexing them.
  void output(std::vector<Point2>& knots, std::vector<double>& values, std::vector<Triangle>& tris) const {
    std::vector<int> index(p_.z.size(), -1);
    knots.clear();
    values.clear();
    for (std::size_t i = 0; i < p_.z.size(); ++i) {
      if (!state_.knot[i]) continue;
      index[i] = static_cast<int>(knots.size());
      knots.push_back(p_.x[i]);
      values.push_back(state_.y[i]);
    }
    tris.clear();
    for (const auto& t : state_.tris) tris.push_back({index[t[0]], index[t[1]], index[t[2]]});
  }

 private:
  using EdgeKey = std::pair<int, int>;

  struct State {
    std::vector<double> y;  // meaningful at knots only
    std::vector<char> knot;
    std::vector<Triangle> tris;
    std::set<EdgeKey> working;
  };

  // Interior edge (a, b) between triangles (a, b, c) and (b, a, d).
  struct Edge {
    EdgeKey key;
    int a, b, c, d;
    std::array<int, 4> vars;     // knot positions of d, a, b, c
    std::array<double, 4> coef;  // row of the concavity functional
  };

  struct Cache {
    std::vector<int> knots;  // observation index per knot position
    std::vector<int> pos;    // knot position per observation, or -1
    std::vector<double> data;  // sum_i w_i * basis_k(z_i) per knot position
    std::vector<double> areas;
    std::vector<Edge> edges;
    std::vector<int> owner;  // containing triangle per observation
    std::vector<std::array<double, 3>> bary;
  };

  struct Model {
    double value;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;  // minus the Hessian
  };

  Cache analyse(const State& s) const {
    const std::size_t m = p_.z.size();
    Cache c;
    c.pos.assign(m, -1);
    for (std::size_t i = 0; i < m; ++i) {
      if (s.knot[i]) c.pos[i] = static_cast<int>(c.knots.size()), c.knots.push_back(static_cast<int>(i));
    }
    c.data.assign(c.knots.size(), 0.0);
    for (const auto& t : s.tris) c.areas.push_back(triangle_area(p_.z[t[0]], p_.z[t[1]], p_.z[t[2]]));
    const TriangleLocator locator(p_.z, s.tris);
    c.owner.assign(m, -1);
    c.bary.assign(m, {0, 0, 0});
    for (std::size_t i = 0; i < m; ++i) {
      if (s.knot[i]) {
        c.data[c.pos[i]] += p_.w[i];
        continue;
      }
      int t = locator.locate(p_.z[i], 1e-9);
      if (t < 0) t = locate_triangle(p_.z, s.tris, p_.z[i], 1e300);
      const auto& tri = s.tris[t];
      c.owner[i] = t;
      c.bary[i] = barycentric(p_.z[i], p_.z[tri[0]], p_.z[tri[1]], p_.z[tri[2]]);
      for (int k = 0; k < 3; ++k) c.data[c.pos[tri[k]]] += p_.w[i] * c.bary[i][k];
    }
    std::map<EdgeKey, std::vector<std::pair<int, int>>> sides;  // edge -> (triangle, opposite)
    for (std::size_t t = 0; t < s.tris.size(); ++t) {
      const auto& tri = s.tris[t];
      for (int k = 0; k < 3; ++k) {
        const int a = tri[k], b = tri[(k + 1) % 3];
        sides[{std::min(a, b), std::max(a, b)}].push_back({static_cast<int>(t), tri[(k + 2) % 3]});
      }
    }
    for (const auto& [key, v] : sides) {
      if (v.size() != 2) continue;
      Edge e;
      e.key = key;
      e.a = key.first;
      e.b = key.second;
      e.c = v[0].second;
      e.d = v[1].second;
      const auto l = barycentric(p_.z[e.d], p_.z[e.a], p_.z[e.b], p_.z[e.c]);
      const double norm = 1.0 + std::fabs(l[0]) + std::fabs(l[1]) + std::fabs(l[2]);
      e.vars = {c.pos[e.d], c.pos[e.a], c.pos[e.b], c.pos[e.c]};
      e.coef = {1.0 / norm, -l[0] / norm, -l[1] / norm, -l[2] / norm};
      c.edges.push_back(e);
    }
    return c;
  }

  static Eigen::VectorXd knot_values(const State& s, const Cache& c) {
    Eigen::VectorXd v(c.knots.size());
    for (std::size_t k = 0; k < c.knots.size(); ++k) v[k] = s.y[c.knots[k]];
    return v;
  }
  static void set_knot_values(State& s, const Cache& c, const Eigen::VectorXd& v) {
    for (std::size_t k = 0; k < c.knots.size(); ++k) s.y[c.knots[k]] = v[k];
  }
  static double row_dot(const Cache& c, std::size_t e, const Eigen::VectorXd& v) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += c.edges[e].coef[k] * v[c.edges[e].vars[k]];
    return s;
  }

  double value_at(const State& s, const Cache& c, const Eigen::VectorXd& theta) const {
    double val = 1.0;
    for (std::size_t k = 0; k < c.knots.size(); ++k) val += c.data[k] * theta[k];
    for (std::size_t t = 0; t < s.tris.size(); ++t) {
      const auto& tri = s.tris[t];
      const double v[3] = {theta[c.pos[tri[0]]], theta[c.pos[tri[1]]], theta[c.pos[tri[2]]]};
      val -= integrate_exp_simplex(v, c.areas[t], 2);
    }
    return val;
  }

  Model model(const State& s, const Cache& c) const {
    const std::size_t n = c.knots.size();
    Model md{1.0, Eigen::VectorXd::Map(c.data.data(), n), Eigen::MatrixXd::Zero(n, n)};
    const Eigen::VectorXd theta = knot_values(s, c);
    md.value += md.g.dot(theta);
    for (std::size_t t = 0; t < s.tris.size(); ++t) {
      const auto& tri = s.tris[t];
      const TriangleMoments tm = triangle_moments({s.y[tri[0]], s.y[tri[1]], s.y[tri[2]]}, c.areas[t]);
      md.value -= tm.zero;
      for (int k = 0; k < 3; ++k) {
        md.g[c.pos[tri[k]]] -= tm.first[k];
        for (int l = 0; l < 3; ++l) md.h(c.pos[tri[k]], c.pos[tri[l]]) += tm.second[k][l];
      }
    }
    return md;
  }

  Eigen::MatrixXd working_rows(const State& s, const Cache& c) const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.working.size()), c.knots.size());
    Eigen::Index r = 0;
    for (std::size_t e = 0; e < c.edges.size(); ++e) {
      if (!s.working.count(c.edges[e].key)) continue;
      for (int k = 0; k < 4; ++k) a(r, c.edges[e].vars[k]) += c.edges[e].coef[k];
      ++r;
    }
    return a.topRows(r);
  }

  static void null_space(const Eigen::MatrixXd& a, std::size_t n, Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                         Eigen::MatrixXd& z) {
    if (a.rows() == 0) {
      z = Eigen::MatrixXd::Identity(n, n);
      return;
    }
    qr.setThreshold(1e-10);
    qr.compute(a.transpose());
    const Eigen::Index rank = qr.rank();
    const Eigen::MatrixXd q = qr.householderQ();
    z = q.rightCols(static_cast<Eigen::Index>(n) - rank);
  }

  // Multipliers mu with g = A^T mu, listed in working-set edge order.
  static Eigen::VectorXd multipliers(const Eigen::MatrixXd& a, const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                                     const Eigen::VectorXd& g) {
    if (a.rows() == 0) return Eigen::VectorXd();
    return qr.solve(g);
  }

  std::vector<EdgeKey> working_keys(const State& s, const Cache& c) const {
    std::vector<EdgeKey> keys;
    for (const auto& e : c.edges) {
      if (s.working.count(e.key)) keys.push_back(e.key);
    }
    return keys;
  }

  bool release_or_flip(const Model& md, const Eigen::MatrixXd& a, const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                       Cache& cache) {
    if (a.rows() == 0) return false;
    const Eigen::VectorXd mu = multipliers(a, qr, md.g);
    const std::vector<EdgeKey> keys = working_keys(state_, cache);
    Eigen::Index worst;
    const double lowest = mu.minCoeff(&worst);
    if (lowest < -tol_) {
      state_.working.erase(keys[worst]);
      return true;
    }
    residual_ = std::max(residual_, std::max(0.0, -lowest));
    std::vector<Eigen::Index> order(mu.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return mu[i] > mu[j]; });
    for (auto r : order) {
      if (!(mu[r] > tol_)) break;
      const auto it = std::find_if(cache.edges.begin(), cache.edges.end(), [&](const Edge& e) { return e.key == keys[r]; });
      State flipped = state_;
      EdgeKey new_key;
      if (!flip(flipped, *it, new_key)) continue;
      flipped.working.erase(keys[r]);
      flipped.working.insert(new_key);
      Cache fc = analyse(flipped);
      const Model fm = model(flipped, fc);
      const Eigen::MatrixXd fa = working_rows(flipped, fc);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> fqr;
      Eigen::MatrixXd fz;
      null_space(fa, fc.knots.size(), fqr, fz);
      const Eigen::VectorXd fmu = multipliers(fa, fqr, fm.g);
      const std::vector<EdgeKey> fkeys = working_keys(flipped, fc);
      const auto pos = std::find(fkeys.begin(), fkeys.end(), new_key) - fkeys.begin();
      if (pos == static_cast<std::ptrdiff_t>(fkeys.size())) continue;  // the diagonal already existed
      if (fmu[pos] < -tol_) {
        flipped.working.erase(new_key);
        state_ = std::move(flipped);
        cache = std::move(fc);
        return true;
      }
    }
    return false;
  }

  // Replaces the diagonal of a convex quadrilateral; false if it is not convex.
  bool flip(State& s, const Edge& e, EdgeKey& new_key) const {
    const Point2 &pa = p_.z[e.a], &pb = p_.z[e.b], &pc = p_.z[e.c], &pd = p_.z[e.d];
    const double sa = cross(pc, pd, pa), sb = cross(pc, pd, pb);
    const double scale = 1e-12 * (std::fabs(sa) + std::fabs(sb));
    if (!(sa * sb < 0.0) || std::fabs(sa) <= scale || std::fabs(sb) <= scale) return false;
    std::vector<Triangle> out;
    for (const auto& t : s.tris) {
      const bool has_a = std::count(t.begin(), t.end(), e.a), has_b = std::count(t.begin(), t.end(), e.b);
      const bool has_cd = std::count(t.begin(), t.end(), e.c) || std::count(t.begin(), t.end(), e.d);
      if (has_a && has_b && has_cd) continue;
      out.push_back(t);
    }
    if (out.size() + 2 != s.tris.size()) return false;
    for (Triangle t : {Triangle{e.a, e.d, e.c}, Triangle{e.b, e.c, e.d}}) {
      if (cross(p_.z[t[0]], p_.z[t[1]], p_.z[t[2]]) < 0.0) std::swap(t[1], t[2]);
      out.push_back(t);
    }
    s.tris = std::move(out);
    new_key = {std::min(e.c, e.d), std::max(e.c, e.d)};
    return true;
  }

  // Maximal flat regions: triangles joined across edges whose concavity
  // functional vanishes.
  struct Facet {
    std::vector<int> tris;
    std::vector<int> ring;  // boundary knots, counter-clockwise
  };

  std::vector<Facet> facets(const State& s, const Cache& c) const {
    const Eigen::VectorXd theta = knot_values(s, c);
    std::vector<int> parent(s.tris.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::map<EdgeKey, std::vector<int>> owners;
    for (std::size_t t = 0; t < s.tris.size(); ++t) {
      for (int k = 0; k < 3; ++k) {
        const int u = s.tris[t][k], v = s.tris[t][(k + 1) % 3];
        owners[{std::min(u, v), std::max(u, v)}].push_back(static_cast<int>(t));
      }
    }
    for (std::size_t e = 0; e < c.edges.size(); ++e) {
      if (std::fabs(row_dot(c, e, theta)) > kFlat) continue;
      const auto& o = owners[c.edges[e].key];
      parent[find(o[0])] = find(o[1]);
    }
    std::map<int, Facet> groups;
    for (std::size_t t = 0; t < s.tris.size(); ++t) groups[find(static_cast<int>(t))].tris.push_back(static_cast<int>(t));
    std::vector<Facet> out;
    for (auto& [root, f] : groups) {
      std::set<std::pair<int, int>> directed;
      for (int t : f.tris) {
        Triangle tri = s.tris[t];
        if (cross(p_.z[tri[0]], p_.z[tri[1]], p_.z[tri[2]]) < 0.0) std::swap(tri[1], tri[2]);
        for (int k = 0; k < 3; ++k) directed.insert({tri[k], tri[(k + 1) % 3]});
      }
      std::map<int, int> next;
      bool simple = true;
      for (const auto& [u, v] : directed) {
        if (directed.count({v, u})) continue;
        if (!next.emplace(u, v).second) simple = false;
      }
      if (!simple || next.empty()) continue;
      int v = next.begin()->first;
      do {
        f.ring.push_back(v);
        v = next[v];
      } while (v != f.ring.front() && f.ring.size() <= next.size());
      if (f.ring.size() != next.size()) continue;
      out.push_back(std::move(f));
    }
    return out;
  }

  // Value at z of the pyramid that is 1 at z_j and 0 on the facet boundary.
  double pyramid(const Facet& f, int j, const Point2& z) const {
    double h = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < f.ring.size(); ++k) {
      const Point2& a = p_.z[f.ring[k]];
      const Point2& b = p_.z[f.ring[(k + 1) % f.ring.size()]];
      h = std::min(h, cross(a, b, z) / cross(a, b, p_.z[j]));
    }
    return std::max(h, 0.0);
  }

  // j must see every boundary edge of the facet from inside.
  bool interior(const Facet& f, int j) const {
    for (std::size_t k = 0; k < f.ring.size(); ++k) {
      const Point2& a = p_.z[f.ring[k]];
      const Point2& b = p_.z[f.ring[(k + 1) % f.ring.size()]];
      const double len2 = (b[0] - a[0]) * (b[0] - a[0]) + (b[1] - a[1]) * (b[1] - a[1]);
      if (cross(a, b, p_.z[j]) <= 1e-9 * len2) return false;
    }
    return true;
  }

  double plane_value(const State& s, const Cache& c, int i) const {
    const auto& tri = s.tris[c.owner[i]];
    const auto& l = c.bary[i];
    return l[0] * s.y[tri[0]] + l[1] * s.y[tri[1]] + l[2] * s.y[tri[2]];
  }

  // Drops knots lying inside a flat facet and re-triangulates the facet from
  // its boundary; the new diagonals join the working set.
  bool prune(Cache& cache) {
    bool changed = false;
    std::vector<char> drop(state_.tris.size(), 0);
    std::vector<Triangle> added;
    std::vector<EdgeKey> diagonals;
    for (const Facet& f : facets(state_, cache)) {
      std::set<int> ring(f.ring.begin(), f.ring.end());
      bool inner = false;
      for (int t : f.tris) {
        for (int v : state_.tris[t]) inner = inner || !ring.count(v);
      }
      if (!inner) continue;
      std::vector<int> poly = f.ring;
      std::vector<Triangle> ears;
      while (poly.size() > 3) {
        const std::size_t k = poly.size();
        std::size_t best = k;
        double best_turn = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          const Point2 &a = p_.z[poly[(i + k - 1) % k]], &b = p_.z[poly[i]], &c = p_.z[poly[(i + 1) % k]];
          const double turn = cross(a, b, c);
          if (turn > best_turn) best_turn = turn, best = i;
        }
        if (best == k) break;
        ears.push_back({poly[(best + k - 1) % k], poly[best], poly[(best + 1) % k]});
        diagonals.push_back({std::min(poly[(best + k - 1) % k], poly[(best + 1) % k]),
                             std::max(poly[(best + k - 1) % k], poly[(best + 1) % k])});
        poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(best));
      }
      if (poly.size() != 3 || !(cross(p_.z[poly[0]], p_.z[poly[1]], p_.z[poly[2]]) > 0.0)) continue;
      ears.push_back({poly[0], poly[1], poly[2]});
      for (int t : f.tris) {
        drop[t] = 1;
        for (int v : state_.tris[t]) {
          if (!ring.count(v)) state_.knot[v] = 0;
        }
      }
      added.insert(added.end(), ears.begin(), ears.end());
      changed = true;
    }
    if (!changed) return false;
    std::vector<Triangle> tris;
    for (std::size_t t = 0; t < state_.tris.size(); ++t) {
      if (!drop[t]) tris.push_back(state_.tris[t]);
    }
    tris.insert(tris.end(), added.begin(), added.end());
    state_.tris = std::move(tris);
    cache = analyse(state_);
    std::set<EdgeKey> live;
    for (const auto& e : cache.edges) {
      if (state_.working.count(e.key)) live.insert(e.key);
    }
    for (const auto& key : diagonals) live.insert(key);
    state_.working = std::move(live);
    return true;
  }

  struct Insertion {
    int j = -1;
    double derivative = -std::numeric_limits<double>::infinity();
    Facet facet;
  };

  // Directional derivative of the objective for raising each non-knot
  // observation as a pyramid over its flat facet.
  Insertion best_insertion(const State& s, const Cache& c) const {
    const std::size_t m = p_.z.size();
    std::vector<Facet> fs = facets(s, c);
    std::vector<int> facet_of(s.tris.size(), -1);
    for (std::size_t f = 0; f < fs.size(); ++f) {
      for (int t : fs[f].tris) facet_of[t] = static_cast<int>(f);
    }
    std::vector<std::vector<int>> members(fs.size());
    for (std::size_t i = 0; i < m; ++i) {
      if (!s.knot[i] && facet_of[c.owner[i]] >= 0) members[facet_of[c.owner[i]]].push_back(static_cast<int>(i));
    }
    Insertion best;
    for (std::size_t f = 0; f < fs.size(); ++f) {
      const Facet& fc = fs[f];
      for (int j : members[f]) {
        if (!interior(fc, j)) continue;
        double dj = 0.0;
        for (int i : members[f]) dj += p_.w[i] * pyramid(fc, j, p_.z[i]);
        const double yj = plane_value(s, c, j);
        for (std::size_t k = 0; k < fc.ring.size(); ++k) {
          const int a = fc.ring[k], b = fc.ring[(k + 1) % fc.ring.size()];
          const double area = triangle_area(p_.z[a], p_.z[b], p_.z[j]);
          if (area <= 0.0) continue;
          dj -= triangle_moments({s.y[a], s.y[b], yj}, area).first[2];
        }
        if (dj > best.derivative) best = {j, dj, fc};
      }
    }
    return best;
  }

  void insert(const Insertion& ins, Cache& cache) {
    const int j = ins.j;
    const Facet& f = ins.facet;
    state_.y[j] = plane_value(state_, cache, j);
    // Knots inside the facet lie on its plane and stop being knots.
    std::set<int> ring(f.ring.begin(), f.ring.end());
    for (int t : f.tris) {
      for (int v : state_.tris[t]) {
        if (!ring.count(v)) state_.knot[v] = 0;
      }
    }
    state_.knot[j] = 1;
    std::vector<char> drop(state_.tris.size(), 0);
    for (int t : f.tris) drop[t] = 1;
    std::vector<Triangle> tris;
    for (std::size_t t = 0; t < state_.tris.size(); ++t) {
      if (!drop[t]) tris.push_back(state_.tris[t]);
    }
    for (std::size_t k = 0; k < f.ring.size(); ++k) tris.push_back({f.ring[k], f.ring[(k + 1) % f.ring.size()], j});
    state_.tris = std::move(tris);
    cache = analyse(state_);
    std::set<EdgeKey> live;
    for (const auto& e : cache.edges) {
      if (state_.working.count(e.key)) live.insert(e.key);
    }
    state_.working = std::move(live);
    // Raise the new knot alone: a damped Newton step along its own coordinate,
    // stopped where an edge would turn convex.
    const Model md = model(state_, cache);
    const int pj = cache.pos[j];
    const double slope = md.g[pj], curv = md.h(pj, pj);
    if (!(slope > 0.0) || !(curv > 0.0)) return;
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(cache.knots.size());
    dir[pj] = 1.0;
    const Eigen::VectorXd theta = knot_values(state_, cache);
    double t_max = slope / curv;
    int blocking = -1;
    for (std::size_t e = 0; e < cache.edges.size(); ++e) {
      const double de = row_dot(cache, e, dir);
      if (de <= 0.0) continue;
      const double tt = std::max(0.0, -row_dot(cache, e, theta)) / de;
      if (tt < t_max) t_max = tt, blocking = static_cast<int>(e);
    }
    double step = t_max;
    while (step > 1e-14) {
      if (value_at(state_, cache, theta + step * dir) > md.value) {
        set_knot_values(state_, cache, theta + step * dir);
        if (step == t_max && blocking >= 0) state_.working.insert(cache.edges[blocking].key);
        return;
      }
      step *= 0.5;
    }
  }

  static constexpr double kFlat = 1e-9;

  const Problem& p_;
  double tol_;
  int max_iterations_;
  State state_;
  double residual_ = 0.0;
  int iterations_ = 0;
  bool converged_ = false;
};

}  // namespace

TentFunction fit_mle_2d(const Sample& sample, const FitOptions& opts) {
  if (sample.dim() != 2) throw Error(ErrorCode::kInvalidInput, "fit_mle_2d needs a 2D sample");
  if (sample.n() < 3) throw Error(ErrorCode::kInvalidInput, "need n >= 3 observations in 2D");
  if (opts.max_iterations < 1 || !(opts.objective_tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "max_iterations must be >= 1 and objective_tolerance > 0");
  }
  const Problem p = prepare(sample);
  const auto m = static_cast<int>(p.z.size());
  const Iterate start = subgradient_ascent(p, opts);
  const Iterate polished = dilation_ascent(p, start.y, 100 * m + 1000, 1e-13);

  // The refinement works to a tolerance the subgradient phases cannot reach;
  // in the plane the integrals carry a little more rounding than on the line.
  const double tol = std::max(opts.objective_tolerance, 1e-9);
  const int budget = std::max(opts.max_iterations, 5 * m);
  Refiner refiner(p, polished.y, tol, budget);
  if (!refiner.run()) {
    throw Error(ErrorCode::kNonConvergence, "2D refinement stopped after " + std::to_string(refiner.iterations()) +
                                                " iterations with KKT residual " + std::to_string(refiner.residual()));
  }
  if (refiner.value() < polished.value - 10.0 * tol) {
    throw Error(ErrorCode::kNonConvergence, "2D refinement lost objective against its starting point");
  }
  std::vector<Point2> knots;
  std::vector<double> values;
  std::vector<Triangle> tris;
  refiner.output(knots, values, tris);
  const double log_jacobian = 2.0 * std::log(p.scale);
  for (double& v : values) v -= log_jacobian;
  return TentFunction::make_2d(std::move(knots), std::move(values), std::move(tris)).normalized();
}

}  // namespace logcave
