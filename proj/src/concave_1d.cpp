#include "logcave/concave_1d.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "logcave/error.hpp"
#include "logcave/integrate.hpp"

namespace logcave {

WeightedSample1d collapse_ties(std::span<const double> xs) {
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  WeightedSample1d out;
  const double unit = 1.0 / static_cast<double>(sorted.size());
  for (double v : sorted) {
    if (!out.x.empty() && out.x.back() == v) {
      out.w.back() += unit;
    } else {
      out.x.push_back(v);
      out.w.push_back(unit);
    }
  }
  return out;
}

namespace {

// Solves the symmetric positive definite tridiagonal system (diag, off) d = g.
std::vector<double> solve_tridiagonal(std::vector<double> diag, const std::vector<double>& off,
                                      std::vector<double> g) {
  const std::size_t n = diag.size();
  for (std::size_t k = 1; k < n; ++k) {
    const double f = off[k - 1] / diag[k - 1];
    diag[k] -= f * off[k - 1];
    g[k] -= f * g[k - 1];
  }
  g[n - 1] /= diag[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) g[k] = (g[k] - off[k] * g[k + 1]) / diag[k];
  return g;
}

class Solver {
 public:
  Solver(const WeightedSample1d& data, const ActiveSetOptions& opts) : opts_(opts) {
    const std::size_t m = data.x.size();
    origin_ = data.x.front();
    scale_ = data.x.back() - data.x.front();
    u_.resize(m);
    for (std::size_t i = 0; i < m; ++i) u_[i] = (data.x[i] - origin_) / scale_;
    u_.back() = 1.0;
    w_ = data.w;
    const double total = std::accumulate(w_.begin(), w_.end(), 0.0);
    for (double& v : w_) v /= total;
  }

  ConcaveFit1d run() {
    if (opts_.start == StartRule::kSmoothed && u_.size() > 2) {
      smoothed_start();
    } else {
      knots_ = {0, u_.size() - 1};
      theta_ = {0.0, 0.0};
    }
    normalize();
    refresh_data_terms();

    ConcaveFit1d fit;
    int iter = 0;
    double residual = 0.0;
    bool done = false;
    bool stalled = false;
    while (iter < opts_.max_iterations) {
      ++iter;
      Model md = model(theta_);
      const double gmax = max_abs(md.g);
      std::vector<double> d = solve_tridiagonal(md.diag, md.off, md.g);
      const double decrement = dot(md.g, d);
      if (stalled || gmax <= 0.1 * opts_.tolerance || decrement <= 1e-30) {
        const auto [j, dj] = best_insertion();
        residual = std::max(gmax, std::max(dj, 0.0));
        if (dj <= opts_.tolerance) {
          done = residual <= opts_.tolerance;
          break;
        }
        stalled = false;
        insert_knot(j);
        continue;
      }
      // Step back to the first interior knot whose kink would become convex.
      double t_max = 1.0;
      std::size_t blocking = 0;
      for (std::size_t a = 1; a + 1 < knots_.size(); ++a) {
        const double sd = kink(d, a);
        if (sd <= 0.0) continue;
        const double t = std::max(0.0, -kink(theta_, a)) / sd;
        if (t < t_max) t_max = t, blocking = a;
      }
      if (t_max <= 1e-12) {
        remove_knot(blocking);
        continue;
      }
      double t = t_max;
      bool halved = false;
      if (decrement > 1e-14) {
        while (t > 1e-10 * t_max) {
          const double trial = objective(axpy(theta_, t, d));
          if (trial >= md.value + 1e-4 * t * decrement) break;
          t *= 0.5;
          halved = true;
        }
        if (t <= 1e-10 * t_max) {
          // Rounding noise dominates the model; let the insertion test decide.
          stalled = true;
          continue;
        }
      }
      theta_ = axpy(theta_, t, d);
      if (!halved && blocking != 0) remove_knot(blocking);
    }
    if (!done) {
      Model md = model(theta_);
      residual = std::max(max_abs(md.g), std::max(best_insertion().second, 0.0));
      done = residual <= opts_.tolerance;
    }

    fit.iterations = iter;
    fit.kkt_residual = residual;
    fit.converged = done;
    const std::vector<double> psi = node_values();
    fit.phi.resize(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) fit.phi[i] = psi[i] - std::log(scale_);
    fit.knot.assign(u_.size(), 0);
    for (std::size_t k : knots_) fit.knot[k] = 1;
    return fit;
  }

 private:
  struct Model {
    double value;
    std::vector<double> g, diag, off;
  };

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  static double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::fabs(v));
    return m;
  }
  static std::vector<double> axpy(const std::vector<double>& x, double t, const std::vector<double>& d) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + t * d[i];
    return out;
  }

  double len(std::size_t a) const { return u_[knots_[a + 1]] - u_[knots_[a]]; }

  // Slope change at interior knot a for knot values v (concave iff <= 0).
  double kink(const std::vector<double>& v, std::size_t a) const {
    return (v[a + 1] - v[a]) / len(a) - (v[a] - v[a - 1]) / len(a - 1);
  }

  void refresh_data_terms() {
    data_.assign(knots_.size(), 0.0);
    for (std::size_t a = 0; a + 1 < knots_.size(); ++a) {
      const std::size_t lo = knots_[a], hi = knots_[a + 1];
      const double l = len(a);
      for (std::size_t i = lo + 1; i < hi; ++i) {
        const double t = (u_[i] - u_[lo]) / l;
        data_[a] += w_[i] * (1.0 - t);
        data_[a + 1] += w_[i] * t;
      }
    }
    for (std::size_t a = 0; a < knots_.size(); ++a) data_[a] += w_[knots_[a]];
  }

  double objective(const std::vector<double>& v) const {
    double s = dot(data_, v) + 1.0;
    for (std::size_t a = 0; a + 1 < knots_.size(); ++a) s -= integrate_exp_segment(v[a], v[a + 1], len(a));
    return s;
  }

  Model model(const std::vector<double>& v) const {
    const std::size_t p = knots_.size();
    Model md{dot(data_, v) + 1.0, data_, std::vector<double>(p, 0.0), std::vector<double>(p - 1, 0.0)};
    for (std::size_t a = 0; a + 1 < p; ++a) {
      const SegmentMoments s = segment_moments(v[a], v[a + 1], len(a));
      md.value -= s.zero;
      md.g[a] -= s.left;
      md.g[a + 1] -= s.right;
      md.diag[a] += s.left2;
      md.diag[a + 1] += s.right2;
      md.off[a] = s.cross;
    }
    return md;
  }

  std::vector<double> node_values() const {
    std::vector<double> psi(u_.size());
    for (std::size_t a = 0; a + 1 < knots_.size(); ++a) {
      const std::size_t lo = knots_[a], hi = knots_[a + 1];
      for (std::size_t i = lo; i <= hi; ++i) {
        const double t = (u_[i] - u_[lo]) / len(a);
        psi[i] = (1.0 - t) * theta_[a] + t * theta_[a + 1];
      }
      psi[lo] = theta_[a];
      psi[hi] = theta_[a + 1];
    }
    return psi;
  }

  // Directional derivative of the objective along -(u - u_j)_+ for every
  // non-knot node j; returns the best node and its derivative.
  std::pair<std::size_t, double> best_insertion() const {
    const std::vector<double> psi = node_values();
    const std::size_t m = u_.size();
    std::vector<char> is_knot(m, 0);
    for (std::size_t k : knots_) is_knot[k] = 1;
    double mass_right = 0.0, moment_right = 0.0;  // ∫_{u_j}^1 e^psi, ∫_{u_j}^1 (u - u_j) e^psi
    double weight_right = 0.0, data_right = 0.0;  // same sums over the weights
    std::size_t best = 0;
    double best_d = -std::numeric_limits<double>::infinity();
    for (std::size_t j = m - 1; j-- > 0;) {
      const double l = u_[j + 1] - u_[j];
      const SegmentMoments s = segment_moments(psi[j], psi[j + 1], l);
      moment_right += l * s.right + l * mass_right;
      mass_right += s.zero;
      weight_right += w_[j + 1];
      data_right += l * weight_right;
      if (is_knot[j]) continue;
      const double dj = moment_right - data_right;
      if (dj > best_d) best_d = dj, best = j;
    }
    return {best, best_d};
  }

  void insert_knot(std::size_t j) {
    const auto pos = std::upper_bound(knots_.begin(), knots_.end(), j) - knots_.begin();
    const double t = (u_[j] - u_[knots_[pos - 1]]) / (u_[knots_[pos]] - u_[knots_[pos - 1]]);
    const double value = (1.0 - t) * theta_[pos - 1] + t * theta_[pos];
    knots_.insert(knots_.begin() + pos, j);
    theta_.insert(theta_.begin() + pos, value);
    refresh_data_terms();
    // Open the new kink with a damped Newton step along -(u - u_j)_+, which
    // keeps every other kink unchanged.
    std::vector<double> p(knots_.size(), 0.0);
    for (std::size_t a = 0; a < knots_.size(); ++a) p[a] = -std::max(u_[knots_[a]] - u_[j], 0.0);
    const Model md = model(theta_);
    const double slope = dot(md.g, p);
    double curv = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
      curv += md.diag[a] * p[a] * p[a];
      if (a + 1 < p.size()) curv += 2.0 * md.off[a] * p[a] * p[a + 1];
    }
    if (!(slope > 0.0) || !(curv > 0.0)) return;
    double t_step = slope / curv;
    while (t_step > 1e-14) {
      const auto trial = axpy(theta_, t_step, p);
      if (objective(trial) > md.value) {
        theta_ = trial;
        return;
      }
      t_step *= 0.5;
    }
  }

  void remove_knot(std::size_t a) {
    knots_.erase(knots_.begin() + a);
    theta_.erase(theta_.begin() + a);
    refresh_data_terms();
  }

  void normalize() {
    double mass = 0.0;
    for (std::size_t a = 0; a + 1 < knots_.size(); ++a) mass += integrate_exp_segment(theta_[a], theta_[a + 1], len(a));
    const double shift = std::log(mass);
    for (double& v : theta_) v -= shift;
  }

  // Log of a binned Gaussian kernel estimate, majorised by its least concave
  // majorant over the nodes.
  void smoothed_start() {
    const std::size_t m = u_.size();
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += w_[i] * u_[i];
    for (std::size_t i = 0; i < m; ++i) var += w_[i] * (u_[i] - mean) * (u_[i] - mean);
    double eff = 0.0;
    for (double v : w_) eff += v * v;
    eff = 1.0 / eff;
    const double h = std::max(1.06 * std::sqrt(var) * std::pow(eff, -0.2), 1e-3);
    constexpr int kBins = 512;
    std::vector<double> bins(kBins, 0.0), dens(kBins, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      bins[std::min(kBins - 1, static_cast<int>(u_[i] * kBins))] += w_[i];
    }
    for (int b = 0; b < kBins; ++b) {
      const double cb = (b + 0.5) / kBins;
      double s = 0.0;
      for (int c = 0; c < kBins; ++c) {
        if (bins[c] == 0.0) continue;
        const double z = (cb - (c + 0.5) / kBins) / h;
        if (z * z < 80.0) s += bins[c] * std::exp(-0.5 * z * z);
      }
      dens[b] = std::log(std::max(s, 1e-300));
    }
    std::vector<double> ell(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double pos = std::clamp(u_[i] * kBins - 0.5, 0.0, kBins - 1.0);
      const int b = std::min(static_cast<int>(pos), kBins - 2);
      const double f = pos - b;
      ell[i] = (1.0 - f) * dens[b] + f * dens[b + 1];
    }
    // Upper hull of (u_i, ell_i), collinear nodes dropped.
    knots_.clear();
    for (std::size_t i = 0; i < m; ++i) {
      while (knots_.size() >= 2) {
        const std::size_t a = knots_[knots_.size() - 2], b = knots_.back();
        const double c = (u_[b] - u_[a]) * (ell[i] - ell[a]) - (ell[b] - ell[a]) * (u_[i] - u_[a]);
        if (c >= 0.0) knots_.pop_back();
        else break;
      }
      knots_.push_back(i);
    }
    // A handful of hull vertices is enough to seed the active set; every subset
    // of them still interpolates concavely.
    constexpr std::size_t kSeedKnots = 8;
    if (knots_.size() > kSeedKnots) {
      std::vector<std::size_t> thin;
      for (std::size_t r = 0; r < kSeedKnots; ++r) thin.push_back(knots_[r * (knots_.size() - 1) / (kSeedKnots - 1)]);
      knots_ = thin;
    }
    theta_.clear();
    for (std::size_t k : knots_) theta_.push_back(ell[k]);
  }

  ActiveSetOptions opts_;
  double origin_ = 0.0, scale_ = 1.0;
  std::vector<double> u_, w_;
  std::vector<std::size_t> knots_;
  std::vector<double> theta_;
  std::vector<double> data_;
};

}  // namespace

ConcaveFit1d solve_concave_1d(const WeightedSample1d& data, const ActiveSetOptions& opts) {
  if (data.x.size() < 2 || data.x.size() != data.w.size()) {
    throw Error(ErrorCode::kInvalidInput, "need at least two distinct nodes with weights");
  }
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    if (!(data.w[i] > 0.0) || !std::isfinite(data.x[i]) || (i > 0 && !(data.x[i] > data.x[i - 1]))) {
      throw Error(ErrorCode::kInvalidInput, "nodes must be finite, strictly increasing, with positive weights");
    }
  }
  if (opts.max_iterations < 1 || !(opts.tolerance > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "max_iterations must be >= 1 and tolerance > 0");
  }
  return Solver(data, opts).run();
}

}  // namespace logcave
