#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's integration or optimisation code.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Composite Simpson rule with `panels` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, long panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double s = f(a) + f(b);
  for (long i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return s * h / 3.0;
}

// Simpson on each piece between consecutive cut points.
inline double simpson_pieces(const std::function<double(double)>& f, std::vector<double> cuts, long panels_per_piece) {
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] > cuts[k]) s += simpson(f, cuts[k], cuts[k + 1], panels_per_piece);
  }
  return s;
}

// Gauss-Legendre nodes/weights on [-1, 1] by Newton on P_n.
inline void legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1, p1 = p2;
      }
      const double dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) {
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        break;
      }
    }
  }
}

// ∫ over triangle (a, b, c) by the Duffy map and a tensor Gauss rule.
inline double triangle_quad(const std::function<double(double, double)>& f, std::array<double, 2> a,
                            std::array<double, 2> b, std::array<double, 2> c, int order = 24) {
  std::vector<double> x, w;
  legendre(order, x, w);
  const double area2 = std::fabs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
  double s = 0.0;
  for (int i = 0; i < order; ++i) {
    const double u = 0.5 * (x[i] + 1.0);
    for (int j = 0; j < order; ++j) {
      const double v = 0.5 * (x[j] + 1.0) * (1.0 - u);
      const double px = a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]);
      const double py = a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1]);
      s += 0.25 * w[i] * w[j] * (1.0 - u) * f(px, py);
    }
  }
  return s * area2;
}

// Asymptotic Kolmogorov p-value for statistic D on n points.
inline double ks_pvalue(double d, std::size_t n) {
  const double lam = (std::sqrt(static_cast<double>(n)) + 0.12 + 0.11 / std::sqrt(static_cast<double>(n))) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}

inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

// Value at p of the least concave majorant of (pts, ys) in 2D, by brute force
// over all points, segments and triangles containing p (Caratheodory).
inline double majorant_2d(const std::vector<std::array<double, 2>>& pts, const std::vector<double>& ys,
                          std::array<double, 2> p) {
  const std::size_t n = pts.size();
  double best = -INFINITY;
  auto cr = [](std::array<double, 2> o, std::array<double, 2> a, std::array<double, 2> b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  const double eps = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::hypot(pts[i][0] - p[0], pts[i][1] - p[1]) < eps) best = std::max(best, ys[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double len2 = std::pow(pts[j][0] - pts[i][0], 2) + std::pow(pts[j][1] - pts[i][1], 2);
      if (std::fabs(cr(pts[i], pts[j], p)) <= eps * (1.0 + len2)) {
        const double t = ((p[0] - pts[i][0]) * (pts[j][0] - pts[i][0]) + (p[1] - pts[i][1]) * (pts[j][1] - pts[i][1])) / len2;
        if (t >= -eps && t <= 1.0 + eps) best = std::max(best, (1.0 - t) * ys[i] + t * ys[j]);
      }
      for (std::size_t k = j + 1; k < n; ++k) {
        const double area = cr(pts[i], pts[j], pts[k]);
        if (std::fabs(area) < 1e-14) continue;
        const double l0 = cr(pts[j], pts[k], p) / area, l1 = cr(pts[k], pts[i], p) / area, l2 = cr(pts[i], pts[j], p) / area;
        if (l0 >= -eps && l1 >= -eps && l2 >= -eps) best = std::max(best, l0 * ys[i] + l1 * ys[j] + l2 * ys[k]);
      }
    }
  }
  return best;
}

// Least concave majorant of (x, y) in 1D (x sorted) at every x_i, by the
// O(n^2) chord rule: max over i <= k <= j of the chord through (x_i, y_i),
// (x_j, y_j).
inline std::vector<double> majorant_1d(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> out(y);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = i; k <= j; ++k) {
        const double t = (x[k] - x[i]) / (x[j] - x[i]);
        out[k] = std::max(out[k], (1.0 - t) * y[i] + t * y[j]);
      }
    }
  }
  return out;
}

}  // namespace oracle
