#include "logcave/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>

#include <boost/multiprecision/cpp_int.hpp>

#include "logcave/error.hpp"

namespace logcave {
namespace {

using Vec3 = std::array<double, 3>;


struct Face {
  std::array<int, 3> v;
  bool alive = true;
};

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

// Lifted points snapped to a per-axis grid of 2^-k with |coordinate| < 2^50,
// so orientation signs can be settled exactly in 256-bit integers. Scaling an
// axis by a positive factor never changes an orientation sign.
class SnappedPoints {
 public:
  explicit SnappedPoints(const std::vector<Vec3>& pts) : q_(pts.size()), d_(pts.size()) {
    for (int k = 0; k < 3; ++k) {
      double mx = 0.0;
      for (const auto& p : pts) mx = std::max(mx, std::fabs(p[k]));
      int e = 0;
      std::frexp(mx > 0.0 ? mx : 1.0, &e);  // mx < 2^e
      const int shift = 50 - e;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        q_[i][k] = static_cast<std::int64_t>(std::llround(std::ldexp(pts[i][k], shift)));
        d_[i][k] = static_cast<double>(q_[i][k]);
      }
    }
  }

  std::size_t size() const { return q_.size(); }

  // Sign of det[b-a, c-a, p-a].
  int orient3d(int a, int b, int c, int p) const {
    const Vec3 &pa = d_[a], &pb = d_[b], &pc = d_[c], &pp = d_[p];
    const double bx = pb[0] - pa[0], by = pb[1] - pa[1], bz = pb[2] - pa[2];
    const double cx = pc[0] - pa[0], cy = pc[1] - pa[1], cz = pc[2] - pa[2];
    const double px = pp[0] - pa[0], py = pp[1] - pa[1], pz = pp[2] - pa[2];
    const double m1 = cy * pz - cz * py, m2 = cz * px - cx * pz, m3 = cx * py - cy * px;
    const double det = bx * m1 + by * m2 + bz * m3;
    const double perm = std::fabs(bx) * (std::fabs(cy * pz) + std::fabs(cz * py)) +
                        std::fabs(by) * (std::fabs(cz * px) + std::fabs(cx * pz)) +
                        std::fabs(bz) * (std::fabs(cx * py) + std::fabs(cy * px));
    // Differences of grid integers below 2^51 are exact; only products round.
    if (std::fabs(det) > 1e-14 * perm) return det > 0.0 ? 1 : -1;
    using boost::multiprecision::int256_t;
    const auto &qa = q_[a], &qb = q_[b], &qc = q_[c], &qp = q_[p];
    const int256_t ex = qb[0] - qa[0], ey = qb[1] - qa[1], ez = qb[2] - qa[2];
    const int256_t fx = qc[0] - qa[0], fy = qc[1] - qa[1], fz = qc[2] - qa[2];
    const int256_t gx = qp[0] - qa[0], gy = qp[1] - qa[1], gz = qp[2] - qa[2];
    const int256_t exact = ex * (fy * gz - fz * gy) + ey * (fz * gx - fx * gz) + ez * (fx * gy - fy * gx);
    return exact > 0 ? 1 : (exact < 0 ? -1 : 0);
  }

  bool collinear(int a, int b, int c) const {
    const auto &qa = q_[a], &qb = q_[b], &qc = q_[c];
    for (int k = 0; k < 3; ++k) {
      const int i = (k + 1) % 3, j = (k + 2) % 3;
      const __int128 det = static_cast<__int128>(qb[i] - qa[i]) * (qc[j] - qa[j]) -
                           static_cast<__int128>(qb[j] - qa[j]) * (qc[i] - qa[i]);
      if (det != 0) return false;
    }
    return true;
  }

  // Sign of the projected orientation of (a, b, c).
  int orient2d(int a, int b, int c) const {
    const auto &qa = q_[a], &qb = q_[b], &qc = q_[c];
    const __int128 det = static_cast<__int128>(qb[0] - qa[0]) * (qc[1] - qa[1]) -
                         static_cast<__int128>(qb[1] - qa[1]) * (qc[0] - qa[0]);
    return det > 0 ? 1 : (det < 0 ? -1 : 0);
  }

 private:
  std::vector<std::array<std::int64_t, 3>> q_;
  std::vector<Vec3> d_;
};

// Incremental 3D convex hull on exact orientation signs; points on the
// current hull surface are never inserted.
class Hull3 {
 public:
  explicit Hull3(const std::vector<Vec3>& pts) : pts_(pts) {}

  const std::vector<Face>& faces() const { return faces_; }
  const SnappedPoints& points() const { return pts_; }

  // Inserts `order` in sequence; the first four affinely independent points
  // seed the hull.
  void build(const std::vector<int>& order) {
    const std::array<int, 4> s = initial_simplex(order);
    const std::array<std::array<int, 3>, 4> tets{{{s[0], s[1], s[2]}, {s[0], s[1], s[3]},
                                                  {s[0], s[2], s[3]}, {s[1], s[2], s[3]}}};
    for (int k = 0; k < 4; ++k) {
      auto f = tets[k];
      const int opposite = s[3 - k];
      if (pts_.orient3d(f[0], f[1], f[2], opposite) > 0) std::swap(f[1], f[2]);
      add_face(f);
    }
    for (int p : order) {
      if (std::find(s.begin(), s.end(), p) != s.end()) continue;
      insert(p);
    }
  }

  // True for faces whose outward normal points up.
  bool upper(int f) const { return pts_.orient2d(faces_[f].v[0], faces_[f].v[1], faces_[f].v[2]) > 0; }

 private:
  bool visible(int f, int p) const { return pts_.orient3d(faces_[f].v[0], faces_[f].v[1], faces_[f].v[2], p) > 0; }

  int twin(int f, int k) const {
    const auto& v = faces_[f].v;
    const auto it = edges_.find(edge_key(v[(k + 1) % 3], v[k]));
    return it == edges_.end() ? -1 : it->second;
  }

  // Upper face whose projection contains p, or -1 when p leaves the upper
  // surface (or the walk does not settle).
  int locate(int p) const {
    int f = last_;
    if (f < 0 || !faces_[f].alive || !upper(f)) return -1;
    const int limit = 4 * static_cast<int>(faces_.size()) + 16;
    for (int step = 0; step < limit; ++step) {
      int next = -1;
      for (int k = 0; k < 3; ++k) {
        const int kk = (k + step) % 3;
        if (pts_.orient2d(faces_[f].v[kk], faces_[f].v[(kk + 1) % 3], p) < 0) {
          next = twin(f, kk);
          break;
        }
      }
      if (next < 0) return f;
      if (!upper(next)) return -1;
      f = next;
    }
    return -1;
  }

 public:
  void insert(int p) {
    std::vector<int> seen;
    const int start = locate(p);
    if (start >= 0) {
      if (!visible(start, p)) return;
      // The visible region of a convex hull is connected.
      std::vector<int> stack{start};
      std::unordered_map<int, char> mark{{start, 1}};
      while (!stack.empty()) {
        const int f = stack.back();
        stack.pop_back();
        seen.push_back(f);
        for (int k = 0; k < 3; ++k) {
          const int g = twin(f, k);
          if (g < 0 || mark.count(g)) continue;
          mark[g] = 1;
          if (visible(g, p)) stack.push_back(g);
        }
      }
    } else {
      for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
        if (faces_[f].alive && visible(f, p)) seen.push_back(f);
      }
    }
    if (seen.empty()) return;
    std::unordered_map<int, char> is_seen;
    for (int f : seen) is_seen[f] = 1;

    std::vector<std::array<int, 2>> horizon;
    for (int f : seen) {
      const auto& v = faces_[f].v;
      for (int k = 0; k < 3; ++k) {
        const int g = twin(f, k);
        if (g >= 0 && !is_seen.count(g)) horizon.push_back({v[k], v[(k + 1) % 3]});
      }
    }
    for (int f : seen) {
      faces_[f].alive = false;
      const auto& v = faces_[f].v;
      for (int k = 0; k < 3; ++k) {
        auto it = edges_.find(edge_key(v[k], v[(k + 1) % 3]));
        if (it != edges_.end() && it->second == f) edges_.erase(it);
      }
    }
    for (const auto& e : horizon) add_face({e[0], e[1], p});
  }

 private:
  void add_face(const std::array<int, 3>& v) {
    const int idx = static_cast<int>(faces_.size());
    faces_.push_back({v, true});
    for (int k = 0; k < 3; ++k) edges_[edge_key(v[k], v[(k + 1) % 3])] = idx;
    if (upper(idx)) last_ = idx;
  }

  std::array<int, 4> initial_simplex(const std::vector<int>& order) const {
    // Any affinely independent quadruple will do; scan greedily.
    const int i0 = order[0];
    int i1 = -1, i2 = -1, i3 = -1;
    for (int i : order) {
      if (i == i0) continue;
      if (i1 < 0) {
        i1 = i;
      } else if (i2 < 0) {
        if (!pts_.collinear(i0, i1, i)) i2 = i;
      } else if (pts_.orient3d(i0, i1, i2, i) != 0) {
        i3 = i;
        break;
      }
    }
    if (i2 < 0) throw Error(ErrorCode::kDegenerateHull, "lifted points are collinear");
    if (i3 < 0) throw Error(ErrorCode::kDegenerateHull, "lifted points are coplanar");
    return {i0, i1, i2, i3};
  }

  SnappedPoints pts_;
  std::vector<Face> faces_;
  std::unordered_map<std::uint64_t, int> edges_;
  int last_ = -1;
};

// Interleaved bits of the quantised coordinates, for a locality-preserving
// insertion order.
std::uint64_t morton(const Point2& p, const Point2& lo, const Point2& hi) {
  auto q = [](double t) {
    std::uint64_t v = static_cast<std::uint64_t>(std::clamp(t, 0.0, 1.0) * 65535.0);
    v = (v | (v << 8)) & 0x00FF00FFull;
    v = (v | (v << 4)) & 0x0F0F0F0Full;
    v = (v | (v << 2)) & 0x33333333ull;
    v = (v | (v << 1)) & 0x55555555ull;
    return v;
  };
  const double wx = hi[0] > lo[0] ? hi[0] - lo[0] : 1.0, wy = hi[1] > lo[1] ? hi[1] - lo[1] : 1.0;
  return q((p[0] - lo[0]) / wx) | (q((p[1] - lo[1]) / wy) << 1);
}

}  // namespace

std::array<double, 3> barycentric(const Point2& p, const Point2& a, const Point2& b,
                                  const Point2& c) {
  const double det = cross(a, b, c);
  const double la = cross(p, b, c) / det;
  const double lb = cross(a, p, c) / det;
  return {la, lb, 1.0 - la - lb};
}

std::vector<int> convex_hull_2d(std::span<const Point2> points) {
  const int n = static_cast<int>(points.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int i, int j) { return points[i] < points[j]; });
  idx.erase(std::unique(idx.begin(), idx.end(),
                        [&](int i, int j) { return points[i] == points[j]; }),
            idx.end());
  if (idx.size() < 3) return idx;
  std::vector<int> hull(2 * idx.size());
  int k = 0;
  for (int i : idx) {
    while (k >= 2 && cross(points[hull[k - 2]], points[hull[k - 1]], points[i]) <= 0) --k;
    hull[k++] = i;
  }
  for (int t = static_cast<int>(idx.size()) - 2, lower = k + 1; t >= 0; --t) {
    const int i = idx[t];
    while (k >= lower && cross(points[hull[k - 2]], points[hull[k - 1]], points[i]) <= 0) --k;
    hull[k++] = i;
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(std::span<const Point2> points, std::span<const int> hull) {
  double twice = 0.0;
  const int m = static_cast<int>(hull.size());
  for (int k = 0; k < m; ++k) {
    const Point2& a = points[hull[k]];
    const Point2& b = points[hull[(k + 1) % m]];
    twice += a[0] * b[1] - a[1] * b[0];
  }
  return 0.5 * std::fabs(twice);
}

std::vector<Triangle> upper_hull_triangulation(std::span<const Point2> points,
                                               std::span<const double> heights) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw Error(ErrorCode::kDegenerateHull, "need at least three points");
  const std::vector<int> hull = convex_hull_2d(points);
  if (hull.size() < 3 || polygon_area(points, hull) <= 0.0) {
    throw Error(ErrorCode::kDegenerateHull, "points are collinear");
  }

  double zmin = heights[0], zmax = heights[0];
  Point2 lo = points[0], hi = points[0];
  Point2 centroid{0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    zmin = std::min(zmin, heights[i]);
    zmax = std::max(zmax, heights[i]);
    for (int k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], points[i][k]);
      hi[k] = std::max(hi[k], points[i][k]);
    }
  }
  for (int i : hull) {
    centroid[0] += points[i][0] / hull.size();
    centroid[1] += points[i][1] / hull.size();
  }
  const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], zmax - zmin});

  // A sentinel strictly below every upper facet turns the lower hull into a
  // cone, so coplanar lifts never make the 3D hull degenerate.
  std::vector<Vec3> lifted(n + 1);
  for (int i = 0; i < n; ++i) lifted[i] = {points[i][0], points[i][1], heights[i]};
  lifted[n] = {centroid[0], centroid[1], zmin - extent - 1.0};

  Hull3 hull3(lifted);
  // Sentinel and planar hull first, so every later point projects inside
  // the upper surface and is placed by walking.
  std::vector<int> order{n};
  std::vector<char> placed(n, 0);
  for (int i : hull) order.push_back(i), placed[i] = 1;
  std::vector<std::pair<std::uint64_t, int>> rest;
  for (int i = 0; i < n; ++i) {
    if (!placed[i]) rest.push_back({morton(points[i], lo, hi), i});
  }
  std::sort(rest.begin(), rest.end());
  for (const auto& r : rest) order.push_back(r.second);
  hull3.build(order);

  std::vector<Triangle> out;
  for (int f = 0; f < static_cast<int>(hull3.faces().size()); ++f) {
    const auto& face = hull3.faces()[f];
    if (!face.alive || !hull3.upper(f)) continue;
    if (face.v[0] == n || face.v[1] == n || face.v[2] == n) continue;
    out.push_back({face.v[0], face.v[1], face.v[2]});
  }
  std::sort(out.begin(), out.end());
  return out;
}

TriangleLocator::TriangleLocator(std::span<const Point2> vertices, std::span<const Triangle> triangles)
    : vertices_(vertices.begin(), vertices.end()), triangles_(triangles.begin(), triangles.end()) {
  if (triangles_.empty()) return;
  lo_ = hi_ = vertices_[triangles_[0][0]];
  for (const auto& tri : triangles_) {
    for (int v : tri) {
      for (int d = 0; d < 2; ++d) {
        lo_[d] = std::min(lo_[d], vertices_[v][d]);
        hi_[d] = std::max(hi_[d], vertices_[v][d]);
      }
    }
  }
  cells_ = std::clamp(static_cast<int>(std::sqrt(static_cast<double>(triangles_.size()))), 1, 256);
  buckets_.assign(static_cast<std::size_t>(cells_) * cells_, {});
  for (int t = 0; t < static_cast<int>(triangles_.size()); ++t) {
    Point2 a = vertices_[triangles_[t][0]], b = a;
    for (int v : triangles_[t]) {
      for (int d = 0; d < 2; ++d) {
        a[d] = std::min(a[d], vertices_[v][d]);
        b[d] = std::max(b[d], vertices_[v][d]);
      }
    }
    const auto [i0, j0] = cell(a);
    const auto [i1, j1] = cell(b);
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) buckets_[static_cast<std::size_t>(i) * cells_ + j].push_back(t);
    }
  }
}

std::pair<int, int> TriangleLocator::cell(const Point2& p) const {
  auto index = [&](int d) {
    const double span = hi_[d] - lo_[d];
    const double f = span > 0.0 ? (p[d] - lo_[d]) / span : 0.0;
    return std::clamp(static_cast<int>(f * cells_), 0, cells_ - 1);
  };
  return {index(0), index(1)};
}

int TriangleLocator::locate(const Point2& p, double tolerance) const {
  if (triangles_.empty()) return -1;
  const double slack = 1e-9 * std::max(hi_[0] - lo_[0], hi_[1] - lo_[1]);
  if (p[0] < lo_[0] - slack || p[0] > hi_[0] + slack || p[1] < lo_[1] - slack || p[1] > hi_[1] + slack) {
    return -1;
  }
  const auto [i, j] = cell(p);
  int best = -1;
  double best_min = -1e300;
  for (int t : buckets_[static_cast<std::size_t>(i) * cells_ + j]) {
    const auto& tri = triangles_[t];
    const auto l = barycentric(p, vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
    const double m = std::min({l[0], l[1], l[2]});
    if (m >= 0.0) return t;
    if (m > best_min) best_min = m, best = t;
  }
  return best_min >= -tolerance ? best : -1;
}

int locate_triangle(std::span<const Point2> vertices, std::span<const Triangle> triangles,
                    const Point2& p, double tolerance) {
  int best = -1;
  double best_min = -1e300;
  for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
    const auto& tri = triangles[t];
    const auto l = barycentric(p, vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    const double m = std::min({l[0], l[1], l[2]});
    if (m >= 0.0) return t;
    if (m > best_min) best_min = m, best = t;
  }
  return best_min >= -tolerance ? best : -1;
}

}  // namespace logcave
