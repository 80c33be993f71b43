#include "logcave/tent.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "logcave/error.hpp"
#include "logcave/integrate.hpp"

namespace logcave {

TentFunction TentFunction::make_1d(std::vector<double> knots, std::vector<double> values) {
  if (knots.size() < 2 || knots.size() != values.size()) {
    throw Error(ErrorCode::kInvalidInput, "1D tent needs at least two knots and one value per knot");
  }
  for (std::size_t k = 0; k < knots.size(); ++k) {
    if (!std::isfinite(knots[k]) || !std::isfinite(values[k])) {
      throw Error(ErrorCode::kInvalidInput, "tent knots and values must be finite");
    }
    if (k > 0 && !(knots[k] > knots[k - 1])) {
      throw Error(ErrorCode::kInvalidInput, "tent knots must be strictly increasing");
    }
  }
  TentFunction t;
  t.dim_ = 1;
  t.knots1_ = std::move(knots);
  t.values_ = std::move(values);
  t.box_min_ = {t.knots1_.front(), 0.0};
  t.box_max_ = {t.knots1_.back(), 0.0};
  return t;
}

TentFunction TentFunction::make_2d(std::vector<Point2> knots, std::vector<double> values,
                                   std::vector<Triangle> triangles) {
  if (knots.size() < 3 || knots.size() != values.size() || triangles.empty()) {
    throw Error(ErrorCode::kInvalidInput, "2D tent needs >= 3 knots, one value each, and triangles");
  }
  for (std::size_t k = 0; k < knots.size(); ++k) {
    if (!std::isfinite(knots[k][0]) || !std::isfinite(knots[k][1]) || !std::isfinite(values[k])) {
      throw Error(ErrorCode::kInvalidInput, "tent knots and values must be finite");
    }
  }
  TentFunction t;
  t.dim_ = 2;
  t.box_min_ = knots[0];
  t.box_max_ = knots[0];
  for (const auto& p : knots) {
    for (int d = 0; d < 2; ++d) {
      t.box_min_[d] = std::min(t.box_min_[d], p[d]);
      t.box_max_[d] = std::max(t.box_max_[d], p[d]);
    }
  }
  for (auto& tri : triangles) {
    for (int v : tri) {
      if (v < 0 || v >= static_cast<int>(knots.size())) {
        throw Error(ErrorCode::kInvalidInput, "triangle references a missing knot");
      }
    }
    const double c = cross(knots[tri[0]], knots[tri[1]], knots[tri[2]]);
    if (c == 0.0) throw Error(ErrorCode::kDegenerateHull, "triangle with zero area");
    if (c < 0.0) std::swap(tri[1], tri[2]);
    std::array<Point2, 2> box{knots[tri[0]], knots[tri[0]]};
    for (int v : tri) {
      for (int d = 0; d < 2; ++d) {
        box[0][d] = std::min(box[0][d], knots[v][d]);
        box[1][d] = std::max(box[1][d], knots[v][d]);
      }
    }
    t.tri_boxes_.push_back(box);
  }
  t.knots2_ = std::move(knots);
  t.values_ = std::move(values);
  t.triangles_ = std::move(triangles);
  return t;
}

double TentFunction::eval_log(double x) const {
  if (dim_ != 1) throw Error(ErrorCode::kInvalidInput, "scalar evaluation of a 2D tent");
  if (!(x >= knots1_.front() && x <= knots1_.back())) return kNegInf;
  auto it = std::upper_bound(knots1_.begin(), knots1_.end(), x);
  if (it == knots1_.end()) return values_.back();
  const std::size_t k = static_cast<std::size_t>(it - knots1_.begin()) - 1;
  const double lambda = (x - knots1_[k]) / (knots1_[k + 1] - knots1_[k]);
  return (1.0 - lambda) * values_[k] + lambda * values_[k + 1];
}

double TentFunction::eval_log(const Point2& x) const {
  if (dim_ != 2) throw Error(ErrorCode::kInvalidInput, "planar evaluation of a 1D tent");
  const double slack = 1e-12 * (1.0 + std::max(box_max_[0] - box_min_[0], box_max_[1] - box_min_[1]));
  if (x[0] < box_min_[0] - slack || x[0] > box_max_[0] + slack || x[1] < box_min_[1] - slack ||
      x[1] > box_max_[1] + slack) {
    return kNegInf;
  }
  int best = -1;
  double best_min = -1e300;
  std::array<double, 3> best_l{};
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& box = tri_boxes_[t];
    if (x[0] < box[0][0] - slack || x[0] > box[1][0] + slack || x[1] < box[0][1] - slack ||
        x[1] > box[1][1] + slack) {
      continue;
    }
    const auto& tri = triangles_[t];
    const auto l = barycentric(x, knots2_[tri[0]], knots2_[tri[1]], knots2_[tri[2]]);
    const double m = std::min({l[0], l[1], l[2]});
    if (m > best_min) {
      best_min = m;
      best = static_cast<int>(t);
      best_l = l;
      if (m >= 0.0) break;
    }
  }
  if (best < 0 || best_min < -1e-10) return kNegInf;
  const auto& tri = triangles_[best];
  return best_l[0] * values_[tri[0]] + best_l[1] * values_[tri[1]] + best_l[2] * values_[tri[2]];
}

double TentFunction::eval_log(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) {
    throw Error(ErrorCode::kInvalidInput, "point dimension does not match tent");
  }
  return dim_ == 1 ? eval_log(x[0]) : eval_log(Point2{x[0], x[1]});
}

double TentFunction::eval(double x) const { return std::exp(eval_log(x)); }
double TentFunction::eval(const Point2& x) const { return std::exp(eval_log(x)); }

double TentFunction::total_mass() const {
  double mass = 0.0;
  if (dim_ == 1) {
    for (std::size_t k = 0; k + 1 < knots1_.size(); ++k) {
      mass += integrate_exp_segment(values_[k], values_[k + 1], knots1_[k + 1] - knots1_[k]);
    }
    return mass;
  }
  for (const auto& tri : triangles_) {
    const std::array<double, 3> y{values_[tri[0]], values_[tri[1]], values_[tri[2]]};
    const double area = triangle_area(knots2_[tri[0]], knots2_[tri[1]], knots2_[tri[2]]);
    mass += integrate_exp_simplex(y, area, 2);
  }
  return mass;
}

TentFunction::Maximum TentFunction::max_density() const {
  const auto it = std::max_element(values_.begin(), values_.end());
  const int k = static_cast<int>(it - values_.begin());
  Maximum m{};
  m.knot = k;
  m.density = std::exp(*it);
  m.point = dim_ == 1 ? Point2{knots1_[k], 0.0} : knots2_[k];
  return m;
}

double TentFunction::concavity_violation() const {
  double worst = kNegInf;
  if (dim_ == 1) {
    for (std::size_t k = 1; k + 1 < knots1_.size(); ++k) {
      const double lambda = (knots1_[k] - knots1_[k - 1]) / (knots1_[k + 1] - knots1_[k - 1]);
      const double chord = (1.0 - lambda) * values_[k - 1] + lambda * values_[k + 1];
      worst = std::max(worst, (chord - values_[k]) / (1.0 + std::fabs(values_[k])));
    }
    return worst;
  }
  // Map each undirected edge to the opposite vertices of its two triangles.
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> edges;
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3], c = tri[(e + 2) % 3];
      edges[{std::min(a, b), std::max(a, b)}].push_back({static_cast<int>(t), c});
    }
  }
  for (const auto& [edge, sides] : edges) {
    if (sides.size() != 2) continue;
    for (int s = 0; s < 2; ++s) {
      const auto& tri = triangles_[sides[s].first];
      const int opposite = sides[1 - s].second;
      const auto l = barycentric(knots2_[opposite], knots2_[tri[0]], knots2_[tri[1]], knots2_[tri[2]]);
      const double plane = l[0] * values_[tri[0]] + l[1] * values_[tri[1]] + l[2] * values_[tri[2]];
      worst = std::max(worst, (values_[opposite] - plane) / (1.0 + std::fabs(values_[opposite])));
    }
  }
  return worst;
}

bool TentFunction::is_concave(double tolerance) const { return concavity_violation() <= tolerance; }

TentFunction TentFunction::shifted(double delta) const {
  TentFunction t = *this;
  for (double& v : t.values_) v += delta;
  return t;
}

TentFunction TentFunction::normalized() const { return shifted(-std::log(total_mass())); }

double TentFunction::slope(std::size_t piece) const {
  return (values_[piece + 1] - values_[piece]) / (knots1_[piece + 1] - knots1_[piece]);
}

}  // namespace logcave
