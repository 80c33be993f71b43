#include "logcave/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "logcave/error.hpp"

namespace logcave {
namespace {

// Below this gap the segment integral switches to the midpoint series.
constexpr double kSegmentSeriesGap = 1e-8;
// Below this spread the 2-simplex closed form loses more than ~2 digits, so
// the Opitz-matrix route is used instead.
constexpr double kSimplexClosedFormSpread = 1e-2;

void check_overflow(double y_max, double volume) {
  if (!std::isfinite(y_max) || y_max > kMaxLogValue - std::log(volume)) {
    throw Error(ErrorCode::kOverflow,
                "exponential integral overflows (max log-value " + std::to_string(y_max) + ")");
  }
}

// exp[u, v] for u <= v, factored around the larger node.
double exp_dd2(double u, double v) {
  const double gap = v - u;
  if (gap < kSegmentSeriesGap) {
    return std::exp(0.5 * (u + v)) * (1.0 + gap * gap / 24.0);
  }
  return std::exp(v) * (-std::expm1(-gap)) / gap;
}

// K_k(s) = ∫_0^1 u^k e^{-s u} du for k = 0, 1, 2 and s >= 0.
std::array<double, 3> decay_moments(double s) {
  std::array<double, 3> k{};
  if (s < 1.0) {
    // Alternating series; 30 terms reach machine precision for s < 1.
    double term = 1.0;  // (-s)^j / j!
    for (int j = 0; j < 30; ++j) {
      k[0] += term / (j + 1);
      k[1] += term / (j + 2);
      k[2] += term / (j + 3);
      term *= -s / (j + 1);
    }
    return k;
  }
  const double es = std::exp(-s);
  k[0] = -std::expm1(-s) / s;
  k[1] = (k[0] - es) / s;
  k[2] = (2.0 * k[1] - es) / s;
  return k;
}

// exp of the upper bidiagonal Opitz matrix for N nodes, by scaled Taylor
// series and squaring; entry (i, j) is exp[t_i, ..., t_j].
template <int N>
Eigen::Matrix<double, N, N> opitz_exp(const std::array<double, N>& nodes) {
  using Mat = Eigen::Matrix<double, N, N>;
  const double shift = *std::max_element(nodes.begin(), nodes.end());
  if (!std::isfinite(shift) || shift > kMaxLogValue) {
    throw Error(ErrorCode::kOverflow, "divided difference nodes overflow exp");
  }
  double spread = 0.0;
  for (double t : nodes) spread = std::max(spread, shift - t);
  int squarings = 0;
  double scale = 1.0;
  while ((spread + 1.0) * scale > 0.25) {
    scale *= 0.5;
    ++squarings;
  }
  std::array<double, N> diag;
  for (int i = 0; i < N; ++i) diag[i] = (nodes[i] - shift) * scale;

  Mat result = Mat::Identity();
  Mat term = Mat::Identity();
  for (int k = 1; k < 40; ++k) {
    // term <- term * z / k, z bidiagonal.
    double big = 0.0;
    for (int j = N - 1; j >= 0; --j) {
      for (int i = 0; i <= j; ++i) {
        double v = term(i, j) * diag[j];
        if (j > 0) v += term(i, j - 1) * scale;
        term(i, j) = v / k;
        big = std::max(big, std::fabs(term(i, j)));
      }
    }
    result += term;
    if (big < 1e-18 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) {
    Mat sq = Mat::Zero();
    for (int i = 0; i < N; ++i) {
      for (int j = i; j < N; ++j) {
        double v = 0.0;
        for (int l = i; l <= j; ++l) v += result(i, l) * result(l, j);
        sq(i, j) = v;
      }
    }
    result = sq;
  }
  return result * std::exp(shift);
}

}  // namespace

double integrate_exp_segment(double y_left, double y_right, double length) {
  if (!(length > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "segment length must be positive");
  }
  const double hi = std::max(y_left, y_right);
  const double lo = std::min(y_left, y_right);
  check_overflow(hi, length);
  return length * exp_dd2(lo, hi);
}

double integrate_exp_simplex(std::span<const double> values, double volume, int dim) {
  if (dim != 1 && dim != 2) {
    throw Error(ErrorCode::kInvalidInput, "simplex dimension must be 1 or 2");
  }
  if (static_cast<int>(values.size()) != dim + 1) {
    throw Error(ErrorCode::kInvalidInput, "simplex needs dim + 1 vertex values");
  }
  if (!(volume > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "simplex volume must be positive");
  }
  if (dim == 1) return integrate_exp_segment(values[0], values[1], volume);

  std::array<double, 3> y{values[0], values[1], values[2]};
  std::sort(y.begin(), y.end());
  check_overflow(y[2], volume);
  if (y[2] - y[0] < kSimplexClosedFormSpread) {
    const Eigen::Matrix<double, 3, 3> table = opitz_exp<3>(y);
    return 2.0 * volume * table(0, 2);
  }
  const double dd = (exp_dd2(y[1], y[2]) - exp_dd2(y[0], y[1])) / (y[2] - y[0]);
  return 2.0 * volume * dd;
}

Eigen::MatrixXd exp_divided_differences(std::span<const double> nodes) {
  const int n = static_cast<int>(nodes.size());
  if (n == 0) return Eigen::MatrixXd();
  const double shift = *std::max_element(nodes.begin(), nodes.end());
  if (!std::isfinite(shift) || shift > kMaxLogValue) {
    throw Error(ErrorCode::kOverflow, "divided difference nodes overflow exp");
  }

  double spread = 0.0;
  for (double t : nodes) spread = std::max(spread, shift - t);
  int squarings = 0;
  double scale = 1.0;
  while ((spread + 1.0) * scale > 0.25) {
    scale *= 0.5;
    ++squarings;
  }

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    z(i, i) = (nodes[i] - shift) * scale;
    if (i + 1 < n) z(i, i + 1) = scale;
  }

  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k < 40; ++k) {
    term = (term * z / k).triangularView<Eigen::Upper>();
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) {
    result = (result * result).triangularView<Eigen::Upper>();
  }
  return result * std::exp(shift);
}

SegmentMoments segment_moments(double y_left, double y_right, double length) {
  const double hi = std::max(y_left, y_right);
  check_overflow(hi, length);
  const std::array<double, 3> k = decay_moments(std::fabs(y_right - y_left));
  const double scale = length * std::exp(hi);
  // u measures the distance from the higher endpoint in units of the length.
  const double near0 = k[0], near1 = k[1], near2 = k[2];
  const double far1 = k[0] - k[1];                 // ∫ (1-u) e^{-su}
  const double far2 = k[0] - 2.0 * k[1] + k[2];    // ∫ (1-u)^2 e^{-su}
  const double mixed = k[1] - k[2];                // ∫ u(1-u) e^{-su}
  SegmentMoments m{};
  m.zero = scale * near0;
  m.cross = scale * mixed;
  if (y_left >= y_right) {
    // t = u
    m.left = scale * far1;
    m.right = scale * near1;
    m.left2 = scale * far2;
    m.right2 = scale * near2;
  } else {
    // t = 1 - u
    m.left = scale * near1;
    m.right = scale * far1;
    m.left2 = scale * near2;
    m.right2 = scale * far2;
  }
  return m;
}

TriangleMoments triangle_moments(const std::array<double, 3>& y, double area) {
  check_overflow(std::max({y[0], y[1], y[2]}), area);
  const std::array<double, 7> seq{y[0], y[1], y[2], y[0], y[1], y[2], y[0]};
  const Eigen::Matrix<double, 7, 7> t = opitz_exp<7>(seq);
  const double c = 2.0 * area;
  TriangleMoments m{};
  m.zero = c * t(0, 2);
  m.first = {c * t(0, 3), c * t(1, 4), c * t(2, 5)};
  m.second[0][1] = m.second[1][0] = c * t(0, 4);
  m.second[1][2] = m.second[2][1] = c * t(1, 5);
  m.second[0][2] = m.second[2][0] = c * t(2, 6);
  // Barycentric coordinates sum to one, so each row of the second moments
  // sums to the matching first moment.
  for (int k = 0; k < 3; ++k) {
    double off = 0.0;
    for (int l = 0; l < 3; ++l) {
      if (l != k) off += m.second[k][l];
    }
    m.second[k][k] = m.first[k] - off;
  }
  return m;
}

}  // namespace logcave
