#include "logcave/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/extreme_value.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/laplace.hpp>
#include <boost/math/distributions/logistic.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>

#include "logcave/error.hpp"

namespace logcave {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEulerGamma = 0.57721566490153286061;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidParams, what);
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

std::string family_name(Family family) {
  switch (family) {
    case Family::kNormal: return "normal";
    case Family::kLaplace: return "laplace";
    case Family::kGamma: return "gamma";
    case Family::kBeta: return "beta";
    case Family::kLogistic: return "logistic";
    case Family::kGumbel: return "gumbel";
    case Family::kUniform: return "uniform";
    case Family::kStudentT: return "student_t";
    case Family::kMixture: return "mixture";
    case Family::kNormal2: return "normal2";
    case Family::kProduct: return "product";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  for (Family f : {Family::kNormal, Family::kLaplace, Family::kGamma, Family::kBeta,
                   Family::kLogistic, Family::kGumbel, Family::kUniform, Family::kStudentT,
                   Family::kMixture, Family::kNormal2, Family::kProduct}) {
    if (family_name(f) == name) return f;
  }
  throw Error(ErrorCode::kInvalidParams, "unknown density family '" + name + "'");
}

AnalyticDensity AnalyticDensity::normal(double mean, double sd) {
  require(std::isfinite(mean) && positive_finite(sd), "normal needs finite mean and sd > 0");
  AnalyticDensity d;
  d.family_ = Family::kNormal;
  d.params_ = {mean, sd};
  return d;
}

AnalyticDensity AnalyticDensity::laplace(double location, double scale) {
  require(std::isfinite(location) && positive_finite(scale), "laplace needs scale > 0");
  AnalyticDensity d;
  d.family_ = Family::kLaplace;
  d.params_ = {location, scale};
  return d;
}

AnalyticDensity AnalyticDensity::gamma(double shape, double scale) {
  require(positive_finite(shape) && positive_finite(scale), "gamma needs shape > 0 and scale > 0");
  AnalyticDensity d;
  d.family_ = Family::kGamma;
  d.params_ = {shape, scale};
  return d;
}

AnalyticDensity AnalyticDensity::beta(double alpha, double beta) {
  require(positive_finite(alpha) && positive_finite(beta), "beta needs alpha > 0 and beta > 0");
  AnalyticDensity d;
  d.family_ = Family::kBeta;
  d.params_ = {alpha, beta};
  return d;
}

AnalyticDensity AnalyticDensity::logistic(double location, double scale) {
  require(std::isfinite(location) && positive_finite(scale), "logistic needs scale > 0");
  AnalyticDensity d;
  d.family_ = Family::kLogistic;
  d.params_ = {location, scale};
  return d;
}

AnalyticDensity AnalyticDensity::gumbel(double location, double scale) {
  require(std::isfinite(location) && positive_finite(scale), "gumbel needs scale > 0");
  AnalyticDensity d;
  d.family_ = Family::kGumbel;
  d.params_ = {location, scale};
  return d;
}

AnalyticDensity AnalyticDensity::uniform(double lower, double upper) {
  require(std::isfinite(lower) && std::isfinite(upper) && lower < upper,
          "uniform needs finite lower < upper");
  AnalyticDensity d;
  d.family_ = Family::kUniform;
  d.params_ = {lower, upper};
  return d;
}

AnalyticDensity AnalyticDensity::student_t(double df, double location, double scale) {
  require(std::isfinite(df) && df > 1.0,
          "student_t needs df > 1 (finite first moment is required of f0)");
  require(std::isfinite(location) && positive_finite(scale), "student_t needs scale > 0");
  AnalyticDensity d;
  d.family_ = Family::kStudentT;
  d.params_ = {df, location, scale};
  return d;
}

AnalyticDensity AnalyticDensity::mixture(std::vector<double> weights,
                                         std::vector<AnalyticDensity> parts) {
  require(!parts.empty() && weights.size() == parts.size(),
          "mixture needs one weight per component");
  double total = 0.0;
  for (double w : weights) {
    require(positive_finite(w), "mixture weights must be positive");
    total += w;
  }
  require(std::fabs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");
  for (const auto& p : parts) {
    require(p.dim() == parts.front().dim(), "mixture components must share a dimension");
  }
  AnalyticDensity d;
  d.family_ = Family::kMixture;
  d.dim_ = parts.front().dim();
  d.weights_ = std::move(weights);
  d.parts_ = std::move(parts);
  return d;
}

AnalyticDensity AnalyticDensity::normal2(Point2 mean, double var_x, double var_y, double cov_xy) {
  require(std::isfinite(mean[0]) && std::isfinite(mean[1]), "normal2 needs a finite mean");
  require(positive_finite(var_x) && positive_finite(var_y) && std::isfinite(cov_xy) &&
              var_x * var_y - cov_xy * cov_xy > 0.0,
          "normal2 covariance must be positive definite");
  AnalyticDensity d;
  d.family_ = Family::kNormal2;
  d.dim_ = 2;
  d.params_ = {mean[0], mean[1], var_x, var_y, cov_xy};
  return d;
}

AnalyticDensity AnalyticDensity::product(AnalyticDensity x, AnalyticDensity y) {
  require(x.dim() == 1 && y.dim() == 1, "product needs two univariate marginals");
  AnalyticDensity d;
  d.family_ = Family::kProduct;
  d.dim_ = 2;
  d.weights_ = {1.0, 1.0};
  d.parts_ = {std::move(x), std::move(y)};
  return d;
}

double AnalyticDensity::log_pdf(double x) const {
  if (dim_ != 1) throw Error(ErrorCode::kInvalidInput, "scalar evaluation of a bivariate density");
  const auto& p = params_;
  switch (family_) {
    case Family::kNormal: {
      const double z = (x - p[0]) / p[1];
      return -0.5 * z * z - std::log(p[1]) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    case Family::kLaplace:
      return -std::fabs(x - p[0]) / p[1] - std::log(2.0 * p[1]);
    case Family::kGamma: {
      const double k = p[0], theta = p[1];
      if (x < 0.0) return -kInf;
      if (x == 0.0) {
        if (k < 1.0) return kInf;
        if (k > 1.0) return -kInf;
        return -std::log(theta);
      }
      return (k - 1.0) * std::log(x) - x / theta - std::lgamma(k) - k * std::log(theta);
    }
    case Family::kBeta: {
      const double a = p[0], b = p[1];
      if (x < 0.0 || x > 1.0) return -kInf;
      const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
      const double left = (x == 0.0) ? (a == 1.0 ? 0.0 : (a < 1.0 ? kInf : -kInf))
                                     : (a - 1.0) * std::log(x);
      const double right = (x == 1.0) ? (b == 1.0 ? 0.0 : (b < 1.0 ? kInf : -kInf))
                                      : (b - 1.0) * std::log1p(-x);
      return left + right - lbeta;
    }
    case Family::kLogistic: {
      const double z = std::fabs((x - p[0]) / p[1]);
      return -z - 2.0 * std::log1p(std::exp(-z)) - std::log(p[1]);
    }
    case Family::kGumbel: {
      const double z = (x - p[0]) / p[1];
      return -(z + std::exp(-z)) - std::log(p[1]);
    }
    case Family::kUniform:
      return (x >= p[0] && x <= p[1]) ? -std::log(p[1] - p[0]) : -kInf;
    case Family::kStudentT: {
      const double nu = p[0], z = (x - p[1]) / p[2];
      return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
             0.5 * std::log(nu * std::numbers::pi) - std::log(p[2]) -
             0.5 * (nu + 1.0) * std::log1p(z * z / nu);
    }
    case Family::kMixture: {
      double best = -kInf;
      std::vector<double> logs(parts_.size());
      for (std::size_t c = 0; c < parts_.size(); ++c) {
        logs[c] = std::log(weights_[c]) + parts_[c].log_pdf(x);
        best = std::max(best, logs[c]);
      }
      if (!std::isfinite(best)) return best;
      double sum = 0.0;
      for (double l : logs) sum += std::exp(l - best);
      return best + std::log(sum);
    }
    default:
      break;
  }
  throw Error(ErrorCode::kInvalidInput, "scalar evaluation of a bivariate density");
}

double AnalyticDensity::pdf(double x) const { return std::exp(log_pdf(x)); }

double AnalyticDensity::log_pdf(const Point2& x) const {
  if (dim_ != 2) throw Error(ErrorCode::kInvalidInput, "planar evaluation of a univariate density");
  switch (family_) {
    case Family::kNormal2: {
      const auto& p = params_;
      const double det = p[2] * p[3] - p[4] * p[4];
      const double dx = x[0] - p[0], dy = x[1] - p[1];
      const double q = (p[3] * dx * dx - 2.0 * p[4] * dx * dy + p[2] * dy * dy) / det;
      return -0.5 * q - std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det);
    }
    case Family::kProduct:
      return parts_[0].log_pdf(x[0]) + parts_[1].log_pdf(x[1]);
    case Family::kMixture: {
      double best = -kInf;
      std::vector<double> logs(parts_.size());
      for (std::size_t c = 0; c < parts_.size(); ++c) {
        logs[c] = std::log(weights_[c]) + parts_[c].log_pdf(x);
        best = std::max(best, logs[c]);
      }
      if (!std::isfinite(best)) return best;
      double sum = 0.0;
      for (double l : logs) sum += std::exp(l - best);
      return best + std::log(sum);
    }
    default:
      break;
  }
  throw Error(ErrorCode::kInvalidInput, "planar evaluation of a univariate density");
}

double AnalyticDensity::pdf(const Point2& x) const { return std::exp(log_pdf(x)); }

double AnalyticDensity::cdf(double x) const {
  if (dim_ != 1) throw Error(ErrorCode::kInvalidInput, "cdf of a bivariate density");
  namespace bm = boost::math;
  const auto& p = params_;
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  switch (family_) {
    case Family::kNormal: return bm::cdf(bm::normal(p[0], p[1]), x);
    case Family::kLaplace: return bm::cdf(bm::laplace(p[0], p[1]), x);
    case Family::kGamma: return x <= 0.0 ? 0.0 : bm::gamma_p(p[0], x / p[1]);
    case Family::kBeta: return x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : bm::ibeta(p[0], p[1], x));
    case Family::kLogistic: return bm::cdf(bm::logistic(p[0], p[1]), x);
    case Family::kGumbel: return bm::cdf(bm::extreme_value(p[0], p[1]), x);
    case Family::kUniform: return std::clamp((x - p[0]) / (p[1] - p[0]), 0.0, 1.0);
    case Family::kStudentT: return bm::cdf(bm::students_t(p[0]), (x - p[1]) / p[2]);
    case Family::kMixture: {
      double c = 0.0;
      for (std::size_t k = 0; k < parts_.size(); ++k) c += weights_[k] * parts_[k].cdf(x);
      return c;
    }
    default: break;
  }
  throw Error(ErrorCode::kInvalidInput, "cdf of a bivariate density");
}

double AnalyticDensity::quantile(double prob) const {
  if (dim_ != 1) throw Error(ErrorCode::kInvalidInput, "quantile of a bivariate density");
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error(ErrorCode::kInvalidInput, "probability outside [0, 1]");
  namespace bm = boost::math;
  const auto& p = params_;
  const Interval s = support();
  if (prob == 0.0) return s.lo;
  if (prob == 1.0) return s.hi;
  switch (family_) {
    case Family::kNormal: return bm::quantile(bm::normal(p[0], p[1]), prob);
    case Family::kLaplace: return bm::quantile(bm::laplace(p[0], p[1]), prob);
    case Family::kGamma: return p[1] * bm::gamma_p_inv(p[0], prob);
    case Family::kBeta: return bm::ibeta_inv(p[0], p[1], prob);
    case Family::kLogistic: return bm::quantile(bm::logistic(p[0], p[1]), prob);
    case Family::kGumbel: return bm::quantile(bm::extreme_value(p[0], p[1]), prob);
    case Family::kUniform: return p[0] + prob * (p[1] - p[0]);
    case Family::kStudentT: return p[1] + p[2] * bm::quantile(bm::students_t(p[0]), prob);
    case Family::kMixture: {
      double lo = kInf, hi = -kInf;
      for (const auto& part : parts_) {
        lo = std::min(lo, part.quantile(prob));
        hi = std::max(hi, part.quantile(prob));
      }
      if (hi - lo <= 0.0) return lo;
      auto f = [&](double x) { return cdf(x) - prob; };
      std::uintmax_t iters = 200;
      const auto r = bm::tools::toms748_solve(f, lo, hi, bm::tools::eps_tolerance<double>(50), iters);
      return 0.5 * (r.first + r.second);
    }
    default: break;
  }
  throw Error(ErrorCode::kInvalidInput, "quantile of a bivariate density");
}

Interval AnalyticDensity::support() const {
  switch (family_) {
    case Family::kGamma: return {0.0, kInf};
    case Family::kBeta: return {0.0, 1.0};
    case Family::kUniform: return {params_[0], params_[1]};
    case Family::kMixture: {
      Interval s{kInf, -kInf};
      for (const auto& part : parts_) {
        const Interval q = part.support();
        s.lo = std::min(s.lo, q.lo);
        s.hi = std::max(s.hi, q.hi);
      }
      return s;
    }
    case Family::kNormal2:
    case Family::kProduct:
      throw Error(ErrorCode::kInvalidInput, "use support_box for bivariate densities");
    default: return {-kInf, kInf};
  }
}

std::array<Interval, 2> AnalyticDensity::support_box() const {
  switch (family_) {
    case Family::kNormal2: return {Interval{-kInf, kInf}, Interval{-kInf, kInf}};
    case Family::kProduct: return {parts_[0].support(), parts_[1].support()};
    case Family::kMixture: {
      std::array<Interval, 2> box{Interval{kInf, -kInf}, Interval{kInf, -kInf}};
      for (const auto& part : parts_) {
        const auto b = part.support_box();
        for (int d = 0; d < 2; ++d) {
          box[d].lo = std::min(box[d].lo, b[d].lo);
          box[d].hi = std::max(box[d].hi, b[d].hi);
        }
      }
      return box;
    }
    default: {
      const Interval s = support();
      return {s, Interval{0.0, 0.0}};
    }
  }
}

double AnalyticDensity::mode() const {
  const auto& p = params_;
  switch (family_) {
    case Family::kNormal:
    case Family::kLaplace:
    case Family::kLogistic:
    case Family::kGumbel:
      return p[0];
    case Family::kGamma: return p[0] >= 1.0 ? (p[0] - 1.0) * p[1] : 0.0;
    case Family::kBeta: {
      const double a = p[0], b = p[1];
      if (a > 1.0 && b > 1.0) return (a - 1.0) / (a + b - 2.0);
      if (a == 1.0 && b == 1.0) return 0.5;
      return a <= b ? 0.0 : 1.0;
    }
    case Family::kUniform: return 0.5 * (p[0] + p[1]);
    case Family::kStudentT: return p[1];
    case Family::kMixture: {
      // Grid scan over the bulk, then golden-section refinement.
      const double lo = quantile(1e-6), hi = quantile(1.0 - 1e-6);
      const int steps = 4000;
      double best_x = lo, best = -kInf;
      for (int i = 0; i <= steps; ++i) {
        const double x = lo + (hi - lo) * i / steps;
        const double v = log_pdf(x);
        if (v > best) best = v, best_x = x;
      }
      const double h = (hi - lo) / steps;
      double a = best_x - h, b = best_x + h;
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int it = 0; it < 80; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (log_pdf(c) >= log_pdf(d)) b = d; else a = c;
      }
      return 0.5 * (a + b);
    }
    default: break;
  }
  throw Error(ErrorCode::kInvalidInput, "mode of a bivariate density");
}

Point2 AnalyticDensity::mode_2d() const {
  switch (family_) {
    case Family::kNormal2: return {params_[0], params_[1]};
    case Family::kProduct: return {parts_[0].mode(), parts_[1].mode()};
    case Family::kMixture: {
      Point2 best_x = parts_[0].mode_2d();
      double best = log_pdf(best_x);
      for (const auto& part : parts_) {
        const Point2 m = part.mode_2d();
        if (log_pdf(m) > best) best = log_pdf(m), best_x = m;
      }
      return best_x;
    }
    default: return {mode(), 0.0};
  }
}

double AnalyticDensity::mean() const {
  const auto& p = params_;
  switch (family_) {
    case Family::kNormal:
    case Family::kLaplace:
    case Family::kLogistic:
      return p[0];
    case Family::kGumbel: return p[0] + kEulerGamma * p[1];
    case Family::kGamma: return p[0] * p[1];
    case Family::kBeta: return p[0] / (p[0] + p[1]);
    case Family::kUniform: return 0.5 * (p[0] + p[1]);
    case Family::kStudentT: return p[1];
    case Family::kMixture: {
      double m = 0.0;
      for (std::size_t k = 0; k < parts_.size(); ++k) m += weights_[k] * parts_[k].mean();
      return m;
    }
    default: break;
  }
  throw Error(ErrorCode::kInvalidInput, "scalar mean of a bivariate density");
}

std::vector<double> AnalyticDensity::breakpoints() const {
  std::vector<double> out;
  switch (family_) {
    case Family::kLaplace: out = {params_[0]}; break;
    case Family::kGamma: out = {0.0}; break;
    case Family::kBeta: out = {0.0, 1.0}; break;
    case Family::kUniform: out = {params_[0], params_[1]}; break;
    case Family::kMixture:
      for (const auto& part : parts_) {
        if (part.dim() != 1) break;
        const auto b = part.breakpoints();
        out.insert(out.end(), b.begin(), b.end());
      }
      break;
    default: break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<bool> AnalyticDensity::log_concave_by_family() const {
  const auto& p = params_;
  switch (family_) {
    case Family::kNormal:
    case Family::kLaplace:
    case Family::kLogistic:
    case Family::kGumbel:
    case Family::kUniform:
    case Family::kNormal2:
      return true;
    case Family::kGamma: return p[0] >= 1.0;
    case Family::kBeta: return p[0] >= 1.0 && p[1] >= 1.0;
    case Family::kStudentT: return false;
    case Family::kProduct: {
      const auto a = parts_[0].log_concave_by_family(), b = parts_[1].log_concave_by_family();
      if (a && b) return *a && *b;
      return std::nullopt;
    }
    case Family::kMixture:
      if (parts_.size() == 1) return parts_[0].log_concave_by_family();
      return std::nullopt;
  }
  return std::nullopt;
}

bool AnalyticDensity::continuous() const {
  const auto& p = params_;
  switch (family_) {
    case Family::kGamma: return p[0] > 1.0;
    case Family::kBeta: return p[0] > 1.0 && p[1] > 1.0;
    case Family::kUniform: return false;
    case Family::kMixture:
    case Family::kProduct:
      return std::all_of(parts_.begin(), parts_.end(), [](const auto& d) { return d.continuous(); });
    default: return true;
  }
}

std::string AnalyticDensity::describe() const {
  std::ostringstream os;
  os << family_name(family_);
  if (family_ == Family::kMixture || family_ == Family::kProduct) {
    os << "(";
    for (std::size_t k = 0; k < parts_.size(); ++k) {
      if (k) os << ", ";
      if (family_ == Family::kMixture) os << weights_[k] << "*";
      os << parts_[k].describe();
    }
    os << ")";
    return os.str();
  }
  os << "(";
  for (std::size_t k = 0; k < params_.size(); ++k) os << (k ? ", " : "") << params_[k];
  os << ")";
  return os.str();
}

}  // namespace logcave
