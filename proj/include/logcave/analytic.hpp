#pragma once

#include <optional>
#include <string>
#include <vector>

#include "logcave/geometry.hpp"

namespace logcave {

enum class Family {
  kNormal,
  kLaplace,
  kGamma,
  kBeta,
  kLogistic,
  kGumbel,
  kUniform,
  kStudentT,
  kMixture,
  kNormal2,  // bivariate normal
  kProduct,  // independent coordinates, one 1D family each
};

std::string family_name(Family family);
Family family_from_name(const std::string& name);

struct Interval {
  double lo;
  double hi;
  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// A catalog density f0 with exact pointwise evaluation. Univariate families
// also expose their CDF and quantile function; parameters are validated on
// construction (INVALID_PARAMS).
class AnalyticDensity {
 public:
  static AnalyticDensity normal(double mean, double sd);
  static AnalyticDensity laplace(double location, double scale);
  static AnalyticDensity gamma(double shape, double scale);
  static AnalyticDensity beta(double alpha, double beta);
  static AnalyticDensity logistic(double location, double scale);
  static AnalyticDensity gumbel(double location, double scale);
  static AnalyticDensity uniform(double lower, double upper);
  // Degrees of freedom must exceed 1 so that the first absolute moment is finite.
  static AnalyticDensity student_t(double df, double location = 0.0, double scale = 1.0);
  static AnalyticDensity mixture(std::vector<double> weights, std::vector<AnalyticDensity> parts);
  static AnalyticDensity normal2(Point2 mean, double var_x, double var_y, double cov_xy);
  static AnalyticDensity product(AnalyticDensity x, AnalyticDensity y);

  Family family() const { return family_; }
  int dim() const { return dim_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<AnalyticDensity>& parts() const { return parts_; }

  double log_pdf(double x) const;
  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;

  double log_pdf(const Point2& x) const;
  double pdf(const Point2& x) const;

  // Support E of a univariate density (possibly infinite ends).
  Interval support() const;
  // Support of each coordinate for bivariate densities.
  std::array<Interval, 2> support_box() const;

  double mode() const;
  Point2 mode_2d() const;
  double mean() const;

  // Points where a univariate pdf has a kink or jump.
  std::vector<double> breakpoints() const;

  // Log-concavity decided from the family and its parameters; empty for
  // mixtures, which need a numerical check.
  std::optional<bool> log_concave_by_family() const;
  bool continuous() const;

  std::string describe() const;

 private:
  Family family_ = Family::kNormal;
  int dim_ = 1;
  std::vector<double> params_;
  std::vector<double> weights_;
  std::vector<AnalyticDensity> parts_;
};

}  // namespace logcave
