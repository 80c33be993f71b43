#pragma once

#include <variant>
#include <vector>

#include "logcave/analytic.hpp"
#include "logcave/tent.hpp"

namespace logcave {

// Anything the metrics can integrate: a fitted/projected tent or a catalog
// density.
using DensityLike = std::variant<TentFunction, AnalyticDensity>;

int density_dim(const DensityLike& f);
double density_log_pdf(const DensityLike& f, double x);
double density_log_pdf(const DensityLike& f, const Point2& x);
double density_pdf(const DensityLike& f, double x);
double density_pdf(const DensityLike& f, const Point2& x);

// Closed support interval of a univariate density (tents: their hull).
Interval density_support(const DensityLike& f);
// Mass of a univariate density inside [lo, hi].
double density_mass_in(const DensityLike& f, double lo, double hi);
// Points where a univariate density is not smooth (tent knots, kinks, jumps).
std::vector<double> density_breakpoints(const DensityLike& f);
// Total mass (1 for catalog densities).
double density_total_mass(const DensityLike& f);
bool density_continuous(const DensityLike& f);

}  // namespace logcave
