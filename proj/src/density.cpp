#include "logcave/density.hpp"

#include <algorithm>
#include <cmath>

#include "logcave/error.hpp"
#include "logcave/integrate.hpp"

namespace logcave {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double tent_mass_in(const TentFunction& t, double lo, double hi) {
  const auto& x = t.knots_1d();
  const auto& y = t.values();
  double mass = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double a = std::max(lo, x[k]), b = std::min(hi, x[k + 1]);
    if (!(b > a)) continue;
    const double len = x[k + 1] - x[k];
    const double ya = y[k] + (y[k + 1] - y[k]) * (a - x[k]) / len;
    const double yb = y[k] + (y[k + 1] - y[k]) * (b - x[k]) / len;
    mass += integrate_exp_segment(ya, yb, b - a);
  }
  return mass;
}

}  // namespace

int density_dim(const DensityLike& f) {
  return std::visit([](const auto& d) { return d.dim(); }, f);
}

double density_log_pdf(const DensityLike& f, double x) {
  return std::visit(Overloaded{[&](const TentFunction& t) { return t.eval_log(x); },
                               [&](const AnalyticDensity& a) { return a.log_pdf(x); }},
                    f);
}

double density_log_pdf(const DensityLike& f, const Point2& x) {
  return std::visit(Overloaded{[&](const TentFunction& t) { return t.eval_log(x); },
                               [&](const AnalyticDensity& a) { return a.log_pdf(x); }},
                    f);
}

double density_pdf(const DensityLike& f, double x) { return std::exp(density_log_pdf(f, x)); }
double density_pdf(const DensityLike& f, const Point2& x) {
  return std::exp(density_log_pdf(f, x));
}

Interval density_support(const DensityLike& f) {
  return std::visit(Overloaded{[](const TentFunction& t) { return Interval{t.lower(), t.upper()}; },
                               [](const AnalyticDensity& a) { return a.support(); }},
                    f);
}

double density_mass_in(const DensityLike& f, double lo, double hi) {
  return std::visit(
      Overloaded{[&](const TentFunction& t) { return tent_mass_in(t, lo, hi); },
                 [&](const AnalyticDensity& a) { return a.cdf(hi) - a.cdf(lo); }},
      f);
}

std::vector<double> density_breakpoints(const DensityLike& f) {
  return std::visit(Overloaded{[](const TentFunction& t) { return t.knots_1d(); },
                               [](const AnalyticDensity& a) { return a.breakpoints(); }},
                    f);
}

double density_total_mass(const DensityLike& f) {
  return std::visit(Overloaded{[](const TentFunction& t) { return t.total_mass(); },
                               [](const AnalyticDensity&) { return 1.0; }},
                    f);
}

bool density_continuous(const DensityLike& f) {
  return std::visit(
      Overloaded{[](const TentFunction& t) {
                   // A tent jumps to zero at its hull; treat it as continuous
                   // when that jump is negligible next to its peak.
                   const double peak = t.max_density().density;
                   if (t.dim() == 1) {
                     return std::max(t.eval(t.lower()), t.eval(t.upper())) <= 1e-6 * peak;
                   }
                   return false;
                 },
                 [](const AnalyticDensity& a) { return a.continuous(); }},
      f);
}

}  // namespace logcave
