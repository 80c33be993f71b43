// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Exit status is 0 when every failure is listed in kKnownUnattainable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "logcave/experiments.hpp"
#include "logcave/metrics.hpp"
#include "logcave/mle.hpp"
#include "logcave/projection.hpp"
#include "logcave/sampling.hpp"

using namespace logcave;
using AD = AnalyticDensity;

namespace {

// Pilot for the bound check: f0 = N(0,1), S = [-1,1], n_grid (100,400,1600),
// 20 replications, seed 0. The acceptance run itself uses seed 1.
constexpr double kPilotSupFhat = 0.62332574467461088;
constexpr double kPilotInfOnS = 0.1897139893827864;

// Criterion 6, KL clause: every fit vanishes outside the sample hull, so
// d_KL(f0, fhat_n) = +inf for an f0 with full support.
const std::set<std::string> kKnownUnattainable{"6c"};

struct Outcome {
  std::string id;
  bool pass;
};
std::vector<Outcome> outcomes;

void report(const std::string& id, bool pass, const std::string& what) {
  outcomes.push_back({id, pass});
  std::printf("%s [%s] %s\n", pass ? "PASS" : "FAIL", id.c_str(), what.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Mass errors of every converged fit made here, by dimension.
double mass_err_1d = 0.0, mass_err_2d = 0.0;
std::size_t fits_1d = 0, fits_2d = 0;

TentFunction track(TentFunction t) {
  const double e = std::fabs(t.total_mass() - 1.0);
  if (t.dim() == 1) {
    mass_err_1d = std::max(mass_err_1d, e), ++fits_1d;
  } else {
    mass_err_2d = std::max(mass_err_2d, e), ++fits_2d;
  }
  return t;
}

std::vector<double> values_at_sample(const TentFunction& t, const Sample& s) {
  std::vector<double> y(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) y[i] = s.dim() == 1 ? t.eval_log(s.x(i)) : t.eval_log(s.point(i));
  return y;
}

double hull_sup(const TentFunction& f, const std::function<double(double)>& g, bool open) {
  double sup = 0.0;
  const int m = 20000;
  for (int i = open ? 1 : 0; i <= (open ? m - 1 : m); ++i) {
    const double x = f.lower() + (f.upper() - f.lower()) * i / m;
    sup = std::max(sup, std::fabs(f.eval(x) - g(x)));
  }
  return sup;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + fmt("%.6g", x);
  return "(" + s + ")";
}

AD bimodal() { return AD::mixture({0.5, 0.5}, {AD::normal(-2, 1), AD::normal(2, 1)}); }

const std::vector<AD>& catalog_1d() {
  static const std::vector<AD> c{AD::normal(0, 1),  AD::laplace(1, 2),   AD::gamma(2, 1),      AD::beta(2, 3),
                                 AD::logistic(0, 1), AD::gumbel(0, 1),   AD::uniform(-1, 2),   AD::student_t(3),
                                 AD::gamma(0.5, 1),  AD::beta(0.5, 0.5), bimodal()};
  return c;
}

void criterion_1() {
  Timer t;
  double worst_obj = 0.0, worst_sup = 0.0;
  bool order_ok = true;
  for (int k = 0; k < 25; ++k) {
    const int n = 3 + k % 8;
    const auto& f0 = catalog_1d()[k % catalog_1d().size()];
    const auto s = draw(f0, n, {101, static_cast<std::uint64_t>(k)});
    const auto fit = track(fit_mle_1d(s));
    const auto orc = grid_oracle_fit(s, 4000);
    const double lf = objective(s, values_at_sample(fit, s)), lo = objective(s, values_at_sample(orc, s));
    order_ok = order_ok && lo <= lf + 1e-6;
    worst_obj = std::max(worst_obj, std::fabs(lf - lo));
    worst_sup = std::max(worst_sup, hull_sup(fit, [&](double x) { return orc.eval(x); }, false));
  }
  const double secs = t.seconds();
  report("1", worst_obj <= 1e-4 && worst_sup <= 2.0 / 4000 + 1e-3 && secs <= 120,
         fmt("oracle equivalence, 25 samples: max |dL| = %.3g (tol 1e-4), max sup = %.3g (tol %.4g), %.1f s (limit 120)",
             worst_obj, worst_sup, 2.0 / 4000 + 1e-3, secs));
}

void criterion_2() {
  Timer t;
  const auto s = Sample::make_1d({0.0, 1.0});
  const auto fit = track(fit_mle_1d(s));
  const auto orc = grid_oracle_fit(s, 4000);
  double dv = 0.0;
  for (double v : fit.values()) dv = std::max(dv, std::fabs(v));
  const double dorc = hull_sup(fit, [&](double x) { return orc.eval(x); }, false);
  const double secs = t.seconds();
  report("2", fit.lower() == 0.0 && fit.upper() == 1.0 && dv <= 1e-3 && dorc <= 1e-3 && secs <= 1.0,
         fmt("two-point fit: max |value| = %.3g (tol 1e-3), sup vs grid oracle = %.3g (tol 1e-3), %.2f s (limit 1)", dv,
             dorc, secs));
}

void criterion_3() {
  Timer t;
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-2, 2), v(-3, 0);
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const int n = 8 + inst;
    Sample s;
    if (inst < 5) {
      std::vector<double> xs(n);
      for (auto& x : xs) x = u(rng);
      s = Sample::make_1d(xs);
    } else {
      std::vector<Point2> ps(n);
      for (auto& p : ps) p = {u(rng), u(rng)};
      s = Sample::make_2d(ps);
    }
    for (int pt = 0; pt < 20; ++pt) {
      std::vector<double> y(n);
      for (auto& yi : y) yi = v(rng);
      const auto g = objective_subgradient(s, y);
      double num = 0.0, den = 0.0;
      const double h = 1e-6;
      for (int i = 0; i < n; ++i) {
        auto yp = y, ym = y;
        yp[i] += h, ym[i] -= h;
        const double fd = (objective(s, yp) - objective(s, ym)) / (2 * h);
        num = std::max(num, std::fabs(fd - g[i]));
        den = std::max(den, std::fabs(g[i]));
      }
      worst = std::max(worst, num / den);
    }
  }
  const double secs = t.seconds();
  report("3", worst <= 1e-5 && secs <= 10,
         fmt("gradient check, 10 instances x 20 points: max relative deviation = %.3g (tol 1e-5), %.2f s (limit 10)",
             worst, secs));
}

ExperimentConfig config_5(int workers) {
  ExperimentConfig c;
  c.f0 = AD::laplace(0, 1);
  c.n_grid = {50, 200, 800, 3200};
  c.replications = 20;
  c.seed = 1;
  c.weight_a = 0.5;
  c.metrics = {"weighted_tv"};
  c.workers = workers;
  return c;
}

ExperimentConfig config_6(int workers) {
  ExperimentConfig c;
  c.f0 = bimodal();
  c.n_grid = {100, 400, 1600};
  c.replications = 20;
  c.seed = 1;
  c.metrics = {"tv", "kl_divergence", "smoothed_log_ratio"};
  c.reference = Reference::kKlProjection;
  c.workers = workers;
  return c;
}

double flagged_share(const ExperimentReport& r) { return static_cast<double>(r.flagged()) / r.rows.size(); }

void note_mass(const ExperimentReport& r, std::size_t fits) {
  mass_err_1d = std::max(mass_err_1d, r.metadata["max_mass_error"].get<double>());
  fits_1d += fits;
}

ExperimentReport criterion_5() {
  Timer t;
  const auto c = config_5(1);
  const auto rep = run_consistency(c);
  note_mass(rep, c.n_grid.size() * c.replications);
  std::vector<double> med;
  for (int n : c.n_grid) med.push_back(rep.median(n, "weighted_tv"));
  const double secs = t.seconds();
  const bool rows_ok = rep.rows.size() == c.n_grid.size() * c.replications * c.metrics.size();
  report("5", rows_ok && strictly_decreasing(med) && med.back() < med.front() / 3 && flagged_share(rep) <= 0.02 &&
                  secs <= 300,
         fmt("Laplace consistency: weighted_tv(a=0.5) medians %s strictly decreasing, last/first = %.3f (tol < 1/3), "
             "flagged %zu, %.1f s (limit 300)",
             join(med).c_str(), med.back() / med.front(), rep.flagged(), secs));
  return rep;
}

ExperimentReport criterion_6() {
  Timer t;
  const auto c = config_6(1);
  const auto rep = run_consistency(c);
  note_mass(rep, c.n_grid.size() * c.replications);
  const auto star = project_kl(ProjectionProblem::make(c.f0));
  const DensityLike d0 = c.f0, ds = star;
  const double kl_star = kl_divergence(d0, ds, QuadratureSpec::covering(d0, ds));
  QuadratureSpec on_star = QuadratureSpec::covering(d0, ds);
  on_star.lo = star.lower(), on_star.hi = star.upper();
  const double kl_star_window = kl_divergence(d0, ds, on_star);
  std::vector<double> tv, kl, slr;
  for (int n : c.n_grid) {
    tv.push_back(rep.median(n, "tv"));
    kl.push_back(rep.median(n, "kl_divergence"));
    slr.push_back(rep.median(n, "smoothed_log_ratio"));
  }
  const double secs = t.seconds();
  report("6a", strictly_decreasing(tv) && flagged_share(rep) <= 0.02 && secs <= 360,
         fmt("misspecification: tv(fhat, f*) medians %s strictly decreasing, flagged %zu, %.1f s (limit 360)",
             join(tv).c_str(), rep.flagged(), secs));
  report("6b", kl_star > 0.01 && kl_star_window > 0.01,
         fmt("d_KL(f0, f*) = %.6g on the covering window, %.6g on the hull of f* (tol > 0.01)", kl_star,
             kl_star_window));
  const double excess_first = kl.front() - kl_star, excess_last = kl.back() - kl_star;
  report("6c", excess_last < excess_first,
         fmt("KL excess median at n=1600 = %g vs n=100 = %g (need strictly smaller); medians of d_KL(f0, fhat) %s. "
             "Diagnostic: smoothed log ratio (b=1e-3) medians %s",
             excess_last, excess_first, join(kl).c_str(), join(slr).c_str()));
  return rep;
}

void criterion_7() {
  Timer t;
  std::string detail;
  bool ok = true;
  for (const auto& f0 : {AD::laplace(0, 1), AD::normal(0, 1), AD::logistic(0, 1), AD::uniform(0, 1)}) {
    const auto p = ProjectionProblem::make(f0);
    const auto star = project_kl(p);
    const double sup = hull_sup(star, [&](double x) { return f0.pdf(x); }, true);
    ok = ok && sup <= 2.0 / p.grid_resolution + 1e-3;
    detail += fmt(" %s %.3g", f0.describe().c_str(), sup);
  }
  const double secs = t.seconds();
  report("7", ok && secs <= 120,
         fmt("projection fixed points, interior sup (tol %.4g):%s, %.1f s (limit 120)", 2.0 / 2000 + 1e-3,
             detail.c_str(), secs));
}

void criterion_8() {
  Timer t;
  const auto p = ProjectionProblem::make(bimodal());
  const auto a = project_kl(p, StartRule::kSmoothed);
  const auto b = project_kl(p, StartRule::kUniform);
  const double sup = hull_sup(a, [&](double x) { return b.eval(x); }, true);
  const auto c = geometric_mean_combine(a, b);
  const double gain = projection_objective(p, c) - std::max(projection_objective(p, a), projection_objective(p, b));
  const double secs = t.seconds();
  report("8", sup <= 10 * p.tolerance && gain <= 1e-8 && secs <= 120,
         fmt("uniqueness: interior sup between starts = %.3g (tol %.3g), G gain of the geometric mean = %.3g (tol 1e-8), "
             "%.1f s (limit 120)",
             sup, 10 * p.tolerance, gain, secs));
}

void criterion_9() {
  Timer t;
  std::vector<int> ns;
  for (int n = 1; n <= 256; n *= 2) ns.push_back(n);
  const auto rep = run_convergence_mode_check(SequenceKind::kShrinkingVarianceNormal, ns, 0.2);
  std::vector<double> wtv, wsup;
  for (int n : ns) {
    wtv.push_back(rep.median(n, "weighted_tv"));
    wsup.push_back(rep.median(n, "weighted_sup"));
  }
  const double secs = t.seconds();
  const bool ok = strictly_decreasing(wtv) && wtv.back() < wtv.front() / 10 && strictly_decreasing(wsup) &&
                  wsup.back() < wsup.front() / 10;
  report("9", ok && secs <= 30,
         fmt("shrinking-variance normal, a=0.2: weighted_tv %s, weighted_sup %s, last/first %.3g and %.3g (tol < 0.1), "
             "%.1f s (limit 30)",
             join(wtv).c_str(), join(wsup).c_str(), wtv.back() / wtv.front(), wsup.back() / wsup.front(), secs));
}

void criterion_10() {
  Timer t;
  ExperimentConfig c;
  c.f0 = AD::normal(0, 1);
  c.n_grid = {100, 400, 1600};
  c.replications = 20;
  c.seed = 1;
  c.metrics = {"sup_fhat", "inf_fhat_on_S"};
  const auto rep = run_bound_check(c, {{{-1, 0}, {1, 0}}});
  note_mass(rep, c.n_grid.size() * c.replications);
  double sup = 0.0, inf = INFINITY;
  for (int n : c.n_grid) {
    for (double v : rep.values(n, "sup_fhat")) sup = std::max(sup, v);
    for (double v : rep.values(n, "inf_fhat_on_S")) inf = std::min(inf, v);
  }
  const double secs = t.seconds();
  report("10", rep.flagged() == 0 && sup <= 1.25 * kPilotSupFhat && inf >= 0.75 * kPilotInfOnS && secs <= 240,
         fmt("bounds on S=[-1,1], seed 1: max sup_fhat = %.6g (tol <= %.6g), min inf_fhat_on_S = %.6g (tol >= %.6g), "
             "%.1f s (limit 240)",
             sup, 1.25 * kPilotSupFhat, inf, 0.75 * kPilotInfOnS, secs));
}

void criterion_11() {
  Timer t;
  auto cover = [](const DensityLike& f, const DensityLike& g) { return QuadratureSpec::covering(f, g); };
  const DensityLike u01 = AD::uniform(0, 1), u02 = AD::uniform(0, 2), u23 = AD::uniform(2, 3);
  const double tv = tv_distance(u01, u02, cover(u01, u02));
  const DensityLike n0 = AD::normal(0, 1), n1 = AD::normal(1, 1);
  const double kl = kl_divergence(n0, n1, cover(n0, n1));
  const double h = hellinger(u01, u23, cover(u01, u23));
  std::mt19937_64 rng(1111);
  std::uniform_int_distribution<std::size_t> pick(0, catalog_1d().size() - 1);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const DensityLike f = catalog_1d()[pick(rng)], g = catalog_1d()[pick(rng)];
    const auto q = cover(f, g);
    worst = std::max(worst, std::fabs(weighted_tv(f, g, {0.0}, q) - tv_distance(f, g, q)));
  }
  const double secs = t.seconds();
  report("11",
         std::fabs(tv - 1) <= 1e-6 && std::fabs(kl - 0.5) <= 1e-4 && std::fabs(h - std::sqrt(2.0)) <= 1e-6 &&
             worst <= 1e-9 && secs <= 30,
         fmt("metric identities: |tv - 1| = %.3g (tol 1e-6), |kl - 0.5| = %.3g (tol 1e-4), |hellinger - sqrt2| = %.3g "
             "(tol 1e-6), max |wtv(a=0) - tv| = %.3g (tol 1e-9), %.2f s (limit 30)",
             std::fabs(tv - 1), std::fabs(kl - 0.5), std::fabs(h - std::sqrt(2.0)), worst, secs));
}

void criterion_12() {
  Timer t;
  std::mt19937_64 rng(1212);
  std::uniform_real_distribution<double> u(0, 1), scale(0.2, 5);
  std::normal_distribution<double> g(0, 1);
  std::uniform_int_distribution<int> dy(-512, 512);
  double scale_rel = 0.0, shift_val = 0.0;
  bool shift_knots = true;
  for (int inst = 0; inst < 10; ++inst) {
    const double c = scale(rng);
    // Scale, 1D.
    {
      std::vector<double> xs(40 + inst);
      for (auto& x : xs) x = g(rng);
      const auto s = Sample::make_1d(xs);
      const auto f = track(fit_mle_1d(s)), fc = track(fit_mle_1d(s.affine(c, {0, 0})));
      for (int i = 0; i < 100; ++i) {
        const double x = f.lower() + (f.upper() - f.lower()) * u(rng);
        scale_rel = std::max(scale_rel, std::fabs(fc.eval(c * x) * c / f.eval(x) - 1));
      }
    }
    // Scale, 2D.
    {
      std::vector<Point2> ps(20 + inst);
      for (auto& p : ps) p = {g(rng), g(rng)};
      const auto s = Sample::make_2d(ps);
      const auto f = track(fit_mle_2d(s)), fc = track(fit_mle_2d(s.affine(c, {0, 0})));
      for (int tested = 0; tested < 100;) {
        const Point2 p{f.box_min()[0] + (f.box_max()[0] - f.box_min()[0]) * u(rng),
                       f.box_min()[1] + (f.box_max()[1] - f.box_min()[1]) * u(rng)};
        const double v = f.eval(p);
        if (v == 0.0) continue;
        ++tested;
        scale_rel = std::max(scale_rel, std::fabs(fc.eval(Point2{c * p[0], c * p[1]}) * c * c / v - 1));
      }
    }
    // Translation on dyadic data and shifts, so {X_i + t} is exact.
    const Point2 shift{dy(rng) / 64.0, dy(rng) / 64.0};
    {
      std::vector<double> xs(40 + inst);
      for (auto& x : xs) x = dy(rng) / 256.0;
      const auto s = Sample::make_1d(xs);
      const auto f = track(fit_mle_1d(s)), ft = track(fit_mle_1d(s.affine(1.0, shift)));
      shift_knots = shift_knots && f.size() == ft.size();
      for (std::size_t i = 0; shift_knots && i < f.size(); ++i) {
        shift_knots = ft.knots_1d()[i] - f.knots_1d()[i] == shift[0];
        shift_val = std::max(shift_val, std::fabs(ft.values()[i] - f.values()[i]));
      }
    }
    {
      std::vector<Point2> ps(20 + inst);
      for (auto& p : ps) p = {dy(rng) / 256.0, dy(rng) / 256.0};
      const auto s = Sample::make_2d(ps);
      const auto f = track(fit_mle_2d(s)), ft = track(fit_mle_2d(s.affine(1.0, shift)));
      shift_knots = shift_knots && f.size() == ft.size();
      for (std::size_t i = 0; shift_knots && i < f.size(); ++i) {
        const Point2 k = f.knots_2d()[i];
        shift_val = std::max(shift_val, std::fabs(ft.eval_log(Point2{k[0] + shift[0], k[1] + shift[1]}) - f.values()[i]));
      }
    }
  }
  const double secs = t.seconds();
  report("12", scale_rel <= 1e-6 && shift_knots && shift_val <= 1e-12 && secs <= 120,
         fmt("equivariance, 10 instances per dim: max scale relative error = %.3g (tol 1e-6), knots shifted exactly: %s, "
             "max value change under translation = %.3g (tol 1e-12), %.1f s (limit 120)",
             scale_rel, shift_knots ? "yes" : "no", shift_val, secs));
}

void criterion_4() {
  report("4", mass_err_1d <= 1e-6 && mass_err_2d <= 1e-4,
         fmt("normalisation over %zu 1D and %zu 2D fits: max |mass - 1| = %.3g (tol 1e-6) and %.3g (tol 1e-4)", fits_1d,
             fits_2d, mass_err_1d, mass_err_2d));
}

void criterion_13(const ExperimentReport& r5, const ExperimentReport& r6) {
  Timer t;
  const auto w5 = run_consistency(config_5(4));
  const auto w6 = run_consistency(config_6(4));
  const bool same5 = w5.csv() == r5.csv() && w5.summary().dump() == r5.summary().dump();
  const bool same6 = w6.csv() == r6.csv() && w6.summary().dump() == r6.summary().dump();
  report("13", same5 && same6,
         fmt("determinism, workers 1 vs 4: criterion 5 report %s, criterion 6 report %s (%.1f s)",
             same5 ? "identical" : "differs", same6 ? "identical" : "differs", t.seconds()));
}

}  // namespace

int main() {
  try {
    criterion_1();
    criterion_2();
    criterion_3();
    const auto r5 = criterion_5();
    const auto r6 = criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    criterion_13(r5, r6);
    criterion_4();
  } catch (const std::exception& e) {
    std::printf("FAIL [abort] %s\n", e.what());
    return 1;
  }
  int unexpected = 0, known = 0;
  for (const auto& o : outcomes) {
    if (o.pass) continue;
    if (kKnownUnattainable.count(o.id)) {
      ++known;
    } else {
      ++unexpected;
    }
  }
  std::printf("summary: %zu checks, %d unexpected failures, %d known-unattainable failures\n", outcomes.size(),
              unexpected, known);
  return unexpected == 0 ? 0 : 1;
}
