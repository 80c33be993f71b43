#include "logcave/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <thread>

#include "logcave/error.hpp"
#include "logcave/metrics.hpp"
#include "logcave/projection.hpp"

namespace logcave {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSmoothing = 1e-3;
// Stream reserved for the large-n reference sample.
constexpr std::uint64_t kReferenceStream = 0xFFFFFFFFull;

const std::vector<std::string> kMetricNames{"tv",        "weighted_tv",        "weighted_sup", "hellinger",
                                            "kl_divergence", "smoothed_log_ratio", "sup_fhat",     "inf_fhat_on_S"};

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidInput, "field '" + field + "': " + why);
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(fmt17(v)); }

// Runs task(i) for i in [0, count) on `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  const int k = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (k == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < k; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Widens q (1D window / 2D box) to contain the support of a tent.
QuadratureSpec include_tent(QuadratureSpec q, const DensityLike& f) {
  const auto* t = std::get_if<TentFunction>(&f);
  if (t == nullptr) return q;
  if (t->dim() == 1) {
    q.lo = std::min(q.lo, t->lower());
    q.hi = std::max(q.hi, t->upper());
  } else {
    for (int k = 0; k < 2; ++k) {
      q.lo2[k] = std::min(q.lo2[k], t->box_min()[k]);
      q.hi2[k] = std::max(q.hi2[k], t->box_max()[k]);
    }
  }
  return q;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return kNaN;
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  if (!std::isfinite(v[lo]) || !std::isfinite(v[hi])) return v[h - lo < 0.5 ? lo : hi];
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Gate {
  bool weighted_ok = true;
  bool sup_ok = true;
};

// One metric of a fit against the reference.
double metric_value(const std::string& m, const TentFunction& fit, const ResolvedReference& ref,
                    const AnalyticDensity& f0, double a) {
  const DensityLike fh = fit;
  if (m == "tv") return tv_distance(fh, ref.density, QuadratureSpec::covering(fh, ref.density));
  if (m == "hellinger") return hellinger(fh, ref.density, QuadratureSpec::covering(fh, ref.density));
  if (m == "weighted_tv") return weighted_tv(fh, ref.density, {a}, QuadratureSpec::covering(fh, ref.density, a));
  if (m == "weighted_sup") return weighted_sup(fh, ref.density, {a}, QuadratureSpec::covering(fh, ref.density, a));
  if (m == "kl_divergence") {
    const DensityLike d0 = f0;
    return kl_divergence(d0, fh, QuadratureSpec::covering(d0, fh));
  }
  if (m == "smoothed_log_ratio") {
    const DensityLike d0 = f0;
    const QuadratureSpec q = include_tent(QuadratureSpec::covering(d0, ref.density), fh);
    return smoothed_log_ratio(ref.density, fh, f0, kSmoothing, q);
  }
  if (m == "sup_fhat") return fit.max_density().density;
  throw Error(ErrorCode::kInvalidInput, "metric '" + m + "' is not available here");
}

std::vector<ReportRow> failed_rows(int n, int r, const std::vector<std::string>& metrics, const std::string& flag) {
  std::vector<ReportRow> out;
  for (const auto& m : metrics) out.push_back({n, r, m, kNaN, flag});
  return out;
}

Json envelope_json(const ExpEnvelope& e) { return Json{{"a0", e.a}, {"b0", e.b}}; }

}  // namespace

std::string reference_name(Reference r) {
  switch (r) {
    case Reference::kF0Itself: return "f0_itself";
    case Reference::kKlProjection: return "kl_projection";
    case Reference::kLargeNMle: return "large_n_mle";
  }
  return "";
}

Reference reference_from_name(const std::string& name) {
  if (name == "f0_itself") return Reference::kF0Itself;
  if (name == "kl_projection") return Reference::kKlProjection;
  if (name == "large_n_mle") return Reference::kLargeNMle;
  bad("reference", "expected f0_itself, kl_projection or large_n_mle, got '" + name + "'");
}

bool is_metric_name(const std::string& name) {
  return std::find(kMetricNames.begin(), kMetricNames.end(), name) != kMetricNames.end();
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) bad("n_grid", "must list at least one sample size");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) bad("n_grid", "must be strictly increasing");
  }
  if (n_grid.front() < f0.dim() + 1) bad("n_grid", "sample sizes must be >= dim + 1");
  if (replications < 1) bad("replications", "must be >= 1");
  if (!(weight_a >= 0.0) || !std::isfinite(weight_a)) bad("weight_a", "must be a finite nonnegative number");
  if (metrics.empty()) bad("metrics", "must list at least one metric");
  for (const auto& m : metrics) {
    if (!is_metric_name(m)) bad("metrics", "unknown metric '" + m + "'");
  }
  if (reference == Reference::kKlProjection && f0.dim() != 1) bad("reference", "kl_projection needs a univariate f0");
  if (workers < 1) bad("workers", "must be >= 1");
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  if (!j.is_object()) bad("config", "expected a JSON object");
  ExperimentConfig c;
  auto get = [&](const char* key) -> const Json& {
    if (!j.contains(key)) bad(key, "missing");
    return j.at(key);
  };
  auto integer = [&](const char* key) {
    const Json& v = get(key);
    if (!v.is_number_integer()) bad(key, "expected an integer");
    return v.get<long long>();
  };
  c.f0 = density_from_json(get("f0"));
  const Json& ng = get("n_grid");
  if (!ng.is_array()) bad("n_grid", "expected an array of integers");
  for (const auto& v : ng) {
    if (!v.is_number_integer()) bad("n_grid", "expected an array of integers");
    c.n_grid.push_back(v.get<int>());
  }
  c.replications = static_cast<int>(integer("replications"));
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
      bad("seed", "expected a nonnegative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("weight_a")) {
    if (!j["weight_a"].is_number()) bad("weight_a", "expected a number");
    c.weight_a = j["weight_a"].get<double>();
  }
  const Json& ms = get("metrics");
  if (!ms.is_array()) bad("metrics", "expected an array of names");
  for (const auto& m : ms) {
    if (!m.is_string()) bad("metrics", "expected an array of names");
    c.metrics.push_back(m.get<std::string>());
  }
  if (j.contains("reference")) {
    if (!j["reference"].is_string()) bad("reference", "expected a string");
    c.reference = reference_from_name(j["reference"].get<std::string>());
  }
  if (j.contains("output_path")) {
    if (!j["output_path"].is_string()) bad("output_path", "expected a string");
    c.output_path = j["output_path"].get<std::string>();
  }
  if (j.contains("workers")) c.workers = static_cast<int>(integer("workers"));
  c.validate();
  return c;
}

Json ExperimentConfig::to_json() const {
  // Workers are left out so reports do not depend on scheduling.
  return Json{{"f0", density_to_json(f0)},
              {"n_grid", n_grid},
              {"replications", replications},
              {"seed", seed},
              {"weight_a", weight_a},
              {"metrics", metrics},
              {"reference", reference_name(reference)},
              {"output_path", output_path}};
}

std::size_t ExperimentReport::flagged() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const ReportRow& r) {
    return r.flag != "ok" && r.flag.rfind("NOTE", 0) != 0;
  }));
}

std::string ExperimentReport::csv() const {
  std::string out = "n,replication,metric,value,flag\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + std::to_string(r.replication) + "," + r.metric + "," + fmt17(r.value) + "," +
           r.flag + "\n";
  }
  return out;
}

std::vector<double> ExperimentReport::values(int n, const std::string& metric) const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.n == n && r.metric == metric && r.flag == "ok") v.push_back(r.value);
  }
  return v;
}

double ExperimentReport::median(int n, const std::string& metric) const {
  std::vector<double> v = values(n, metric);
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

Json ExperimentReport::summary() const {
  std::vector<int> ns;
  std::vector<std::string> ms;
  for (const auto& r : rows) {
    if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
    if (std::find(ms.begin(), ms.end(), r.metric) == ms.end()) ms.push_back(r.metric);
  }
  Json per = Json::array();
  for (int n : ns) {
    for (const auto& m : ms) {
      std::vector<double> v = values(n, m);
      std::sort(v.begin(), v.end());
      std::size_t notes = 0, failures = 0;
      for (const auto& r : rows) {
        if (r.n != n || r.metric != m || r.flag == "ok") continue;
        (r.flag.rfind("NOTE", 0) == 0 ? notes : failures) += 1;
      }
      Json e{{"n", n}, {"metric", m}, {"count", v.size()}, {"flagged", failures}, {"notes", notes}};
      e["median"] = json_number(quantile_sorted(v, 0.5));
      e["q1"] = json_number(quantile_sorted(v, 0.25));
      e["q3"] = json_number(quantile_sorted(v, 0.75));
      e["min"] = json_number(v.empty() ? kNaN : v.front());
      e["max"] = json_number(v.empty() ? kNaN : v.back());
      per.push_back(e);
    }
  }
  return Json{{"metadata", metadata}, {"summary", per}, {"rows", rows.size()}, {"flagged_rows", flagged()}};
}

EnvelopeResult gating_envelope(const DensityLike& f) {
  if (const auto* a = std::get_if<AnalyticDensity>(&f)) {
    double window = 1.0;
    if (a->dim() == 1) {
      const double m = a->mode();
      window = std::max({m - a->quantile(1e-6), a->quantile(1.0 - 1e-6) - m, 1e-3});
    } else {
      const QuadratureSpec q = QuadratureSpec::covering(f, f);
      window = std::max(std::hypot(q.hi2[0] - q.lo2[0], q.hi2[1] - q.lo2[1]) / 2.0, 1e-3);
    }
    return tail_envelope(f, window, 0.0);
  }
  return tail_envelope(f, 1.0, 0.0);
}

ResolvedReference resolve_reference(const ExperimentConfig& c) {
  ResolvedReference r{c.f0, "f0", {}, true};
  Reference kind = c.reference;
  if (kind == Reference::kF0Itself && !is_log_concave(c.f0)) {
    kind = c.f0.dim() == 1 ? Reference::kKlProjection : Reference::kLargeNMle;
  }
  switch (kind) {
    case Reference::kF0Itself: r.label = "f0 (log-concave)"; break;
    case Reference::kKlProjection:
      r.density = project_kl(ProjectionProblem::make(c.f0));
      r.label = "kl_projection (grid 2000)";
      break;
    case Reference::kLargeNMle: {
      const int n = 50 * c.n_grid.back();
      r.density = fit_mle(draw(c.f0, n, {c.seed, kReferenceStream}), c.fit);
      r.label = "large_n_mle proxy for f* (n = " + std::to_string(n) + ")";
      break;
    }
  }
  r.envelope = gating_envelope(r.density).envelope;
  r.continuous = density_continuous(r.density);
  return r;
}

ExperimentReport run_consistency(const ExperimentConfig& c) {
  c.validate();
  const ResolvedReference ref = resolve_reference(c);
  Gate gate;
  gate.weighted_ok = c.weight_a < ref.envelope.a;
  gate.sup_ok = gate.weighted_ok && ref.continuous;

  struct Task {
    int n;
    int r;
  };
  std::vector<Task> tasks;
  for (int n : c.n_grid) {
    for (int r = 0; r < c.replications; ++r) tasks.push_back({n, r});
  }
  std::vector<std::vector<ReportRow>> out(tasks.size());
  std::vector<double> mass_error(tasks.size(), 0.0);
  parallel_for(tasks.size(), c.workers, [&](std::size_t i) {
    const auto [n, r] = tasks[i];
    TentFunction fit;
    try {
      fit = fit_mle(draw(c.f0, static_cast<std::size_t>(n), {c.seed, static_cast<std::uint64_t>(r)}), c.fit);
    } catch (const Error& e) {
      out[i] = failed_rows(n, r, c.metrics, std::string(error_code_name(e.code())));
      return;
    }
    mass_error[i] = std::fabs(fit.total_mass() - 1.0);
    for (const auto& m : c.metrics) {
      const bool weighted = m == "weighted_tv" || m == "weighted_sup";
      if (weighted && !gate.weighted_ok) {
        out[i].push_back({n, r, m, kNaN, "NOTE_A_NOT_BELOW_A0"});
        continue;
      }
      if (m == "weighted_sup" && !gate.sup_ok) {
        out[i].push_back({n, r, m, kNaN, "NOTE_DISCONTINUOUS_LIMIT"});
        continue;
      }
      if (m == "inf_fhat_on_S") {
        out[i].push_back({n, r, m, kNaN, "NOTE_NEEDS_REGION"});
        continue;
      }
      try {
        out[i].push_back({n, r, m, metric_value(m, fit, ref, c.f0, c.weight_a), "ok"});
      } catch (const Error& e) {
        out[i].push_back({n, r, m, kNaN, std::string(error_code_name(e.code()))});
      }
    }
  });
  ExperimentReport rep;
  for (auto& v : out) rep.rows.insert(rep.rows.end(), v.begin(), v.end());
  rep.metadata = Json{{"version", kVersion},
                      {"experiment", "consistency"},
                      {"config", c.to_json()},
                      {"reference", ref.label},
                      {"envelope", envelope_json(ref.envelope)},
                      {"max_mass_error", *std::max_element(mass_error.begin(), mass_error.end())}};
  return rep;
}

ExperimentReport run_convergence_mode_check(SequenceKind kind, const std::vector<int>& n_list, double a,
                                            const std::vector<std::string>& metrics) {
  if (n_list.empty()) bad("n_list", "must list at least one index");
  for (std::size_t i = 1; i < n_list.size(); ++i) {
    if (n_list[i] < n_list[i - 1]) bad("n_list", "must be nondecreasing");
  }
  if (!(a >= 0.0)) bad("a", "must be nonnegative");
  for (const auto& m : metrics) {
    if (m != "weighted_tv" && m != "weighted_sup" && m != "tv" && m != "hellinger") {
      bad("metrics", "convergence checks support tv, weighted_tv, weighted_sup and hellinger, got '" + m + "'");
    }
  }
  const AnalyticDensity limit = sequence_limit(kind);
  const DensityLike lim = limit;
  const ExpEnvelope env = gating_envelope(lim).envelope;
  if (!(a < env.a)) {
    throw Error(ErrorCode::kEnvelopeViolation,
                "a = " + fmt17(a) + " is not below the limit's envelope rate a0 = " + fmt17(env.a));
  }
  ExperimentReport rep;
  for (int n : n_list) {
    const DensityLike fn = density_sequence(kind, n);
    const QuadratureSpec q = QuadratureSpec::covering(fn, lim, a);
    for (const auto& m : metrics) {
      if (m == "weighted_sup" && !limit.continuous()) {
        rep.rows.push_back({n, 0, m, kNaN, "NOTE_DISCONTINUOUS_LIMIT"});
        continue;
      }
      double v = 0.0;
      if (m == "weighted_tv") v = weighted_tv(fn, lim, {a}, q);
      if (m == "weighted_sup") v = weighted_sup(fn, lim, {a}, q);
      if (m == "tv") v = tv_distance(fn, lim, q);
      if (m == "hellinger") v = hellinger(fn, lim, q);
      rep.rows.push_back({n, 0, m, v, "ok"});
    }
  }
  rep.metadata = Json{{"version", kVersion},
                      {"experiment", "convergence_mode"},
                      {"kind", sequence_kind_name(kind)},
                      {"n_list", n_list},
                      {"a", a},
                      {"limit", density_to_json(limit)},
                      {"envelope", envelope_json(env)}};
  return rep;
}

ExperimentReport run_bound_check(const ExperimentConfig& config, const BoundRegion& s) {
  ExperimentConfig c = config;
  c.metrics = {"sup_fhat", "inf_fhat_on_S"};
  c.validate();
  const int dim = c.f0.dim();
  std::vector<Point2> v = s.vertices;
  if (dim == 1 && v.size() != 2) bad("S", "expected an interval [lo, hi]");
  if (dim == 2 && v.size() < 3) bad("S", "expected at least three polygon vertices");
  double diam = 0.0;
  for (const auto& p : v) {
    for (const auto& q : v) diam = std::max(diam, std::hypot(p[0] - q[0], p[1] - q[1]));
  }
  if (!(diam > 0.0)) bad("S", "region has zero diameter");
  const double delta = 0.01 * diam;
  if (dim == 1) {
    if (v[0][0] > v[1][0]) std::swap(v[0], v[1]);
    const Interval e = c.f0.support();
    if (!(v[0][0] - delta > e.lo && v[1][0] + delta < e.hi)) {
      throw Error(ErrorCode::kSNotInterior, "S grown by " + fmt17(delta) + " leaves the support interior (" +
                                                fmt17(e.lo) + ", " + fmt17(e.hi) + ")");
    }
  } else {
    const auto box = c.f0.support_box();
    for (const auto& p : v) {
      for (int k = 0; k < 2; ++k) {
        if (!(p[k] - delta > box[k].lo && p[k] + delta < box[k].hi)) {
          throw Error(ErrorCode::kSNotInterior, "S grown by " + fmt17(delta) + " leaves the support interior");
        }
      }
    }
  }
  // Scan points of conv S: a uniform grid (1D) or barycentric grids on a fan
  // of the polygon (2D).
  std::vector<Point2> scan;
  constexpr int kScan = 2000;
  if (dim == 1) {
    for (int i = 0; i <= kScan; ++i) scan.push_back({v[0][0] + (v[1][0] - v[0][0]) * i / kScan, 0.0});
  } else {
    constexpr int kTri = 60;
    for (std::size_t t = 1; t + 1 < v.size(); ++t) {
      for (int i = 0; i <= kTri; ++i) {
        for (int j = 0; i + j <= kTri; ++j) {
          const double l1 = static_cast<double>(i) / kTri, l2 = static_cast<double>(j) / kTri, l0 = 1.0 - l1 - l2;
          scan.push_back({l0 * v[0][0] + l1 * v[t][0] + l2 * v[t + 1][0], l0 * v[0][1] + l1 * v[t][1] + l2 * v[t + 1][1]});
        }
      }
    }
  }
  struct Task {
    int n;
    int r;
  };
  std::vector<Task> tasks;
  for (int n : c.n_grid) {
    for (int r = 0; r < c.replications; ++r) tasks.push_back({n, r});
  }
  std::vector<std::vector<ReportRow>> out(tasks.size());
  std::vector<double> mass_error(tasks.size(), 0.0);
  parallel_for(tasks.size(), c.workers, [&](std::size_t i) {
    const auto [n, r] = tasks[i];
    TentFunction fit;
    try {
      fit = fit_mle(draw(c.f0, static_cast<std::size_t>(n), {c.seed, static_cast<std::uint64_t>(r)}), c.fit);
    } catch (const Error& e) {
      out[i] = failed_rows(n, r, c.metrics, std::string(error_code_name(e.code())));
      return;
    }
    mass_error[i] = std::fabs(fit.total_mass() - 1.0);
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& p : scan) lowest = std::min(lowest, dim == 1 ? fit.eval(p[0]) : fit.eval(p));
    out[i] = {{n, r, "sup_fhat", fit.max_density().density, "ok"}, {n, r, "inf_fhat_on_S", lowest, "ok"}};
  });
  ExperimentReport rep;
  for (auto& o : out) rep.rows.insert(rep.rows.end(), o.begin(), o.end());
  Json region = Json::array();
  for (const auto& p : v) region.push_back(dim == 1 ? Json(p[0]) : Json{p[0], p[1]});
  rep.metadata = Json{{"version", kVersion},
                      {"experiment", "bound_check"},
                      {"config", c.to_json()},
                      {"S", region},
                      {"max_mass_error", *std::max_element(mass_error.begin(), mass_error.end())}};
  return rep;
}

}  // namespace logcave
