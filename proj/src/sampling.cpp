#include "logcave/sampling.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "logcave/error.hpp"
#include "logcave/philox.hpp"

namespace logcave {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// max of a concave g on [lo, hi].
template <class G>
double golden_max(G&& g, double lo, double hi) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double gc = g(c), gd = g(d);
  for (int it = 0; it < 200 && b - a > 1e-13 * (1.0 + std::fabs(a)); ++it) {
    if (gc >= gd) {
      b = d, d = c, gd = gc;
      c = b - r * (b - a), gc = g(c);
    } else {
      a = c, c = d, gc = gd;
      d = a + r * (b - a), gd = g(d);
    }
  }
  return std::max({gc, gd, g(lo), g(hi)});
}

bool closed_form_quantile(const AnalyticDensity& f) {
  switch (f.family()) {
    case Family::kUniform:
    case Family::kLaplace:
    case Family::kLogistic:
    case Family::kGumbel: return true;
    case Family::kGamma: return f.params()[0] == 1.0;
    default: return false;
  }
}

double inverse_cdf(const AnalyticDensity& f, double u) {
  const auto& p = f.params();
  switch (f.family()) {
    case Family::kUniform: return p[0] + (p[1] - p[0]) * u;
    case Family::kLaplace: return u < 0.5 ? p[0] + p[1] * std::log(2.0 * u) : p[0] - p[1] * std::log(2.0 * (1.0 - u));
    case Family::kLogistic: return p[0] + p[1] * std::log(u / (1.0 - u));
    case Family::kGumbel: return p[0] - p[1] * std::log(-std::log(u));
    case Family::kGamma:
      if (p[0] == 1.0) return -p[1] * std::log1p(-u);
      return f.quantile(u);
    default: return f.quantile(u);
  }
}

struct Drawer {
  PhiloxStream rng;
  RejectionStats stats;
  std::map<const AnalyticDensity*, RejectionEnvelope> envelopes;

  double one(const AnalyticDensity& f, const RejectionEnvelope* env) {
    if (f.family() == Family::kMixture) return one(pick(f), nullptr);
    if (closed_form_quantile(f) || !uses_rejection(f)) return inverse_cdf(f, rng.uniform());
    if (env == nullptr) {
      auto it = envelopes.find(&f);
      if (it == envelopes.end()) it = envelopes.emplace(&f, rejection_envelope(f)).first;
      env = &it->second;
    }
    const RejectionEnvelope& local = *env;
    for (;;) {
      ++stats.proposals;
      double x;
      if (local.a > 0.0) {
        const double e = -std::log(rng.uniform()) / local.a;
        x = rng.uniform() < 0.5 ? local.center - e : local.center + e;
      } else {
        x = local.lo + (local.hi - local.lo) * rng.uniform();
      }
      const double bound = local.b - local.a * std::fabs(x - local.center);
      if (std::log(rng.uniform()) <= f.log_pdf(x) - bound) {
        ++stats.accepted;
        return x;
      }
    }
  }

  const AnalyticDensity& pick(const AnalyticDensity& f) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t c = 0; c + 1 < f.parts().size(); ++c) {
      acc += f.weights()[c];
      if (u < acc) return f.parts()[c];
    }
    return f.parts().back();
  }

  Point2 two(const AnalyticDensity& f, const RejectionEnvelope& std_env) {
    switch (f.family()) {
      case Family::kMixture: return two(pick(f), std_env);
      case Family::kProduct: {
        const double x = one(f.parts()[0], nullptr);
        return {x, one(f.parts()[1], nullptr)};
      }
      case Family::kNormal2: {
        static const AnalyticDensity kStd = AnalyticDensity::normal(0.0, 1.0);
        const auto& p = f.params();
        const double l00 = std::sqrt(p[2]), l10 = p[4] / l00, l11 = std::sqrt(p[3] - l10 * l10);
        const double z0 = one(kStd, &std_env);
        const double z1 = one(kStd, &std_env);
        return {p[0] + l00 * z0, p[1] + l10 * z0 + l11 * z1};
      }
      default: throw Error(ErrorCode::kInvalidInput, "not a bivariate catalog density");
    }
  }
};

Sample draw_with(const AnalyticDensity& f0, std::size_t n, SeededStream s, RejectionStats* stats) {
  if (n < 1) throw Error(ErrorCode::kInvalidParams, "sample size n must be >= 1");
  Drawer d{PhiloxStream(s.seed, s.stream_id), {}, {}};
  Sample out;
  if (f0.dim() == 1) {
    std::vector<double> xs(n);
    std::optional<RejectionEnvelope> env;
    if (f0.family() != Family::kMixture && uses_rejection(f0)) env = rejection_envelope(f0);
    for (auto& x : xs) x = d.one(f0, env ? &*env : nullptr);
    out = Sample::make_1d(std::move(xs));
  } else {
    const RejectionEnvelope std_env = rejection_envelope(AnalyticDensity::normal(0.0, 1.0));
    std::vector<Point2> ps(n);
    for (auto& p : ps) p = d.two(f0, std_env);
    out = Sample::make_2d(ps);
  }
  if (stats) *stats = d.stats;
  return out;
}

}  // namespace

double RejectionEnvelope::mass() const { return a > 0.0 ? 2.0 * std::exp(b) / a : (hi - lo) * std::exp(b); }

bool uses_rejection(const AnalyticDensity& f) {
  const auto& p = f.params();
  switch (f.family()) {
    case Family::kNormal: return true;
    case Family::kGamma: return p[0] > 1.0;
    case Family::kBeta: return p[0] >= 1.0 && p[1] >= 1.0;
    default: return false;
  }
}

RejectionEnvelope rejection_envelope(const AnalyticDensity& f) {
  if (f.dim() != 1 || !uses_rejection(f)) {
    throw Error(ErrorCode::kInvalidInput, f.describe() + " is not sampled by rejection");
  }
  const Interval s = f.support();
  const double m = f.mode();
  const double peak = f.log_pdf(m);
  RejectionEnvelope env;
  env.center = m;
  if (std::isfinite(s.lo) && std::isfinite(s.hi)) {
    env.lo = s.lo, env.hi = s.hi;
    env.b = peak + 1e-12 * (1.0 + std::fabs(peak));
    return env;
  }
  // Chord slopes of log f from the mode; by concavity the log-density stays
  // below the chord extended past each anchor.
  const double d = 0.5 * (f.quantile(0.8413447460685429) - f.quantile(0.15865525393145707));
  double a = kInf;
  std::array<double, 2> reach{};
  for (int side : {-1, 1}) {
    const double room = side > 0 ? s.hi - m : m - s.lo;
    const double r = std::min(d, 0.5 * room);
    reach[side > 0] = r;
    if (!(r > 0.0)) continue;
    a = std::min(a, (peak - f.log_pdf(m + side * r)) / r);
  }
  if (!(a > 0.0) || !std::isfinite(a)) throw Error(ErrorCode::kInvalidParams, "no exponential envelope for " + f.describe());
  env.a = a;
  double b = peak;
  for (int side : {-1, 1}) {
    const double r = reach[side > 0];
    if (!(r > 0.0)) continue;
    b = std::max(b, golden_max([&](double t) { return f.log_pdf(m + side * t) + a * t; }, 0.0, r));
  }
  env.b = b + 1e-12 * (1.0 + std::fabs(b));
  return env;
}

Sample draw(const AnalyticDensity& f0, std::size_t n, SeededStream s) { return draw_with(f0, n, s, nullptr); }

RejectionStats rejection_stats(const AnalyticDensity& f0, std::size_t n, SeededStream s) {
  RejectionStats st;
  draw_with(f0, n, s, &st);
  return st;
}

bool is_log_concave(const AnalyticDensity& f0, const QuadratureSpec& scan) {
  constexpr double kSlack = 1e-8;
  if (f0.dim() == 1) {
    const Interval s = f0.support();
    const int m = scan.cells;
    std::vector<double> l(m + 1);
    std::vector<bool> ok(m + 1);
    for (int i = 0; i <= m; ++i) {
      const double x = scan.lo + (scan.hi - scan.lo) * i / m;
      l[i] = f0.log_pdf(x);
      ok[i] = x > s.lo && x < s.hi && std::isfinite(l[i]);
    }
    for (int i = 1; i < m; ++i) {
      if (ok[i - 1] && ok[i] && ok[i + 1] && l[i - 1] - 2.0 * l[i] + l[i + 1] > kSlack) return false;
    }
    return true;
  }
  const auto box = f0.support_box();
  const int m = scan.cells2;
  auto at = [&](int i, int j) {
    const Point2 x{scan.lo2[0] + (scan.hi2[0] - scan.lo2[0]) * i / m, scan.lo2[1] + (scan.hi2[1] - scan.lo2[1]) * j / m};
    if (!(x[0] > box[0].lo && x[0] < box[0].hi && x[1] > box[1].lo && x[1] < box[1].hi)) return kInf;
    const double v = f0.log_pdf(x);
    return std::isfinite(v) ? v : kInf;
  };
  std::vector<double> l((m + 1) * (m + 1));
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= m; ++j) l[i * (m + 1) + j] = at(i, j);
  }
  auto get = [&](int i, int j) { return l[i * (m + 1) + j]; };
  for (int i = 1; i < m; ++i) {
    for (int j = 1; j < m; ++j) {
      const double c = get(i, j);
      if (c == kInf) continue;
      for (const auto& [di, dj] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}, std::pair{1, -1}}) {
        const double u = get(i - di, j - dj), v = get(i + di, j + dj);
        if (u != kInf && v != kInf && u - 2.0 * c + v > kSlack) return false;
      }
    }
  }
  return true;
}

bool is_log_concave(const AnalyticDensity& f0) {
  QuadratureSpec q = QuadratureSpec::covering(f0, f0);
  q.cells = 20000;
  q.cells2 = 200;
  return is_log_concave(f0, q);
}

SequenceKind sequence_kind_from_name(const std::string& name) {
  if (name == "shrinking_variance_normal") return SequenceKind::kShrinkingVarianceNormal;
  if (name == "shifting_laplace") return SequenceKind::kShiftingLaplace;
  if (name == "narrowing_uniform") return SequenceKind::kNarrowingUniform;
  throw Error(ErrorCode::kUnknownKind, "unknown sequence kind '" + name + "'");
}

std::string sequence_kind_name(SequenceKind kind) {
  switch (kind) {
    case SequenceKind::kShrinkingVarianceNormal: return "shrinking_variance_normal";
    case SequenceKind::kShiftingLaplace: return "shifting_laplace";
    case SequenceKind::kNarrowingUniform: return "narrowing_uniform";
  }
  return "";
}

AnalyticDensity density_sequence(SequenceKind kind, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidParams, "sequence index n must be >= 1");
  const double h = 1.0 / n;
  switch (kind) {
    case SequenceKind::kShrinkingVarianceNormal: return AnalyticDensity::normal(0.0, std::sqrt(1.0 + h));
    case SequenceKind::kShiftingLaplace: return AnalyticDensity::laplace(h, 1.0);
    case SequenceKind::kNarrowingUniform: return AnalyticDensity::uniform(-1.0 - h, 1.0 + h);
  }
  throw Error(ErrorCode::kUnknownKind, "unknown sequence kind");
}

AnalyticDensity density_sequence(const std::string& kind, int n) {
  return density_sequence(sequence_kind_from_name(kind), n);
}

AnalyticDensity sequence_limit(SequenceKind kind) {
  switch (kind) {
    case SequenceKind::kShrinkingVarianceNormal: return AnalyticDensity::normal(0.0, 1.0);
    case SequenceKind::kShiftingLaplace: return AnalyticDensity::laplace(0.0, 1.0);
    case SequenceKind::kNarrowingUniform: return AnalyticDensity::uniform(-1.0, 1.0);
  }
  throw Error(ErrorCode::kUnknownKind, "unknown sequence kind");
}

}  // namespace logcave
