#include <doctest.h>

#include <cmath>
#include <numeric>

#include "logcave/error.hpp"
#include "logcave/philox.hpp"
#include "logcave/sampling.hpp"
#include "oracles.hpp"

using namespace logcave;
using AD = AnalyticDensity;

namespace {

std::vector<double> column(const Sample& s, int c) {
  std::vector<double> out(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) out[i] = s.point(i)[c];
  return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("philox known-answer vectors") {
  using W = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("draw is deterministic per stream") {
  const auto u = AD::uniform(0, 1);
  const auto a = draw(u, 1, {7, 0});
  CHECK(a.n() == 1);
  CHECK(a.x(0) > 0.0);
  CHECK(a.x(0) < 1.0);
  CHECK(draw(u, 1, {7, 0}).coords() == a.coords());
  for (const auto& f : {AD::normal(0, 1), AD::gamma(2.5, 1), AD::student_t(4),
                        AD::mixture({0.4, 0.6}, {AD::normal(-1, 1), AD::laplace(2, 1)}), AD::normal2({0, 0}, 1, 2, 0.5)}) {
    const auto s1 = draw(f, 500, {11, 3});
    CHECK(draw(f, 500, {11, 3}).coords() == s1.coords());
    CHECK(draw(f, 500, {11, 4}).coords() != s1.coords());
    CHECK(draw(f, 500, {12, 3}).coords() != s1.coords());
    // Shorter draws are prefixes of longer ones.
    const auto s2 = draw(f, 200, {11, 3});
    CHECK(std::equal(s2.coords().begin(), s2.coords().end(), s1.coords().begin()));
  }
  CHECK_THROWS_AS(draw(u, 0, {0, 0}), Error);
}

TEST_CASE("normal moments") {
  const std::size_t n = 100000;
  const auto xs = draw(AD::normal(0, 1), n, {1, 0}).coords();
  CHECK(std::fabs(mean(xs)) <= 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(variance(xs) - 1.0) <= 0.05);
}

TEST_CASE("mixture component balance") {
  const std::size_t n = 100000;
  const auto xs = draw(AD::mixture({0.5, 0.5}, {AD::normal(-2, 1), AD::normal(2, 1)}), n, {1, 0}).coords();
  // P(X < 0) = 1/2 by symmetry.
  const double frac = static_cast<double>(std::count_if(xs.begin(), xs.end(), [](double x) { return x < 0; })) / n;
  CHECK(std::fabs(frac - 0.5) <= 4.0 / std::sqrt(static_cast<double>(n)) * 0.5);
}

TEST_CASE("Kolmogorov-Smirnov per family") {
  const std::vector<AD> fams{AD::normal(1, 2),       AD::laplace(-1, 0.5),  AD::gamma(3, 2),     AD::gamma(1, 1.5),
                             AD::gamma(0.5, 1),      AD::beta(2, 5),        AD::beta(0.5, 0.5),  AD::beta(1, 1),
                             AD::logistic(0, 2),     AD::gumbel(1, 0.5),    AD::uniform(-2, 3),  AD::student_t(3, 1, 2),
                             AD::mixture({0.3, 0.7}, {AD::normal(-2, 1), AD::gamma(2, 1)})};
  const std::size_t n = 100000;
  for (std::size_t k = 0; k < fams.size(); ++k) {
    const auto& f = fams[k];
    CAPTURE(f.describe());
    const auto xs = draw(f, n, {2024, k}).coords();
    const double d = oracle::ks_statistic(xs, [&](double x) { return f.cdf(x); });
    CHECK(oracle::ks_pvalue(d, n) >= 1e-4);
  }
  SUBCASE("bivariate") {
    const auto f = AD::normal2({1, -1}, 2, 0.5, 0.6);
    const auto s = draw(f, n, {2024, 99});
    const auto x = column(s, 0), y = column(s, 1);
    const auto mx = AD::normal(1, std::sqrt(2.0)), my = AD::normal(-1, std::sqrt(0.5));
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(x, [&](double v) { return mx.cdf(v); }), n) >= 1e-4);
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(y, [&](double v) { return my.cdf(v); }), n) >= 1e-4);
    double cov = 0.0;
    const double ax = mean(x), ay = mean(y);
    for (std::size_t i = 0; i < n; ++i) cov += (x[i] - ax) * (y[i] - ay);
    CHECK(std::fabs(cov / (n - 1) - 0.6) <= 0.02);
    const auto p = AD::product(AD::laplace(0, 1), AD::gamma(2, 1));
    const auto sp = draw(p, n, {2024, 100});
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(column(sp, 0), [&](double v) { return AD::laplace(0, 1).cdf(v); }), n) >= 1e-4);
    CHECK(oracle::ks_pvalue(oracle::ks_statistic(column(sp, 1), [&](double v) { return AD::gamma(2, 1).cdf(v); }), n) >= 1e-4);
  }
}

TEST_CASE("rejection acceptance ratio matches the envelope mass") {
  for (const auto& f : {AD::normal(0, 1), AD::normal(3, 0.2), AD::gamma(3, 1), AD::gamma(20, 0.5), AD::beta(2, 3),
                        AD::beta(1, 4)}) {
    CAPTURE(f.describe());
    REQUIRE(uses_rejection(f));
    const auto env = rejection_envelope(f);
    const double expected = 1.0 / env.mass();
    // Enough accepted draws for at least 10^5 proposals.
    const auto st = rejection_stats(f, static_cast<std::size_t>(1.1e5 * expected), {5, 0});
    CHECK(st.proposals >= 100000);
    const double ratio = static_cast<double>(st.accepted) / static_cast<double>(st.proposals);
    CHECK(std::fabs(ratio / expected - 1.0) <= 0.10);
    // The envelope dominates the density.
    for (int i = 0; i <= 2000; ++i) {
      const double x = f.quantile(1e-6) + (f.quantile(1 - 1e-6) - f.quantile(1e-6)) * i / 2000;
      const double bound = env.a > 0 ? -env.a * std::fabs(x - env.center) + env.b : env.b;
      CHECK(f.log_pdf(x) <= bound);
    }
  }
  CHECK_FALSE(uses_rejection(AD::laplace(0, 1)));
  CHECK_THROWS_AS(rejection_envelope(AD::uniform(0, 1)), Error);
}

TEST_CASE("is_log_concave") {
  CHECK(is_log_concave(AD::normal(0, 1)));
  CHECK(is_log_concave(AD::laplace(0, 1)));
  CHECK(is_log_concave(AD::gamma(2, 1)));
  CHECK(is_log_concave(AD::beta(2, 2)));
  CHECK(is_log_concave(AD::uniform(0, 1)));
  CHECK(is_log_concave(AD::normal2({0, 0}, 1, 2, 0.5)));
  CHECK_FALSE(is_log_concave(AD::mixture({0.5, 0.5}, {AD::normal(-2, 1), AD::normal(2, 1)})));
  CHECK_FALSE(is_log_concave(AD::student_t(3)));
  CHECK_FALSE(is_log_concave(AD::gamma(0.5, 1)));
  CHECK_FALSE(is_log_concave(AD::beta(0.5, 2)));
  // Second-difference oracle: log f of the bimodal mixture curves upward at 0.
  const auto mix = AD::mixture({0.5, 0.5}, {AD::normal(-2, 1), AD::normal(2, 1)});
  const double h = 1e-2;
  CHECK(mix.log_pdf(h) - 2 * mix.log_pdf(0) + mix.log_pdf(-h) > 0.0);
  // A narrow scan window that misses the convex region sees only concavity.
  QuadratureSpec scan;
  scan.lo = 4;
  scan.hi = 8;
  scan.cells = 400;
  CHECK(is_log_concave(mix, scan));
}

TEST_CASE("density sequences") {
  const auto n1 = density_sequence("shrinking_variance_normal", 1);
  CHECK(n1.family() == Family::kNormal);
  CHECK(n1.params()[0] == 0.0);
  CHECK(n1.params()[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(density_sequence(SequenceKind::kShiftingLaplace, 1000000).params()[0] == doctest::Approx(1e-6));
  const auto u = density_sequence(SequenceKind::kNarrowingUniform, 4);
  CHECK(u.params()[0] == -1.25);
  CHECK(u.params()[1] == 1.25);
  for (auto kind : {SequenceKind::kShrinkingVarianceNormal, SequenceKind::kShiftingLaplace, SequenceKind::kNarrowingUniform}) {
    CHECK(sequence_kind_from_name(sequence_kind_name(kind)) == kind);
    for (int n : {1, 2, 10, 1000}) CHECK(is_log_concave(density_sequence(kind, n)));
    CHECK(is_log_concave(sequence_limit(kind)));
  }
  try {
    density_sequence("growing_cauchy", 1);
    FAIL("expected UNKNOWN_KIND");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownKind);
  }
}

TEST_CASE("parameter validation") {
  for (double df : {1.0, 0.5}) {
    try {
      AD::student_t(df);
      FAIL("expected INVALID_PARAMS");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidParams);
    }
  }
  CHECK_THROWS_AS(AD::gamma(0, 1), Error);
  CHECK_THROWS_AS(AD::normal(0, -1), Error);
  CHECK_THROWS_AS(AD::uniform(1, 1), Error);
  CHECK_THROWS_AS(AD::mixture({0.5, 0.6}, {AD::normal(0, 1), AD::normal(1, 1)}), Error);
}
