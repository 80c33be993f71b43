#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "logcave/error.hpp"
#include "logcave/metrics.hpp"
#include "logcave/mle.hpp"
#include "logcave/sampling.hpp"
#include "oracles.hpp"

using namespace logcave;

namespace {

using AD = AnalyticDensity;

QuadratureSpec cover(const DensityLike& f, const DensityLike& g, double a = 0.0) {
  return QuadratureSpec::covering(f, g, a);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kInvalidInput;
}

TentFunction fit_from(const AD& f0, std::size_t n, std::uint64_t seed) { return fit_mle_1d(draw(f0, n, {seed, 0})); }

// Light-tailed catalog densities (decay rate >= 0.5).
std::vector<AD> light_tailed() {
  return {AD::normal(0, 1),   AD::normal(1, 0.5), AD::laplace(0, 1),   AD::laplace(-0.5, 1.5), AD::logistic(0, 1),
          AD::gumbel(0, 1),   AD::gamma(3, 1),    AD::beta(2, 2),      AD::uniform(-1, 2),
          AD::mixture({0.3, 0.7}, {AD::normal(-1, 1), AD::laplace(1, 1)})};
}

}  // namespace

TEST_CASE("tv_distance examples") {
  const auto u01 = AD::uniform(0, 1), u12 = AD::uniform(1, 2), u02 = AD::uniform(0, 2);
  CHECK(tv_distance(u01, u01, cover(u01, u01)) == 0.0);
  CHECK(tv_distance(u01, u12, cover(u01, u12)) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(tv_distance(u01, u02, cover(u01, u02)) == doctest::Approx(1.0).epsilon(1e-9));
  const auto n0 = AD::normal(0, 1), n1 = AD::normal(1, 1);
  // 2 * (2 Phi(1/2) - 1) by Simpson on the density difference.
  const double orc = oracle::simpson([&](double x) { return std::fabs(n0.pdf(x) - n1.pdf(x)); }, -20, 0.5, 200000) +
                     oracle::simpson([&](double x) { return std::fabs(n0.pdf(x) - n1.pdf(x)); }, 0.5, 21, 200000);
  CHECK(std::fabs(tv_distance(n0, n1, cover(n0, n1)) - orc) <= 1e-6);
}

TEST_CASE("tv_distance with an unbounded density") {
  const auto b = AD::beta(0.5, 0.5), u = AD::uniform(0, 1), n = AD::normal(0, 1);
  // The arcsine density crosses 1 where x(1 - x) = 1/pi^2.
  const double x1 = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 / (std::numbers::pi * std::numbers::pi)));
  const double exact = 4.0 * (2.0 / std::numbers::pi * std::asin(std::sqrt(x1)) - x1);
  CHECK(std::fabs(tv_distance(b, u, cover(b, u)) - exact) <= 1e-6);
  // The arcsine density exceeds the normal one on all of (0, 1).
  const double exact_n = 2.0 - 2.0 * (n.cdf(1.0) - n.cdf(0.0));
  CHECK(std::fabs(tv_distance(b, n, cover(b, n)) - exact_n) <= 1e-6);
}

TEST_CASE("weighted_tv examples") {
  const auto f = AD::laplace(0, 1), g = AD::laplace(0, 2);
  CHECK(weighted_tv(f, f, {0.3}, cover(f, f, 0.3)) == 0.0);
  const auto q = cover(f, g);
  CHECK(std::fabs(weighted_tv(f, g, {0.0}, q) - tv_distance(f, g, q)) <= 1e-9);
  // Brute-force Simpson with 10^6 panels per side of the kink, on a window wide
  // enough that the weighted tail is below 1e-10.
  auto integrand = [&](double x) { return std::exp(0.3 * std::fabs(x)) * std::fabs(f.pdf(x) - g.pdf(x)); };
  const double orc = oracle::simpson(integrand, -130, 0, 1000000) + oracle::simpson(integrand, 0, 130, 1000000);
  const double v = weighted_tv(f, g, {0.3}, cover(f, g, 0.3));
  CHECK(std::fabs(v - orc) <= 1e-5);
  CHECK(v == doctest::Approx(1.6352081542).epsilon(1e-9));
}

TEST_CASE("weighted_sup examples") {
  const auto u01 = AD::uniform(0, 1), u02 = AD::uniform(0, 2);
  CHECK(weighted_sup(u01, u01, {0.2}, cover(u01, u01)) == 0.0);
  CHECK(weighted_sup(u01, u02, {0.0}, cover(u01, u02)) == doctest::Approx(0.5).epsilon(1e-12));
  const auto f0 = AD::normal(0, 1);
  const auto t1 = fit_from(f0, 400, 1), t2 = fit_from(f0, 400, 2);
  auto q = cover(t1, t2, 0.5);
  const double coarse = weighted_sup(t1, t2, {0.5}, q);
  q.cells *= 10;
  const double fine = weighted_sup(t1, t2, {0.5}, q);
  CHECK(fine >= coarse);
  CHECK(fine - coarse <= 1e-4);
}

TEST_CASE("hellinger examples") {
  const auto u01 = AD::uniform(0, 1), u12 = AD::uniform(1, 2);
  CHECK(hellinger(u01, u01, cover(u01, u01)) == 0.0);
  CHECK(hellinger(u01, u12, cover(u01, u12)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  const auto n0 = AD::normal(0, 1), n1 = AD::normal(1, 1);
  const double orc = std::sqrt(oracle::simpson(
      [&](double x) { return std::pow(std::sqrt(n0.pdf(x)) - std::sqrt(n1.pdf(x)), 2); }, -20, 21, 400000));
  const double closed = std::sqrt(2.0 * (1.0 - std::exp(-1.0 / 8.0)));
  CHECK(std::fabs(orc - closed) <= 1e-9);
  CHECK(std::fabs(hellinger(n0, n1, cover(n0, n1)) - orc) <= 1e-6);
}

TEST_CASE("kl_divergence examples") {
  const auto n0 = AD::normal(0, 1), n1 = AD::normal(1, 1);
  CHECK(std::fabs(kl_divergence(n0, n0, cover(n0, n0))) <= 1e-12);
  const double orc =
      oracle::simpson([&](double x) { return n0.pdf(x) * (n0.log_pdf(x) - n1.log_pdf(x)); }, -20, 20, 400000);
  CHECK(std::fabs(orc - 0.5) <= 1e-9);
  CHECK(std::fabs(kl_divergence(n0, n1, cover(n0, n1)) - orc) <= 1e-6);
  const auto u02 = AD::uniform(0, 2);
  const auto tent = TentFunction::make_1d({0, 1}, {0, 0});
  CHECK(kl_divergence(u02, tent, cover(u02, tent)) == INFINITY);
}

TEST_CASE("smoothed_log_ratio examples") {
  const auto f0 = AD::laplace(0, 1);
  const auto t = fit_from(f0, 200, 4);
  const auto q = cover(f0, t);
  CHECK(smoothed_log_ratio(t, t, f0, 1e-3, q) == 0.0);
  double sup = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    const double x = q.lo + (q.hi - q.lo) * i / 100000;
    sup = std::max(sup, std::fabs(f0.pdf(x) - t.eval(x)));
  }
  const double big = smoothed_log_ratio(f0, t, f0, 1e6, q);
  CHECK(std::fabs(big) <= 2 * sup / 1e6);
  CHECK(std::isfinite(smoothed_log_ratio(f0, TentFunction::make_1d({0, 1}, {0, 0}), f0, 1e-3, q)));
}

TEST_CASE("smoothed_log_ratio shrinks along a consistency run") {
  const auto f0 = AD::laplace(0, 1);
  std::vector<double> at50, at3200;
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto s = draw(f0, 3200, {1, r});
    const auto big = fit_mle_1d(s);
    const auto small = fit_mle_1d(Sample::make_1d({s.coords().begin(), s.coords().begin() + 50}));
    at50.push_back(smoothed_log_ratio(f0, small, f0, 1e-3, cover(f0, small)));
    at3200.push_back(smoothed_log_ratio(f0, big, f0, 1e-3, cover(f0, big)));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[9] + v[10]);
  };
  CHECK(median(at3200) <= median(at50));
}

TEST_CASE("symmetry") {
  const auto fams = light_tailed();
  const auto t = fit_from(AD::normal(0, 1), 300, 9);
  for (std::size_t i = 0; i + 1 < fams.size(); ++i) {
    const DensityLike f = fams[i];
    const DensityLike g = i % 2 ? DensityLike(t) : DensityLike(fams[i + 1]);
    const auto q = cover(f, g, 0.3);
    CHECK(std::fabs(tv_distance(f, g, q) - tv_distance(g, f, q)) <= 1e-12);
    CHECK(std::fabs(weighted_tv(f, g, {0.3}, q) - weighted_tv(g, f, {0.3}, q)) <= 1e-12);
    CHECK(std::fabs(weighted_sup(f, g, {0.3}, q) - weighted_sup(g, f, {0.3}, q)) <= 1e-12);
    CHECK(std::fabs(hellinger(f, g, q) - hellinger(g, f, q)) <= 1e-12);
  }
}

TEST_CASE("weighted_tv is nondecreasing in a") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> loc(-1, 1), sc(0.6, 1.4);
  for (int rep = 0; rep < 20; ++rep) {
    auto pick = [&](int k) {
      switch (k % 3) {
        case 0: return AD::normal(loc(rng), sc(rng));
        case 1: return AD::laplace(loc(rng), sc(rng));
        default: return AD::logistic(loc(rng), sc(rng));
      }
    };
    const auto f = pick(rep), g = pick(rep + 1);
    const auto q = cover(f, g, 0.3);
    double prev = -1.0;
    for (double a : {0.0, 0.1, 0.2, 0.3}) {
      const double v = weighted_tv(f, g, {a}, q);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("norm sandwich") {
  auto fams = light_tailed();
  fams.push_back(AD::student_t(3));
  fams.push_back(AD::beta(0.5, 0.5));
  for (std::size_t i = 0; i < fams.size(); ++i) {
    for (std::size_t j = i + 1; j < fams.size(); ++j) {
      const auto q = cover(fams[i], fams[j]);
      const double tv = tv_distance(fams[i], fams[j], q);
      const double h = hellinger(fams[i], fams[j], q);
      CHECK(h * h <= tv + 1e-9);
      if (i < 10 && j < 10) {
        const auto qa = cover(fams[i], fams[j], 0.2);
        CHECK(tv_distance(fams[i], fams[j], qa) <= weighted_tv(fams[i], fams[j], {0.2}, qa) + 1e-12);
      }
    }
  }
}

TEST_CASE("kl_divergence is nonnegative") {
  const auto fams = light_tailed();
  std::mt19937_64 rng(12);
  int count = 0;
  for (std::size_t i = 0; i < fams.size(); ++i) {
    for (std::size_t j = 0; j < fams.size() && count < 60; ++j, ++count) {
      CHECK(kl_divergence(fams[i], fams[j], cover(fams[i], fams[j])) >= -1e-8);
    }
  }
  for (int k = 0; k < 40; ++k) {
    const auto& f0 = fams[k % fams.size()];
    const auto t = fit_from(fams[(k * 7 + 3) % fams.size()], 100, 100 + k);
    CHECK(kl_divergence(f0, t, cover(f0, t)) >= -1e-8);
  }
}

TEST_CASE("2D metrics") {
  const auto f = AD::normal2({0, 0}, 1, 1, 0.3), g = AD::normal2({0.5, 0}, 1, 1, 0.3);
  const auto q = cover(f, g);
  // KL between bivariate normals: 0.5 * mu' Sigma^-1 mu.
  const double kl = 0.5 * 0.25 / (1 - 0.09);
  CHECK(kl_divergence(f, g, q) == doctest::Approx(kl).epsilon(1e-6));
  CHECK(std::fabs(tv_distance(f, g, q) - tv_distance(g, f, q)) <= 1e-12);
}

TEST_CASE("window errors") {
  const auto n0 = AD::normal(0, 1);
  QuadratureSpec narrow;
  narrow.lo = -1;
  narrow.hi = 1;
  CHECK(code_of([&] { tv_distance(n0, n0, narrow); }) == ErrorCode::kWindowTooSmall);
  const auto lap = AD::laplace(0, 1);
  CHECK(code_of([&] { weighted_tv(lap, n0, {1.5}, cover(lap, n0)); }) == ErrorCode::kDivergent);
  const auto t = TentFunction::make_1d({-3, 0, 3}, {-4, -0.5, -4}).normalized();
  QuadratureSpec inner;
  inner.lo = -2.9;
  inner.hi = 2.9;
  CHECK(code_of([&] { weighted_tv(t, t, {0.5}, inner); }) == ErrorCode::kWindowTooSmall);
}
