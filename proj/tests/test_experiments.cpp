#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "logcave/cli.hpp"
#include "logcave/error.hpp"
#include "logcave/experiments.hpp"
#include "logcave/json_io.hpp"

using namespace logcave;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "logcave");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "logcave_test_experiments";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.f0 = AnalyticDensity::laplace(0, 1);
  c.n_grid = {20, 40};
  c.replications = 3;
  c.seed = 5;
  c.weight_a = 0.5;
  c.metrics = {"tv", "weighted_tv", "hellinger"};
  return c;
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

}  // namespace

TEST_CASE("config validation names the field") {
  auto c = small_config();
  c.replications = 0;
  try {
    c.validate();
    FAIL("expected INVALID_INPUT");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidInput);
    CHECK(std::string(e.what()).find("replications") != std::string::npos);
  }
  c = small_config();
  c.n_grid = {40, 20};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("n_grid"), Error);
  c.n_grid = {1, 20};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("n_grid"), Error);
  c = small_config();
  c.metrics = {"tv", "wasserstein"};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("metrics"), Error);
  c = small_config();
  c.f0 = AnalyticDensity::normal2({0, 0}, 1, 1, 0);
  c.reference = Reference::kKlProjection;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("reference"), Error);
}

TEST_CASE("config JSON round trip") {
  auto c = small_config();
  c.f0 = AnalyticDensity::mixture({0.25, 0.75}, {AnalyticDensity::normal(-2, 1), AnalyticDensity::gamma(2, 0.5)});
  c.weight_a = 0.1;
  c.reference = Reference::kKlProjection;
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.n_grid == c.n_grid);
  CHECK(back.weight_a == c.weight_a);
  CHECK(back.reference == Reference::kKlProjection);
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(Json{{"n_grid", {10}}}), doctest::Contains("f0"), Error);
}

TEST_CASE("tent and density JSON round trip") {
  const auto t1 = TentFunction::make_1d({-1.0 / 3, 0.1, 2.7}, {-1.1, -0.2 / 3, -2.9}).normalized();
  const auto r1 = tent_from_json(Json::parse(tent_to_json(t1).dump()));
  CHECK(r1.knots_1d() == t1.knots_1d());
  CHECK(r1.values() == t1.values());
  const auto t2 = TentFunction::make_2d({{0, 0}, {1, 0}, {0, 1}, {1.0 / 3, 1.0 / 7}}, {-1, -1.5, -0.7, -0.1},
                                        {{0, 1, 3}, {1, 2, 3}, {2, 0, 3}});
  const auto j2 = tent_to_json(t2);
  CHECK(j2["dim"] == 2);
  const auto r2 = tent_from_json(Json::parse(j2.dump()));
  CHECK(r2.values() == t2.values());
  CHECK(r2.knots_2d() == t2.knots_2d());
  CHECK(r2.triangles() == t2.triangles());
  for (const auto& f : {AnalyticDensity::normal(0.1, 0.3), AnalyticDensity::student_t(3.5, 1, 2),
                        AnalyticDensity::normal2({1, 2}, 1, 2, 0.3),
                        AnalyticDensity::product(AnalyticDensity::laplace(0, 1), AnalyticDensity::beta(2, 3)),
                        AnalyticDensity::mixture({0.5, 0.5}, {AnalyticDensity::normal(-2, 1), AnalyticDensity::normal(2, 1)})}) {
    const auto j = density_to_json(f);
    CHECK(density_to_json(density_from_json(Json::parse(j.dump()))) == j);
  }
  CHECK(code_of([] { density_from_json(Json{{"family", "cauchy"}, {"params", {0, 1}}}); }) == ErrorCode::kInvalidInput);
}

TEST_CASE("run_consistency row accounting and determinism") {
  const auto c = small_config();
  const auto rep = run_consistency(c);
  CHECK(rep.rows.size() == c.n_grid.size() * c.replications * c.metrics.size());
  CHECK(rep.flagged() == 0);
  for (const auto& r : rep.rows) {
    CHECK(r.flag == "ok");
    CHECK(r.value >= 0.0);
  }
  CHECK(rep.metadata["envelope"]["a0"].get<double>() > c.weight_a);
  CHECK(rep.metadata["max_mass_error"].get<double>() <= 1e-6);
  auto c4 = c;
  c4.workers = 4;
  CHECK(run_consistency(c4).csv() == rep.csv());
  CHECK(rep.csv().rfind("n,replication,metric,value,flag\n", 0) == 0);

  auto one = c;
  one.n_grid = {50};
  one.replications = 1;
  const auto a = run_consistency(one), b = run_consistency(one);
  CHECK(a.rows.size() == one.metrics.size());
  CHECK(a.csv() == b.csv());
}

TEST_CASE("weighted metrics are gated by the envelope rate") {
  auto c = small_config();
  c.f0 = AnalyticDensity::laplace(0, 1);  // a0 = 1
  c.weight_a = 1.5;
  c.n_grid = {20};
  c.replications = 2;
  c.metrics = {"tv", "weighted_tv", "weighted_sup"};
  const auto rep = run_consistency(c);
  CHECK(rep.rows.size() == 6);
  CHECK(rep.flagged() == 0);
  for (const auto& r : rep.rows) {
    if (r.metric == "tv") {
      CHECK(r.flag == "ok");
    } else {
      CHECK(r.flag == "NOTE_A_NOT_BELOW_A0");
    }
  }
  c.f0 = AnalyticDensity::uniform(-1, 1);
  c.weight_a = 0.2;
  for (const auto& r : run_consistency(c).rows) {
    if (r.metric == "weighted_sup") CHECK(r.flag == "NOTE_DISCONTINUOUS_LIMIT");
  }
}

TEST_CASE("misspecified f0 falls back to a projected reference") {
  auto c = small_config();
  c.f0 = AnalyticDensity::mixture({0.5, 0.5}, {AnalyticDensity::normal(-2, 1), AnalyticDensity::normal(2, 1)});
  const auto ref = resolve_reference(c);
  CHECK(ref.label.find("kl_projection") != std::string::npos);
  CHECK(std::holds_alternative<TentFunction>(ref.density));
  auto c2 = c;
  c2.f0 = AnalyticDensity::product(AnalyticDensity::student_t(3), AnalyticDensity::normal(0, 1));
  c2.n_grid = {3};
  CHECK(resolve_reference(c2).label.find("large_n_mle") != std::string::npos);
}

TEST_CASE("run_convergence_mode_check") {
  const auto rep = run_convergence_mode_check(SequenceKind::kShrinkingVarianceNormal, {1, 4, 16, 64}, 0.2);
  CHECK(rep.rows.size() == 8);
  double prev = INFINITY;
  for (int n : {1, 4, 16, 64}) {
    const double v = rep.median(n, "weighted_tv");
    CHECK(v < prev);
    prev = v;
  }
  const auto twice = run_convergence_mode_check(SequenceKind::kShiftingLaplace, {3, 3}, 0.5);
  REQUIRE(twice.rows.size() == 4);
  CHECK(twice.rows[0].value == twice.rows[2].value);
  CHECK(twice.rows[1].value == twice.rows[3].value);

  const auto u = run_convergence_mode_check(SequenceKind::kNarrowingUniform, {1, 2}, 0.3);
  for (const auto& r : u.rows) {
    if (r.metric == "weighted_sup") CHECK(r.flag == "NOTE_DISCONTINUOUS_LIMIT");
    if (r.metric == "weighted_tv") CHECK(r.flag == "ok");
  }
  CHECK(code_of([] { run_convergence_mode_check(SequenceKind::kShiftingLaplace, {1, 2}, 1.0); }) ==
        ErrorCode::kEnvelopeViolation);
}

TEST_CASE("run_bound_check") {
  ExperimentConfig c;
  c.f0 = AnalyticDensity::uniform(0, 1);
  c.n_grid = {400};
  c.replications = 5;
  c.metrics = {"tv"};
  const auto rep = run_bound_check(c, {{{0.25, 0}, {0.75, 0}}});
  CHECK(rep.rows.size() == 10);
  for (double v : rep.values(400, "inf_fhat_on_S")) CHECK(v >= 0.5);
  for (double v : rep.values(400, "sup_fhat")) CHECK(v >= 1.0);
  CHECK(code_of([&] { run_bound_check(c, {{{-10, 0}, {10, 0}}}); }) == ErrorCode::kSNotInterior);
  CHECK(code_of([&] { run_bound_check(c, {{{0.003, 0}, {0.5, 0}}}); }) == ErrorCode::kSNotInterior);
  c.f0 = AnalyticDensity::normal(0, 1);
  c.n_grid = {50};
  c.replications = 1;
  CHECK(run_bound_check(c, {{{-10, 0}, {10, 0}}}).rows.size() == 2);
}

TEST_CASE("cli fit, distance and envelope") {
  const auto csv = scratch("two.csv");
  write_file(csv, "x\n0\n1\n");
  const auto fit = run_cli({"fit", csv.string()});
  REQUIRE(fit.code == 0);
  const auto t = tent_from_json(Json::parse(fit.out));
  CHECK(t.lower() == 0.0);
  CHECK(t.upper() == 1.0);
  for (double v : t.values()) CHECK(std::fabs(v) <= 1e-3);

  const std::string lap = R"({"family":"laplace","params":[0,1]})";
  const auto d = run_cli({"distance", "--f", lap, "--g", lap, "--metric", "tv"});
  REQUIRE(d.code == 0);
  CHECK(Json::parse(d.out)["value"].get<double>() == 0.0);

  const auto e = run_cli({"envelope", "--density", lap});
  REQUIRE(e.code == 0);
  CHECK(Json::parse(e.out)["a"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));

  const auto s = run_cli({"sample", "--density", lap, "--n", "5", "--seed", "3"});
  REQUIRE(s.code == 0);
  CHECK(std::count(s.out.begin(), s.out.end(), '\n') == 6);
}

TEST_CASE("cli exit codes") {
  const auto cfg = scratch("bad.json");
  write_file(cfg, R"({"f0":{"family":"normal","params":[0,1]},"n_grid":[10],"replications":0,"metrics":["tv"]})");
  const auto r = run_cli({"experiment", "--config", cfg.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("replications") != std::string::npos);

  CHECK(run_cli({"fit", scratch("missing.csv").string()}).code == 1);
  CHECK(run_cli({"no-such-command"}).code == 1);

  const auto smp = scratch("normal.csv");
  REQUIRE(run_cli({"sample", "--density", R"({"family":"normal","params":[0,1]})", "--n", "60", "--output",
                   smp.string()}).code == 0);
  CHECK(run_cli({"fit", smp.string(), "--max-iterations", "1"}).code == 2);
  CHECK(run_cli({"fit", smp.string()}).code == 0);

  const auto ok = scratch("ok.json");
  const auto report = scratch("ok.csv");
  write_file(ok, R"({"f0":{"family":"laplace","params":[0,1]},"n_grid":[20],"replications":2,"metrics":["tv"]})");
  REQUIRE(run_cli({"experiment", "--config", ok.string(), "--output", report.string(), "--workers", "2"}).code == 0);
  CHECK(fs::exists(report));
  CHECK(fs::exists(report.string() + ".summary.json"));
  const auto cv = run_cli({"check-convergence", "--kind", "narrowing_uniform", "--n-list", "1,2", "--a", "0.2"});
  CHECK(cv.code == 0);
  CHECK(cv.out.find("NOTE_DISCONTINUOUS_LIMIT") != std::string::npos);
  CHECK(run_cli({"check-convergence", "--kind", "narrowing_uniform", "--n-list", "1,2", "--a", "2000"}).code == 1);
}
