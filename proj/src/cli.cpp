#include "logcave/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "logcave/envelope.hpp"
#include "logcave/error.hpp"
#include "logcave/experiments.hpp"
#include "logcave/json_io.hpp"
#include "logcave/metrics.hpp"
#include "logcave/projection.hpp"

namespace logcave {
namespace {

// Inline JSON when the argument starts with '{', otherwise a file path.
Json json_arg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  if (first != std::string::npos && arg[first] == '{') {
    try {
      return Json::parse(arg);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::kInvalidInput, std::string("inline JSON does not parse: ") + e.what());
    }
  }
  return read_json_file(arg);
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_atomic(path, text);
  }
}

std::vector<int> int_list(const std::string& s, const std::string& field) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidInput, "field '" + field + "': '" + tok + "' is not an integer");
    }
  }
  return out;
}

int default_workers() {
  if (const char* env = std::getenv("LOGCAVE_WORKERS")) {
    const int k = std::atoi(env);
    if (k >= 1) return k;
  }
  return 1;
}

BoundRegion region_from_json(const Json& j) {
  BoundRegion r;
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::kInvalidInput, "field 'S': expected [lo, hi] or [[x, y], ...]");
  if (j[0].is_number()) {
    for (const auto& v : j) {
      if (!v.is_number()) throw Error(ErrorCode::kInvalidInput, "field 'S': expected [lo, hi]");
      r.vertices.push_back({v.get<double>(), 0.0});
    }
  } else {
    for (const auto& v : j) {
      if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::kInvalidInput, "field 'S': expected [x, y] vertices");
      r.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
    }
  }
  return r;
}

Json window_json(const QuadratureSpec& q, int dim) {
  if (dim == 1) return Json{q.lo, q.hi};
  return Json{{q.lo2[0], q.lo2[1]}, {q.hi2[0], q.hi2[1]}};
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Log-concave density estimation toolkit"};
  app.require_subcommand(1);
  std::string output;
  int workers = default_workers();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the log-concave MLE to a sample CSV; writes tent JSON");
  std::string fit_input;
  bool header = true;
  FitOptions fit_opts;
  fit->add_option("input", fit_input, "Sample CSV (one point per row)")->required();
  fit->add_flag("--header,!--no-header", header, "CSV has a header row (default on)");
  fit->add_option("--output,-o", output, "Output path (default stdout)");
  fit->add_option("--max-iterations", fit_opts.max_iterations, "Iteration budget");
  fit->add_option("--seed", fit_opts.seed, "Seed for 2D restarts");

  // sample
  auto* smp = app.add_subcommand("sample", "Draw a sample from a density spec; writes CSV");
  std::string density_arg;
  std::size_t n = 100;
  std::uint64_t seed = 0, stream = 0;
  smp->add_option("--density,-d", density_arg, "Density spec JSON (file or inline)")->required();
  smp->add_option("--n,-n", n, "Sample size")->required();
  smp->add_option("--seed", seed, "Seed");
  smp->add_option("--stream", stream, "Stream id");
  smp->add_flag("--header,!--no-header", header, "Write a header row (default on)");
  smp->add_option("--output,-o", output, "Output path (default stdout)");

  // project
  auto* prj = app.add_subcommand("project", "Log-concave KL projection of a univariate density; writes tent JSON");
  int grid = 2000;
  double tolerance = 1e-6;
  prj->add_option("--density,-d", density_arg, "Density spec JSON (file or inline)")->required();
  prj->add_option("--grid", grid, "Grid cells");
  prj->add_option("--tolerance", tolerance, "KKT tolerance");
  prj->add_option("--output,-o", output, "Output path (default stdout)");

  // distance
  auto* dst = app.add_subcommand("distance", "Distance between two densities or tents; writes metric JSON");
  std::string f_arg, g_arg, metric = "tv";
  double a = 0.0, b = 1e-3;
  std::string f0_arg;
  dst->add_option("--f", f_arg, "First density or tent JSON")->required();
  dst->add_option("--g", g_arg, "Second density or tent JSON")->required();
  dst->add_option("--metric,-m", metric, "tv | weighted_tv | weighted_sup | hellinger | kl | smoothed_log_ratio")
      ->check(CLI::IsMember({"tv", "weighted_tv", "weighted_sup", "hellinger", "kl", "smoothed_log_ratio"}));
  dst->add_option("--a", a, "Weight exponent");
  dst->add_option("--b", b, "Smoothing constant (smoothed_log_ratio)");
  dst->add_option("--f0", f0_arg, "True density (smoothed_log_ratio)");
  dst->add_option("--output,-o", output, "Output path (default stdout)");

  // envelope
  auto* env = app.add_subcommand("envelope", "Exponential tail envelope (a, b) of a density or tent");
  double window = 0.0, margin = 0.0;
  env->add_option("--density,-d", density_arg, "Density or tent JSON (file or inline)")->required();
  env->add_option("--window", window, "Scan window (default: reach of the 1e-6 quantiles)");
  env->add_option("--margin", margin, "Relative margin taken off the rate");
  env->add_option("--output,-o", output, "Output path (default stdout)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Consistency experiment; writes report CSV and summary JSON");
  std::string config_arg, summary_path;
  std::optional<std::uint64_t> seed_override;
  exp->add_option("--config,-c", config_arg, "Experiment config JSON")->required();
  exp->add_option("--output,-o", output, "Report CSV path (default: config output_path, else stdout)");
  exp->add_option("--summary", summary_path, "Summary JSON path (default: <output>.summary.json)");
  exp->add_option("--workers,-w", workers, "Worker threads (default LOGCAVE_WORKERS or 1)");
  exp->add_option("--seed", seed_override, "Override the config seed");

  // check-convergence
  auto* cvg = app.add_subcommand("check-convergence", "Weighted convergence along a density sequence");
  std::string kind, n_list = "1,2,4,8,16,32,64,128,256";
  std::vector<std::string> metrics{"weighted_tv", "weighted_sup"};
  cvg->add_option("--kind,-k", kind, "shrinking_variance_normal | shifting_laplace | narrowing_uniform")->required();
  cvg->add_option("--n-list", n_list, "Comma-separated sequence indices");
  cvg->add_option("--a", a, "Weight exponent")->required();
  cvg->add_option("--metrics", metrics, "Metrics to report")->delimiter(',');
  cvg->add_option("--output,-o", output, "Report CSV path (default stdout)");

  // check-bounds
  auto* bnd = app.add_subcommand("check-bounds", "Empirical upper and lower bounds of the fits on a region S");
  std::string region_arg;
  bnd->add_option("--config,-c", config_arg, "Experiment config JSON")->required();
  bnd->add_option("--S", region_arg, "Region: JSON [lo, hi] or [[x, y], ...] (default: config field S)");
  bnd->add_option("--output,-o", output, "Report CSV path (default stdout)");
  bnd->add_option("--summary", summary_path, "Summary JSON path (default: <output>.summary.json)");
  bnd->add_option("--workers,-w", workers, "Worker threads (default LOGCAVE_WORKERS or 1)");
  bnd->add_option("--seed", seed_override, "Override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit) {
      const Sample s = read_sample_csv_file(fit_input, header);
      emit(tent_to_json(fit_mle(s, fit_opts)).dump() + "\n", output, out);
    } else if (*smp) {
      std::ostringstream csv;
      write_sample_csv(csv, draw(density_from_json(json_arg(density_arg)), n, {seed, stream}), header);
      emit(csv.str(), output, out);
    } else if (*prj) {
      const auto problem = ProjectionProblem::make(density_from_json(json_arg(density_arg)), grid, tolerance);
      emit(tent_to_json(project_kl(problem)).dump() + "\n", output, out);
    } else if (*dst) {
      const DensityLike f = density_like_from_json(json_arg(f_arg));
      const DensityLike g = density_like_from_json(json_arg(g_arg));
      const int dim = density_dim(f);
      auto compute = [&](const QuadratureSpec& q) {
        if (metric == "tv") return tv_distance(f, g, q);
        if (metric == "weighted_tv") return weighted_tv(f, g, {a}, q);
        if (metric == "weighted_sup") return weighted_sup(f, g, {a}, q);
        if (metric == "hellinger") return hellinger(f, g, q);
        if (metric == "kl") return kl_divergence(f, g, q);
        if (f0_arg.empty()) throw Error(ErrorCode::kInvalidInput, "field 'f0': smoothed_log_ratio needs --f0");
        return smoothed_log_ratio(f, g, density_from_json(json_arg(f0_arg)), b, q);
      };
      QuadratureSpec q = QuadratureSpec::covering(f, g, a);
      if (!f0_arg.empty()) {
        const DensityLike d0 = density_from_json(json_arg(f0_arg));
        const QuadratureSpec q0 = QuadratureSpec::covering(d0, d0);
        q.lo = std::min(q.lo, q0.lo), q.hi = std::max(q.hi, q0.hi);
        for (int k = 0; k < 2; ++k) q.lo2[k] = std::min(q.lo2[k], q0.lo2[k]), q.hi2[k] = std::max(q.hi2[k], q0.hi2[k]);
      }
      const double value = compute(q);
      QuadratureSpec coarse = q;
      coarse.cells = std::max(1, q.cells / 2);
      coarse.cells2 = std::max(1, q.cells2 / 2);
      const double rough = compute(coarse);
      Json j{{"metric", metric}, {"window", window_json(q, dim)}};
      j["value"] = std::isfinite(value) ? Json(value) : Json("inf");
      j["error_estimate"] = std::isfinite(value) && std::isfinite(rough) ? Json(std::fabs(value - rough)) : Json(nullptr);
      emit(j.dump() + "\n", output, out);
    } else if (*env) {
      const DensityLike f = density_like_from_json(json_arg(density_arg));
      const EnvelopeResult r = window > 0.0 ? tail_envelope(f, window, margin) : gating_envelope(f);
      Json j{{"a", r.envelope.a}, {"b", r.envelope.b}, {"degenerate_support", r.degenerate_support}};
      emit(j.dump() + "\n", output, out);
    } else if (*exp || *bnd) {
      const Json cj = json_arg(config_arg);
      ExperimentConfig c = ExperimentConfig::from_json(cj);
      c.workers = workers;
      if (seed_override) c.seed = *seed_override;
      c.validate();
      ExperimentReport rep;
      if (*exp) {
        rep = run_consistency(c);
      } else {
        Json region;
        if (!region_arg.empty()) {
          try {
            region = Json::parse(region_arg);
          } catch (const Json::parse_error&) {
            throw Error(ErrorCode::kInvalidInput, "field 'S': not valid JSON");
          }
        } else if (cj.contains("S")) {
          region = cj["S"];
        } else {
          throw Error(ErrorCode::kInvalidInput, "field 'S': missing (pass --S or set it in the config)");
        }
        rep = run_bound_check(c, region_from_json(region));
      }
      const std::string path = !output.empty() ? output : c.output_path;
      emit(rep.csv(), path, out);
      const std::string spath = !summary_path.empty() ? summary_path : (path.empty() || path == "-" ? "" : path + ".summary.json");
      if (!spath.empty()) write_text_atomic(spath, rep.summary().dump(2) + "\n");
    } else if (*cvg) {
      const ExperimentReport rep = run_convergence_mode_check(sequence_kind_from_name(kind), int_list(n_list, "n_list"), a, metrics);
      emit(rep.csv(), output, out);
    }
  } catch (const Error& e) {
    err << "logcave: " << e.what() << "\n";
    return e.code() == ErrorCode::kNonConvergence ? 2 : 1;
  } catch (const std::exception& e) {
    err << "logcave: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace logcave
