#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "logcave/analytic.hpp"
#include "logcave/envelope.hpp"
#include "logcave/json_io.hpp"
#include "logcave/mle.hpp"
#include "logcave/sampling.hpp"

namespace logcave {

inline constexpr const char* kVersion = "logcave 1.0.0";

enum class Reference { kF0Itself, kKlProjection, kLargeNMle };
std::string reference_name(Reference r);
Reference reference_from_name(const std::string& name);

// Metric names: tv, weighted_tv, weighted_sup, hellinger, kl_divergence
// (d_KL(f0, fhat)), smoothed_log_ratio (b = 1e-3, f* against fhat), sup_fhat,
// inf_fhat_on_S.
bool is_metric_name(const std::string& name);

struct ExperimentConfig {
  AnalyticDensity f0 = AnalyticDensity::normal(0.0, 1.0);
  std::vector<int> n_grid;
  int replications = 1;
  std::uint64_t seed = 0;
  double weight_a = 0.0;
  std::vector<std::string> metrics;
  Reference reference = Reference::kF0Itself;
  std::string output_path;
  int workers = 1;
  FitOptions fit;

  // INVALID_INPUT naming the offending field.
  void validate() const;
  static ExperimentConfig from_json(const Json& j);
  Json to_json() const;
};

struct ReportRow {
  int n = 0;
  int replication = 0;
  std::string metric;
  double value = 0.0;
  // "ok", an error code name for a failed replication, or NOTE_* for a
  // request gated out by a hypothesis check.
  std::string flag = "ok";
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  Json metadata;

  std::size_t flagged() const;
  // Header n,replication,metric,value,flag; values with 17 significant digits.
  std::string csv() const;
  // Per (n, metric): count, median, q1, q3, min, max over "ok" rows, plus the
  // metadata.
  Json summary() const;
  // Median over "ok" rows of one (n, metric); NaN when there are none.
  double median(int n, const std::string& metric) const;
  std::vector<double> values(int n, const std::string& metric) const;
};

// The density fits are compared against, with its envelope.
struct ResolvedReference {
  DensityLike density;
  std::string label;
  ExpEnvelope envelope;
  bool continuous = true;
};
ResolvedReference resolve_reference(const ExperimentConfig& config);

// Envelope used for gating: tail_envelope with no margin and a scan window
// reaching the 1e-6 quantiles (catalog densities) or the exact tent slopes.
EnvelopeResult gating_envelope(const DensityLike& f);

// Replication r fits the first n points of stream (seed, r) for every n, so
// each replication follows one growing sample.
ExperimentReport run_consistency(const ExperimentConfig& config);

// Deterministic check along density_sequence(kind, n) against its limit.
// ENVELOPE_VIOLATION if a >= a0 of the limit. weighted_sup rows become
// NOTE_DISCONTINUOUS_LIMIT when the limit is discontinuous.
ExperimentReport run_convergence_mode_check(SequenceKind kind, const std::vector<int>& n_list, double a,
                                            const std::vector<std::string>& metrics = {"weighted_tv", "weighted_sup"});

// S is an interval (2 numbers) in 1D or polygon vertices in 2D. Metrics are
// sup_fhat and inf_fhat_on_S. S_NOT_INTERIOR unless S grown by 1% of its
// diameter stays inside the support interior of f0.
struct BoundRegion {
  std::vector<Point2> vertices;  // 1D: {lo, 0}, {hi, 0}
};
ExperimentReport run_bound_check(const ExperimentConfig& config, const BoundRegion& s);

}  // namespace logcave
