#pragma once

#include <cstdint>
#include <string>

#include "logcave/analytic.hpp"
#include "logcave/metrics.hpp"
#include "logcave/sample.hpp"

namespace logcave {

// Identifies one Philox4x32-10 stream; replication r uses stream_id r.
struct SeededStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

// Proposal used by the rejection sampler for a univariate catalog density:
// f(x) <= exp(-a |x - center| + b), or f <= exp(b) on [lo, hi] when a = 0
// (compact support).
struct RejectionEnvelope {
  double center = 0.0;
  double a = 0.0;
  double b = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  double mass() const;
};

// True when draw() samples f0 by rejection (log-concave families without a
// closed-form quantile: normal, gamma with shape > 1, beta with both
// parameters >= 1).
bool uses_rejection(const AnalyticDensity& f0);
// The envelope draw() uses; INVALID_INPUT when uses_rejection(f0) is false.
RejectionEnvelope rejection_envelope(const AnalyticDensity& f0);

// n i.i.d. draws. Closed-form inverse CDF for uniform, Laplace, logistic,
// Gumbel and exponential-shaped gamma; rejection under an exponential envelope
// about the mode for the other log-concave families; numerical inverse CDF for
// the remaining (non-log-concave) families; mixtures by component selection;
// bivariate normal by Cholesky factor of standard normal draws.
Sample draw(const AnalyticDensity& f0, std::size_t n, SeededStream s);

// Proposals made / accepted by rejection while drawing n points from f0.
struct RejectionStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
};
RejectionStats rejection_stats(const AnalyticDensity& f0, std::size_t n, SeededStream s);

// Second differences of log f0 on the uniform scan grid of [lo, hi] with
// cells + 1 points (2D: along both axes and both diagonals of the cells2 grid),
// using only triples inside the support where log f0 is finite. True when all
// are <= 1e-8.
bool is_log_concave(const AnalyticDensity& f0, const QuadratureSpec& scan);
// Same, on QuadratureSpec::covering(f0, f0).
bool is_log_concave(const AnalyticDensity& f0);

enum class SequenceKind { kShrinkingVarianceNormal, kShiftingLaplace, kNarrowingUniform };

// "shrinking_variance_normal", "shifting_laplace", "narrowing_uniform";
// UNKNOWN_KIND otherwise.
SequenceKind sequence_kind_from_name(const std::string& name);
std::string sequence_kind_name(SequenceKind kind);

// N(0, 1 + 1/n), Laplace(1/n, 1), U[-1 - 1/n, 1 + 1/n] for n >= 1.
AnalyticDensity density_sequence(SequenceKind kind, int n);
AnalyticDensity density_sequence(const std::string& kind, int n);
// N(0, 1), Laplace(0, 1), U[-1, 1].
AnalyticDensity sequence_limit(SequenceKind kind);

}  // namespace logcave
