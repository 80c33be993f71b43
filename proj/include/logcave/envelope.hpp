#pragma once

#include "logcave/density.hpp"

namespace logcave {

// f(x) <= exp(-a ||x|| + b).
struct ExpEnvelope {
  double a = 0.0;
  double b = 0.0;

  double log_bound(double norm) const { return -a * norm + b; }
};

// Rate used for compactly supported densities, where every a > 0 is valid.
inline constexpr double kCompactSupportRate = 1e3;

struct EnvelopeResult {
  ExpEnvelope envelope;
  // Set when the density has compact support and the capped rate was used.
  bool degenerate_support = false;
};

// Constructive exponential tail envelope.
//
// 1D tents: a = (1 - margin) * min |slope| of the two outermost pieces, b the
// exact maximum of log f + a|x| (attained at a knot). Compactly supported
// inputs (2D tents, uniform, beta, or a flat 1D tent) get a = 1e3 and the
// exact b, flagged as degenerate support. Other catalog densities scan
// ||x - mode|| in [window/2, window] for the smallest decay rate
// (log f(mode) - log f(x)) / ||x - mode||, shrink it by (1 - margin), and take
// b as the refined maximum of log f(x) + a||x||.
EnvelopeResult tail_envelope(const DensityLike& f, double window, double margin);

}  // namespace logcave
