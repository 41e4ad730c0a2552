#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hybridsens/dense_output.hpp"
#include "hybridsens/hybrid_system.hpp"

namespace hybridsens {

struct TimeSpan {
  double t0 = 0.0;
  double t1 = 1.0;
};

struct IntegrationOptions {
  /// Fixed RK4 step. Zero selects (t1 - t0) / 2000.
  double step = 0.0;
  /// Bound on |g| at the located event.
  double event_tolerance = 1e-10;
  /// Bracket width reached by the event root finder.
  double time_tolerance = 1e-12;
  /// |dg/dt| at or below this is treated as a grazing contact.
  double transversality_tolerance = 1e-8;
  /// Continue the post-event segment backwards to t0.
  bool extend_post_backward = true;
  /// Raise GrazingEvent from simulate() on a grazing contact. When false
  /// the event is kept and the caller is expected to check transversality.
  bool reject_grazing = true;

  double resolved_step(const TimeSpan& span) const {
    return step > 0.0 ? step : (span.t1 - span.t0) / 2000.0;
  }
};

/// Nominal single-jump trajectory together with the extensions of both
/// smooth segments over the full span.
struct HybridTrajectory {
  TimeSpan span;
  /// Integration grid: the uniform grid plus the event time when present.
  std::vector<double> grid;
  /// Forward integration of f_ante over the whole span.
  DenseSegment ante_ext;
  /// Integration of f_post through (post_event_state, event_time), forward
  /// to t1 and (if requested) backward to t0.
  std::optional<DenseSegment> post_ext;
  bool event_found = false;
  double event_time = 0.0;
  Vector pre_event_state;
  Vector post_event_state;
  /// dg/dt along f_ante at the event (the transversality quantity).
  double guard_rate = 0.0;
  /// Sign of the guard change across the event: +1 rising, -1 falling.
  int crossing_direction = 0;

  /// Which segment the right-continuous glued trajectory uses at t.
  Mode branch(double t) const {
    return event_found && t >= event_time ? Mode::kPost : Mode::kAnte;
  }
  /// Right-continuous glued trajectory: ante before the event, post after.
  Vector state(double t) const;
  /// Extended segment evaluation (ante_ext or post_ext) at any t in span.
  Vector extended(Mode mode, double t) const;
};

struct EventLocation {
  double time = 0.0;
  double guard_value = 0.0;
  int direction = 0;
};

/// Root of t -> guard(segment(t), t) inside ``bracket``. Regula falsi with
/// the Illinois modification, falling back to bisection when a step fails
/// to halve the bracket. Stops when the bracket is narrower than
/// ``time_tolerance`` and |g| <= ``event_tolerance``, or when the bracket can
/// no longer shrink in floating point.
EventLocation locate_event(const DenseSegment& segment,
                           const GuardFunction& guard,
                           std::pair<double, double> bracket,
                           double time_tolerance,
                           double event_tolerance = 1e-10);

/// D1 g(x, t) . f_ante(x, u, t) + D2 g(x, t).
double transversality_check(const HybridSystem& sys, const Vector& x,
                            const Vector& u, double t);

enum class Direction { kForward, kBackward };

/// Integrates the selected vector field from (anchor_state, anchor_time)
/// to the end (forward) or start (backward) of ``span``. The result's
/// samples lie on the uniform grid of ``span`` plus the anchor.
DenseSegment extend_segment(const HybridSystem& sys, const Vector& anchor_state,
                            double anchor_time, const InputSignal& input,
                            const TimeSpan& span, Direction direction,
                            Mode which, const IntegrationOptions& opts = {});

HybridTrajectory simulate(const HybridSystem& sys, const Vector& x0,
                          const InputSignal& input, const TimeSpan& span,
                          const IntegrationOptions& opts = {});

}  // namespace hybridsens
