#include "hybridsens/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hybridsens/rk4.hpp"

namespace hybridsens {

Vector HybridTrajectory::state(double t) const {
  return extended(branch(t), t);
}

Vector HybridTrajectory::extended(Mode mode, double t) const {
  if (mode == Mode::kAnte) return ante_ext(t);
  if (!post_ext) {
    raise(ErrorKind::kNoEventInSpan,
          "trajectory has no post-event segment to evaluate");
  }
  return (*post_ext)(t);
}

EventLocation locate_event(const DenseSegment& segment,
                           const GuardFunction& guard,
                           std::pair<double, double> bracket,
                           double time_tolerance, double event_tolerance) {
  auto g = [&](double t) { return guard(segment(t), t); };
  double a = bracket.first;
  double b = bracket.second;
  if (a > b) std::swap(a, b);
  double ga = g(a);
  double gb = g(b);
  const int direction = gb > ga ? 1 : -1;
  if (ga == 0.0) return {a, ga, direction};
  if (gb == 0.0) return {b, gb, direction};
  if (std::signbit(ga) == std::signbit(gb)) {
    std::ostringstream os;
    os.precision(17);
    os << "guard has the same sign at both ends of [" << a << ", " << b
       << "] (" << ga << ", " << gb << ")";
    raise(ErrorKind::kNoSignChange, os.str());
  }

  // Illinois weights: copies of ga/gb that get halved when the same end is
  // retained twice in a row.
  double wa = ga;
  double wb = gb;
  int retained = 0;  // +1: a moved last time, -1: b moved last time
  bool bisect_next = false;
  for (int iter = 0; iter < 400; ++iter) {
    const double width = b - a;
    if (width <= time_tolerance &&
        std::min(std::abs(ga), std::abs(gb)) <= event_tolerance) {
      break;
    }
    double c = bisect_next ? a + 0.5 * width : (a * wb - b * wa) / (wb - wa);
    if (!(c > a && c < b)) c = a + 0.5 * width;
    if (!(c > a && c < b)) break;  // adjacent doubles
    const double gc = g(c);
    if (gc == 0.0) return {c, gc, direction};
    if (std::signbit(gc) == std::signbit(ga)) {
      a = c;
      ga = wa = gc;
      if (retained == 1) wb *= 0.5;
      retained = 1;
    } else {
      b = c;
      gb = wb = gc;
      if (retained == -1) wa *= 0.5;
      retained = -1;
    }
    bisect_next = (b - a) > 0.5 * width;
  }
  return std::abs(ga) <= std::abs(gb) ? EventLocation{a, ga, direction}
                                       : EventLocation{b, gb, direction};
}

double transversality_check(const HybridSystem& sys, const Vector& x,
                            const Vector& u, double t) {
  const Matrix dg = sys.guard_dx(x, t);
  return (dg * sys.f_ante(x, u, t))(0) + sys.guard_dt(x, t);
}

namespace {

void check_span(const TimeSpan& span) {
  if (!std::isfinite(span.t0) || !std::isfinite(span.t1) ||
      !(span.t1 > span.t0)) {
    raise(ErrorKind::kInvalidArgument, "time span must satisfy t0 < t1");
  }
}

void check_input_covers(const InputSignal& input, const TimeSpan& span,
                        int n_input) {
  if (input.dim() != n_input) {
    raise(ErrorKind::kInvalidArgument, "input signal dimension mismatch");
  }
  const double slack = 1e-12 * (1.0 + std::abs(span.t1));
  if (input.t_begin() > span.t0 + slack || input.t_end() < span.t1 - slack) {
    raise(ErrorKind::kInvalidArgument, "input signal does not cover the span");
  }
}

OdeRhs mode_rhs(const HybridSystem& sys, const InputSignal& input, Mode mode) {
  return [&sys, &input, mode](double t, const Vector& x) {
    return sys.flow(mode, x, input(t), t);
  };
}

}  // namespace

DenseSegment extend_segment(const HybridSystem& sys, const Vector& anchor_state,
                            double anchor_time, const InputSignal& input,
                            const TimeSpan& span, Direction direction,
                            Mode which, const IntegrationOptions& opts) {
  const double slack = 1e-12 * (1.0 + std::abs(anchor_time));
  if (anchor_time < span.t0 - slack || anchor_time > span.t1 + slack) {
    raise(ErrorKind::kInvalidArgument, "anchor time outside extension span");
  }
  if (anchor_state.size() != sys.n_state()) {
    raise(ErrorKind::kInvalidArgument, "anchor state dimension mismatch");
  }
  std::vector<double> base;
  if (span.t1 > span.t0) {
    base = uniform_grid(span.t0, span.t1, opts.resolved_step(span));
  } else {
    base = {span.t0};
  }
  const auto nodes =
      nodes_from_anchor(base, anchor_time, direction == Direction::kForward);
  return integrate_rk4(mode_rhs(sys, input, which), nodes, anchor_state);
}

HybridTrajectory simulate(const HybridSystem& sys, const Vector& x0,
                          const InputSignal& input, const TimeSpan& span,
                          const IntegrationOptions& opts) {
  check_span(span);
  if (x0.size() != sys.n_state()) {
    raise(ErrorKind::kInvalidArgument, "initial state dimension mismatch");
  }
  check_input_covers(input, span, sys.n_input());
  const double g0 = sys.guard(x0, span.t0);
  if (g0 == 0.0) {
    raise(ErrorKind::kInvalidArgument, "initial state lies on the guard");
  }

  HybridTrajectory traj;
  traj.span = span;
  const auto grid = uniform_grid(span.t0, span.t1, opts.resolved_step(span));
  traj.ante_ext = integrate_rk4(mode_rhs(sys, input, Mode::kAnte), grid, x0);

  // First sign change of the guard between accepted steps. Later crossings
  // are not looked for.
  const auto& states = traj.ante_ext.states();
  double g_prev = g0;
  std::optional<std::size_t> hit;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double gk = sys.guard(states[k], grid[k]);
    if ((g_prev > 0.0 && gk <= 0.0) || (g_prev < 0.0 && gk >= 0.0)) {
      hit = k;
      break;
    }
    g_prev = gk;
  }
  if (!hit) {
    traj.grid = grid;
    return traj;
  }

  const GuardFunction guard = [&sys](const Vector& x, double t) {
    return sys.guard(x, t);
  };
  const EventLocation ev =
      locate_event(traj.ante_ext, guard, {grid[*hit - 1], grid[*hit]},
                   opts.time_tolerance, opts.event_tolerance);
  traj.event_found = true;
  traj.event_time = ev.time;
  traj.crossing_direction = ev.direction;
  traj.pre_event_state = traj.ante_ext(ev.time);
  traj.guard_rate =
      transversality_check(sys, traj.pre_event_state, input(ev.time), ev.time);
  if (opts.reject_grazing &&
      std::abs(traj.guard_rate) <= opts.transversality_tolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "|dg/dt| = " << std::abs(traj.guard_rate) << " <= "
       << opts.transversality_tolerance << " at t = " << ev.time;
    raise(ErrorKind::kGrazingEvent, os.str());
  }
  traj.post_event_state =
      traj.pre_event_state + sys.impulse(traj.pre_event_state, ev.time);

  const OdeRhs post_rhs = mode_rhs(sys, input, Mode::kPost);
  DenseSegment forward = integrate_rk4(
      post_rhs, nodes_from_anchor(grid, ev.time, true), traj.post_event_state);
  if (opts.extend_post_backward) {
    DenseSegment backward =
        integrate_rk4(post_rhs, nodes_from_anchor(grid, ev.time, false),
                      traj.post_event_state);
    traj.post_ext = DenseSegment::concatenate(backward, forward);
  } else {
    traj.post_ext = std::move(forward);
  }
  traj.grid = with_anchor(grid, ev.time);
  return traj;
}

}  // namespace hybridsens
