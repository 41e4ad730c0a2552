#include "hybridsens/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "hybridsens/rk4.hpp"

namespace hybridsens {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void transversality_error(double g_dot, double tol, double tau) {
  std::ostringstream os;
  os.precision(17);
  os << "|g_dot| = " << std::abs(g_dot) << " <= " << tol
     << " at the event t = " << tau;
  raise(ErrorKind::kTransversalityViolated, os.str());
}

}  // namespace

EventData event_data(const HybridSystem& sys, const HybridTrajectory& traj,
                     const InputSignal& mu, double transversality_tolerance) {
  if (!traj.event_found) {
    raise(ErrorKind::kInvalidArgument, "event data needs a located event");
  }
  EventData ev;
  ev.tau = traj.event_time;
  ev.x_minus = traj.pre_event_state;
  ev.x_plus = traj.post_event_state;
  const Vector u = mu(ev.tau);
  ev.f_minus = sys.f_ante(ev.x_minus, u, ev.tau);
  ev.f_plus = sys.f_post(ev.x_plus, u, ev.tau);
  ev.D1_delta = sys.impulse_dx(ev.x_minus, ev.tau);
  ev.D2_delta = sys.impulse_dt(ev.x_minus, ev.tau);
  ev.delta_dot = ev.D1_delta * ev.f_minus + ev.D2_delta;
  ev.D1_g = sys.guard_dx(ev.x_minus, ev.tau);
  ev.D2_g = sys.guard_dt(ev.x_minus, ev.tau);
  ev.g_dot = (ev.D1_g * ev.f_minus)(0) + ev.D2_g;
  if (std::abs(ev.g_dot) <= transversality_tolerance) {
    transversality_error(ev.g_dot, transversality_tolerance, ev.tau);
  }
  return ev;
}

Matrix jump_gain(const EventData& ev, double transversality_tolerance) {
  if (std::abs(ev.g_dot) <= transversality_tolerance) {
    transversality_error(ev.g_dot, transversality_tolerance, ev.tau);
  }
  const Vector column = (ev.f_plus - ev.f_minus - ev.delta_dot) / ev.g_dot;
  return column * ev.D1_g + ev.D1_delta;
}

double JumpLinearization::tau() const {
  return event ? event->tau : std::numeric_limits<double>::infinity();
}

Matrix JumpLinearization::A(Mode mode, double t) const {
  if (mode == Mode::kPost && !has_event()) {
    raise(ErrorKind::kInvalidArgument, "no post-event linearization");
  }
  return mode == Mode::kAnte ? A_ante(t) : A_post(t);
}

Matrix JumpLinearization::B(Mode mode, double t) const {
  if (mode == Mode::kPost && !has_event()) {
    raise(ErrorKind::kInvalidArgument, "no post-event linearization");
  }
  return mode == Mode::kAnte ? B_ante(t) : B_post(t);
}

JumpLinearization linearize(const HybridSystem& sys,
                            const HybridTrajectory& traj,
                            const InputSignal& mu,
                            double transversality_tolerance) {
  auto shared_sys = std::make_shared<const HybridSystem>(sys);
  auto shared_traj = std::make_shared<const HybridTrajectory>(traj);
  auto shared_mu = std::make_shared<const InputSignal>(mu);

  JumpLinearization lin;
  lin.span = traj.span;
  lin.n_state = sys.n_state();
  lin.n_input = sys.n_input();
  auto jacobian = [=](Mode mode, bool wrt_state) {
    return [=](double t) -> Matrix {
      const Vector x = shared_traj->extended(mode, t);
      const Vector u = (*shared_mu)(t);
      return wrt_state ? shared_sys->flow_dx(mode, x, u, t)
                       : shared_sys->flow_du(mode, x, u, t);
    };
  };
  lin.A_ante = jacobian(Mode::kAnte, true);
  lin.B_ante = jacobian(Mode::kAnte, false);
  lin.H = Matrix::Zero(sys.n_state(), sys.n_state());
  if (traj.event_found) {
    if (!traj.post_ext) {
      raise(ErrorKind::kInvalidArgument, "trajectory lacks its post extension");
    }
    lin.A_post = jacobian(Mode::kPost, true);
    lin.B_post = jacobian(Mode::kPost, false);
    lin.event = event_data(sys, traj, mu, transversality_tolerance);
    lin.H = jump_gain(*lin.event, transversality_tolerance);
  }
  return lin;
}

Vector LinearizedTrajectory::z(Mode mode, double t) const {
  if (mode == Mode::kAnte) return z_ante_ext(t);
  if (!z_post_ext) raise(ErrorKind::kNoEventInSpan, "no post-event sensitivity");
  return (*z_post_ext)(t);
}

LinearizedTrajectory propagate_linearization(const JumpLinearization& lin,
                                             const Vector& z0,
                                             const InputSignal& v,
                                             const IntegrationOptions& opts) {
  if (z0.size() != lin.n_state) {
    raise(ErrorKind::kInvalidArgument, "z0 dimension mismatch");
  }
  if (v.dim() != lin.n_input) {
    raise(ErrorKind::kInvalidArgument, "input direction dimension mismatch");
  }
  auto rhs = [&lin, &v](Mode mode) -> OdeRhs {
    return [&lin, &v, mode](double t, const Vector& z) -> Vector {
      Vector dz = lin.A(mode, t) * z;
      if (lin.n_input > 0) dz += lin.B(mode, t) * v(t);
      return dz;
    };
  };

  const TimeSpan& span = lin.span;
  const auto grid = uniform_grid(span.t0, span.t1, opts.resolved_step(span));
  LinearizedTrajectory out;
  out.z0 = z0;
  out.v = v;
  out.z_ante_ext = integrate_rk4(rhs(Mode::kAnte), grid, z0);
  if (!lin.has_event()) {
    out.tau_prime = kNaN;
    return out;
  }

  const EventData& ev = *lin.event;
  const Vector za_tau = out.z_ante_ext(ev.tau);
  const Vector zp_tau =
      (Matrix::Identity(lin.n_state, lin.n_state) + lin.H) * za_tau;
  out.tau_prime = -(ev.D1_g * za_tau)(0) / ev.g_dot;

  const OdeRhs post = rhs(Mode::kPost);
  DenseSegment forward =
      integrate_rk4(post, nodes_from_anchor(grid, ev.tau, true), zp_tau);
  DenseSegment backward =
      integrate_rk4(post, nodes_from_anchor(grid, ev.tau, false), zp_tau);
  out.z_post_ext = DenseSegment::concatenate(backward, forward);
  return out;
}

ApproxTrajectory::ApproxTrajectory(HybridTrajectory base,
                                   LinearizedTrajectory lin, double eps)
    : base_(std::move(base)), lin_(std::move(lin)), eps_(eps) {
  if (!base_.event_found) {
    estimate_ = std::numeric_limits<double>::infinity();
    switch_time_ = estimate_;
    outside_ = false;
    return;
  }
  if (!lin_.z_post_ext) {
    raise(ErrorKind::kInvalidArgument,
          "linearized trajectory lacks the post-event branch");
  }
  estimate_ = base_.event_time + eps_ * lin_.tau_prime;
  switch_time_ = std::clamp(estimate_, base_.span.t0, base_.span.t1);
  outside_ = switch_time_ != estimate_;
}

Vector ApproxTrajectory::branch(Mode mode, double t) const {
  return base_.extended(mode, t) + eps_ * lin_.z(mode, t);
}

Vector ApproxTrajectory::with_switch(double t, double switch_at) const {
  return branch(t < switch_at ? Mode::kAnte : Mode::kPost, t);
}

Vector ApproxTrajectory::operator()(double t) const {
  return with_switch(t, switch_time_);
}

ApproxTrajectory approximate(const HybridTrajectory& traj,
                             const LinearizedTrajectory& lin_traj,
                             double eps) {
  return ApproxTrajectory(traj, lin_traj, eps);
}

std::optional<double> ConvergenceTable::min_state_slope() const {
  std::optional<double> best;
  for (const auto& r : rows) {
    if (r.state_slope && (!best || *r.state_slope < *best)) best = r.state_slope;
  }
  return best;
}

std::optional<double> ConvergenceTable::min_event_slope() const {
  std::optional<double> best;
  for (const auto& r : rows) {
    if (r.event_slope && (!best || *r.event_slope < *best)) best = r.event_slope;
  }
  return best;
}

std::vector<double> comparison_grid(std::span<const double> a,
                                    std::span<const double> b, double lo,
                                    double hi, int band_points) {
  std::vector<double> band;
  if (std::isfinite(lo) && std::isfinite(hi) && hi > lo) {
    for (int i = 1; i <= band_points; ++i) {
      band.push_back(lo + (hi - lo) * i / (band_points + 1.0));
    }
  }
  const auto ab = merge_grids(a, b);
  return merge_grids(ab, band);
}

ConvergenceTable convergence_study(const HybridSystem& sys,
                                   const HybridTrajectory& traj,
                                   const LinearizedTrajectory& lin_traj,
                                   const InputSignal& mu,
                                   const std::vector<double>& eps_list,
                                   const IntegrationOptions& opts) {
  if (eps_list.empty()) raise(ErrorKind::kInvalidArgument, "empty eps list");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > 0.0) ||
        (i > 0 && !(eps_list[i] < eps_list[i - 1]))) {
      raise(ErrorKind::kInvalidArgument,
            "eps list must be positive and strictly decreasing");
    }
  }

  const Vector x0 = traj.ante_ext.states().front();
  ConvergenceTable table;
  for (double eps : eps_list) {
    const InputSignal u_eps = InputSignal::affine(mu, eps, lin_traj.v);
    const HybridTrajectory perturbed =
        simulate(sys, x0 + eps * lin_traj.z0, u_eps, traj.span, opts);
    if (perturbed.event_found != traj.event_found) {
      std::ostringstream os;
      os << "perturbed run (eps = " << eps << ") "
         << (traj.event_found ? "has no event in span"
                              : "has an event the nominal lacks");
      raise(ErrorKind::kNoEventInSpan, os.str());
    }
    const ApproxTrajectory approx(traj, lin_traj, eps);

    ConvergenceRow row;
    row.eps = eps;
    double lo = kNaN, hi = kNaN;
    if (traj.event_found) {
      row.perturbed_event_time = perturbed.event_time;
      row.event_time_error =
          std::abs(perturbed.event_time - approx.estimated_event_time());
      lo = std::min(traj.event_time, perturbed.event_time);
      hi = std::max(traj.event_time, perturbed.event_time);
    } else {
      row.perturbed_event_time = kNaN;
      row.event_time_error = kNaN;
    }
    for (double t : comparison_grid(traj.grid, perturbed.grid, lo, hi)) {
      const Mode branch = perturbed.branch(t);
      const double err =
          (perturbed.extended(branch, t) - approx.branch(branch, t)).norm();
      row.state_error = std::max(row.state_error, err);
    }
    if (!table.rows.empty()) {
      const ConvergenceRow& prev = table.rows.back();
      const double log_eps = std::log(prev.eps / row.eps);
      if (prev.state_error > 0.0 && row.state_error > 0.0) {
        row.state_slope = std::log(prev.state_error / row.state_error) / log_eps;
      }
      if (prev.event_time_error > 0.0 && row.event_time_error > 0.0) {
        row.event_slope =
            std::log(prev.event_time_error / row.event_time_error) / log_eps;
      }
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace hybridsens
