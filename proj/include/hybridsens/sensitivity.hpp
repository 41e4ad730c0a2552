#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hybridsens/simulate.hpp"

namespace hybridsens {

/// Quantities evaluated at the nominal event from both sides. Superscript
/// minus means "just before the jump" (ante segment at tau), plus "just
/// after" (post segment at tau).
struct EventData {
  double tau = 0.0;
  Vector x_minus;
  Vector x_plus;
  Vector f_minus;  ///< f_ante(x_minus, mu(tau), tau)
  Vector f_plus;   ///< f_post(x_plus, mu(tau), tau)
  Matrix D1_delta;  ///< n x n, impulse Jacobian at (x_minus, tau)
  Vector D2_delta;  ///< impulse time derivative at (x_minus, tau)
  Vector delta_dot;  ///< D1_delta f_minus + D2_delta
  Matrix D1_g;  ///< 1 x n guard gradient at (x_minus, tau)
  double D2_g = 0.0;
  double g_dot = 0.0;  ///< D1_g f_minus + D2_g
};

/// Evaluates EventData at the event of ``traj``. Throws
/// TransversalityViolated when |g_dot| <= ``transversality_tolerance`` and
/// InvalidArgument when the trajectory has no event.
EventData event_data(const HybridSystem& sys, const HybridTrajectory& traj,
                     const InputSignal& mu,
                     double transversality_tolerance = 1e-8);

/// Jump gain ((f+ - f- - delta_dot) / g_dot) D1_g + D1_delta.
///
/// This is the linear map taking the ante-event sensitivity at the nominal
/// event time to the post-event one, with the event-time shift folded in.
/// With a zero impulse it is the classical saltation matrix of a
/// piecewise-smooth switch, minus the identity.
Matrix jump_gain(const EventData& ev, double transversality_tolerance = 1e-8);

/// Time-varying linearization along the extended nominal segments.
struct JumpLinearization {
  TimeSpan span;
  int n_state = 0;
  int n_input = 0;
  std::function<Matrix(double)> A_ante;
  std::function<Matrix(double)> B_ante;
  /// Empty when the nominal trajectory has no event.
  std::function<Matrix(double)> A_post;
  std::function<Matrix(double)> B_post;
  /// Zero when there is no event.
  Matrix H;
  std::optional<EventData> event;

  bool has_event() const { return event.has_value(); }
  double tau() const;
  Matrix A(Mode mode, double t) const;
  Matrix B(Mode mode, double t) const;
};

/// Builds the linearization. A nominal trajectory without an event yields
/// an ante-only linearization (the classical smooth case).
JumpLinearization linearize(const HybridSystem& sys,
                            const HybridTrajectory& traj,
                            const InputSignal& mu,
                            double transversality_tolerance = 1e-8);

struct LinearizedTrajectory {
  DenseSegment z_ante_ext;
  /// Present iff the linearization has an event.
  std::optional<DenseSegment> z_post_ext;
  /// d tau_eps / d eps at eps = 0; NaN without an event.
  double tau_prime = 0.0;
  Vector z0;
  InputSignal v{0, 0.0, 0.0, [](double) { return Vector(); }};

  Vector z(Mode mode, double t) const;
};

/// Integrates the ante sensitivity from z0 over the whole span, resets to
/// (I + H) z_ante(tau) at the nominal event time, and integrates the post
/// sensitivity forward to t1 and backward to t0.
LinearizedTrajectory propagate_linearization(const JumpLinearization& lin,
                                             const Vector& z0,
                                             const InputSignal& v,
                                             const IntegrationOptions& opts = {});

/// First-order predictor of the trajectory perturbed by eps (z0, v).
class ApproxTrajectory {
 public:
  ApproxTrajectory(HybridTrajectory base, LinearizedTrajectory lin, double eps);

  const HybridTrajectory& base() const { return base_; }
  const LinearizedTrajectory& lin() const { return lin_; }
  double eps() const { return eps_; }

  /// tau + eps * tau_prime, unclamped. Infinity without an event.
  double estimated_event_time() const { return estimate_; }
  /// The switch the predictor actually uses, clamped into the span.
  double switch_time() const { return switch_time_; }
  /// Set when the estimate fell outside the span and had to be clamped.
  bool switch_outside_span() const { return outside_; }

  /// Predictor with its own switching rule.
  Vector operator()(double t) const;
  /// Predictor with the switch placed at ``switch_at`` instead.
  Vector with_switch(double t, double switch_at) const;
  /// Extended branch predictor alpha_bar^s(t) + eps z_bar^s(t).
  Vector branch(Mode mode, double t) const;

 private:
  HybridTrajectory base_;
  LinearizedTrajectory lin_;
  double eps_;
  double estimate_;
  double switch_time_;
  bool outside_;
};

ApproxTrajectory approximate(const HybridTrajectory& traj,
                             const LinearizedTrajectory& lin_traj, double eps);

struct ConvergenceRow {
  double eps = 0.0;
  /// sup_t |x_eps(t) - prediction(t)|, branch chosen by the true event time.
  double state_error = 0.0;
  /// |tau_eps - (tau + eps tau_prime)|; NaN without an event.
  double event_time_error = 0.0;
  double perturbed_event_time = 0.0;
  /// Log-log slopes against the previous row.
  std::optional<double> state_slope;
  std::optional<double> event_slope;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;

  /// Smallest slope over the table; nullopt with fewer than two rows.
  std::optional<double> min_state_slope() const;
  std::optional<double> min_event_slope() const;
};

/// Simulates the truly perturbed system for each eps and measures the
/// predictor's error on the union of both trajectory grids plus ten points
/// strictly inside the band between the nominal and perturbed event
/// times. ``eps_list`` must be positive and strictly decreasing.
ConvergenceTable convergence_study(const HybridSystem& sys,
                                   const HybridTrajectory& traj,
                                   const LinearizedTrajectory& lin_traj,
                                   const InputSignal& mu,
                                   const std::vector<double>& eps_list,
                                   const IntegrationOptions& opts = {});

/// Comparison grid used by convergence_study and the tracking trace: union
/// of ``a`` and ``b`` plus ``band_points`` interior points of [lo, hi].
std::vector<double> comparison_grid(std::span<const double> a,
                                    std::span<const double> b, double lo,
                                    double hi, int band_points = 10);

}  // namespace hybridsens
