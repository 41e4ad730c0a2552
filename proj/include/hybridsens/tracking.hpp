#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridsens/sensitivity.hpp"

namespace hybridsens {

/// Weights of the jump-linear quadratic regulator
///   1/2 int_{t0}^{T} z'Qz + v'Rv dt + 1/2 z(T)' P_T z(T).
struct LqrWeights {
  std::function<Matrix(double)> Q;
  std::function<Matrix(double)> R;
  Matrix P_T;
  double horizon_T = 0.0;

  static LqrWeights constant(const Matrix& Q, const Matrix& R,
                             const Matrix& P_T, double horizon_T);
};

struct RiccatiOptions {
  /// Fixed backward RK4 step. Zero selects (T - t0) / 2000.
  double step = 0.0;
  double blowup_threshold = 1e12;
  double symmetry_tolerance = 1e-8;
};

/// Piecewise solution of the Riccati equation with a jump at the nominal
/// event time. P is stored column-major as an n*n vector per sample.
class RiccatiSolution {
 public:
  RiccatiSolution(std::shared_ptr<const JumpLinearization> lin,
                  LqrWeights weights, DenseSegment P_ante,
                  std::optional<DenseSegment> P_post, double max_symmetry_error,
                  double max_R_condition);

  /// t0 of the linearization and the horizon T.
  double t_begin() const { return P_ante_.t_begin(); }
  double t_end() const { return weights_.horizon_T; }
  bool has_reset() const { return P_post_.has_value(); }
  /// Event time inside the horizon; infinity without a reset.
  double tau() const;

  /// Right-continuous at tau; held at P(T) beyond T.
  Matrix P(double t) const;
  /// One-sided value from the ante ([t0, tau]) or post ([tau, T]) piece.
  Matrix P(Mode mode, double t) const;
  /// R^-1 B' P, piecewise as P. Held at K(T) beyond T.
  Matrix K(double t) const;
  Matrix K(Mode mode, double t) const;

  std::optional<Matrix> P_plus_at_tau() const;
  std::optional<Matrix> P_minus_at_tau() const;
  /// max |P- - (I+H)' P+ (I+H)| over the entries; zero without a reset.
  double reset_residual() const;
  /// Largest relative asymmetry seen before re-symmetrisation.
  double max_symmetry_error() const { return max_symmetry_error_; }
  double max_R_condition() const { return max_R_condition_; }

  const DenseSegment& P_ante_segment() const { return P_ante_; }
  const std::optional<DenseSegment>& P_post_segment() const { return P_post_; }
  const JumpLinearization& linearization() const { return *lin_; }
  const LqrWeights& weights() const { return weights_; }

  /// Sample times of both pieces (tau appears once).
  std::vector<double> sample_times() const;

 private:
  std::shared_ptr<const JumpLinearization> lin_;
  LqrWeights weights_;
  DenseSegment P_ante_;
  std::optional<DenseSegment> P_post_;
  double max_symmetry_error_;
  double max_R_condition_;
};

/// Backward solve from P_T at T through the reset P- = (I+H)' P+ (I+H) at
/// tau. Requires t0 < T <= t1 of the linearization span. Throws
/// RiccatiBlowup when |P| exceeds the threshold and NonSymmetricDrift when
/// one step leaves P asymmetric beyond the tolerance.
RiccatiSolution riccati_with_jumps(const JumpLinearization& lin,
                                   const LqrWeights& weights,
                                   const RiccatiOptions& opts = {});

/// A single smooth backward piece on ``interval`` using mode ``mode``,
/// ending at ``P_end`` at interval.t1.
DenseSegment riccati_segment(const JumpLinearization& lin, Mode mode,
                             const LqrWeights& weights, const Matrix& P_end,
                             const TimeSpan& interval,
                             const RiccatiOptions& opts = {});

/// Unpacks a column-major sample into an n x n matrix.
Matrix unvec(const Vector& p, Eigen::Index n);

/// v = policy(mode, t, z) for the jump-linear system.
using LqrPolicy = std::function<Vector(Mode, double, const Vector&)>;

LqrPolicy feedback_policy(const RiccatiSolution& sol);
LqrPolicy open_loop_policy(const InputSignal& v);

/// Simulates z' = A^s z + B^s v with z+ = (I+H) z- at the nominal tau and
/// returns the quadratic cost over [t0, T].
double lqr_cost(const JumpLinearization& lin, const LqrWeights& weights,
                const Vector& z0, const LqrPolicy& policy,
                const IntegrationOptions& opts = {});

enum class SwitchingPolicy { kDetection, kMinNorm };

std::string to_string(SwitchingPolicy policy);
SwitchingPolicy parse_switching_policy(const std::string& name);

using GainSchedule = std::function<Matrix(double)>;

/// Input-free closed loop u = mu + K(t) (alpha_bar^s(t) - x) with the same
/// guard and impulse. Under kDetection the ante field references
/// alpha_bar^a and the post field alpha_bar^p; under kMinNorm both fields
/// use whichever extension is closer to x.
HybridSystem closed_loop_fields(const HybridSystem& sys,
                                const HybridTrajectory& traj,
                                const InputSignal& mu, GainSchedule K,
                                SwitchingPolicy policy = SwitchingPolicy::kDetection);

struct TraceSample {
  double t = 0.0;
  Vector x;
  Vector u;
  Mode plant_branch = Mode::kAnte;
  Mode reference_branch = Mode::kAnte;
  /// min over s of |alpha_bar^s(t) - x(t)|.
  double error = 0.0;
  /// |alpha_bar^ref(t) - x(t)| for the reference actually fed back.
  double reference_error = 0.0;
  /// |alpha(t) - x(t)| against the glued nominal.
  double naive_error = 0.0;
};

struct GainMetric {
  double norm_at_tau_minus = 0.0;
  double max_norm_pre_event = 0.0;
  double mean_norm_pre_event = 0.0;
};

struct ClosedLoopTrace {
  SwitchingPolicy policy = SwitchingPolicy::kMinNorm;
  HybridTrajectory trajectory;
  std::vector<TraceSample> samples;
  /// Plant event time, when the plant jumps inside the span.
  std::optional<double> detection_time;
  /// First sample time at which the post reference is used.
  std::optional<double> reference_switch_time;
  double sup_error = 0.0;
  double sup_naive_error = 0.0;
  std::optional<GainMetric> gain_metric;
};

/// Simulates the closed loop from ``x0`` and samples it on the union of
/// both grids refined inside the event mismatch band.
ClosedLoopTrace track(const HybridSystem& sys, const HybridTrajectory& traj,
                      const InputSignal& mu, const RiccatiSolution& gains,
                      const Vector& x0,
                      SwitchingPolicy policy = SwitchingPolicy::kMinNorm,
                      const IntegrationOptions& opts = {});

/// Same with an arbitrary gain schedule (no gain metric is reported).
ClosedLoopTrace track(const HybridSystem& sys, const HybridTrajectory& traj,
                      const InputSignal& mu, const GainSchedule& K,
                      const Vector& x0, SwitchingPolicy policy,
                      const IntegrationOptions& opts = {});

}  // namespace hybridsens
