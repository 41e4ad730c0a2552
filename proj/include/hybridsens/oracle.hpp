#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "hybridsens/simulate.hpp"
#include "hybridsens/tracking.hpp"

// Brute-force reference computations for tests. Nothing here reuses the
// integrator, dense output, event locator or Riccati solver of the library.
namespace hybridsens::oracle {

/// Root of f on [a, b] by bisection until the bracket is below ``tol``.
double bisect(const std::function<double(double)>& f, double a, double b,
              double tol = 1e-14);

struct BruteForceRun {
  bool event_found = false;
  double event_time = 0.0;
  std::vector<double> probe_times;
  std::vector<Vector> probe_states;
};

/// Fixed-step RK4 with ``steps`` uniform steps, probe times inserted as
/// extra nodes, and the event refined by bisection on the length of a
/// partial step taken from the step start.
BruteForceRun brute_force_simulate(const HybridSystem& sys, const Vector& x0,
                                   const std::function<Vector(double)>& input,
                                   const TimeSpan& span,
                                   std::vector<double> probe_times,
                                   int steps = 4000);

struct FdSensitivity {
  std::vector<double> probe_times;
  /// Central difference (x_{+e}(t) - x_{-e}(t)) / (2 e).
  std::vector<Vector> directions;
  /// False where the probe lies within 5 e (1 + |tau'|) of either
  /// perturbed event time.
  std::vector<bool> valid;
  /// (tau_{+e} - tau_{-e}) / (2 e) when both runs have an event.
  std::optional<double> event_time_derivative;
};

/// Central finite differences of the event-detecting simulation in the
/// direction (z0, v). Throws EventLost when exactly one of the two runs
/// has an event.
FdSensitivity fd_sensitivity(const HybridSystem& sys, const Vector& x0,
                             const InputSignal& mu, const Vector& z0,
                             const InputSignal& v, const TimeSpan& span,
                             double eps_fd, std::vector<double> probe_times,
                             int steps = 4000);

struct FineRiccati {
  std::vector<double> times;
  std::vector<Matrix> P;
  std::optional<Matrix> P_plus;
  std::optional<Matrix> P_minus;
  /// Index of P_plus inside ``P`` (the post sample at tau).
  std::size_t tau_index = 0;

  /// Linear interpolation; at a shared tau sample returns the post value.
  Matrix at(double t) const;
};

/// Explicit backward Euler for the Riccati equation with steps of
/// base_step / refinement (base_step zero: (T - t0) / 2000), with the
/// reset (I+H)' P+ (I+H) at tau. Throws RiccatiBlowup past 1e12.
FineRiccati fine_riccati(const JumpLinearization& lin, const LqrWeights& weights,
                         int refinement, double base_step = 0.0);

/// Scalar Riccati -p' = 2 a p - p^2 b^2 / r + q, p(T) = p_T, in closed form.
double scalar_riccati(double a, double b, double q, double r, double p_T,
                      double T, double t);

}  // namespace hybridsens::oracle
