#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hybridsens/simulate.hpp"

namespace hybridsens::models {

/// Values derived by hand for an entry's documented nominal run.
struct ClosedFormFacts {
  std::optional<double> tau;
  std::optional<Vector> pre_event_state;
  std::optional<Vector> post_event_state;
  std::optional<Matrix> H;
};

struct ModelCatalogEntry {
  std::string name;
  HybridSystem system;
  Vector x0;
  InputSignal mu;
  TimeSpan span;
  ClosedFormFacts facts;
};

/// State (h, v), input u as an added acceleration:
///   f_ante = f_post = (v, -gravity + u),  g = h,  Delta = (0, -(1 + e) v).
struct BouncingBallParams {
  double gravity = 9.81;
  double restitution = 1.0;
  double drop_height = 1.0;
  double t1 = 1.0;
};

ModelCatalogEntry bouncing_ball(const BouncingBallParams& params = {});
ModelCatalogEntry bouncing_ball(double gravity, double restitution);

/// f_ante = A_ante x + B_ante u, f_post = A_post x + B_post u,
/// g = normal . x - offset, Delta = 0.
struct SwitchedLinearParams {
  Matrix A_ante;
  Matrix A_post;
  /// Empty B matrices mean "no input" (n x 0).
  Matrix B_ante;
  Matrix B_post;
  Vector normal;
  double offset = 0.0;
  Vector x0;
  TimeSpan span{0.0, 3.0};
  ClosedFormFacts facts;
};

ModelCatalogEntry switched_linear(const SwitchedLinearParams& params);

/// Harmonic rotation switching to a damped rotation when the state crosses
/// the x-axis downwards. From x0 = (0, 1) the crossing is at t = pi/2,
/// x = (1, 0), and H = [[0, damping], [0, 0]].
SwitchedLinearParams rotation_to_damped_rotation(double damping = 0.5);

/// Wall height w(t) and its first two derivatives.
struct Wall {
  std::function<double(double)> position;
  std::function<double(double)> velocity;
  std::function<double(double)> acceleration;

  static Wall fixed();
  static Wall sinusoid(double amplitude, double frequency);
};

/// Ball hitting a moving wall. g = h - w(t); the impulse reflects the
/// velocity relative to the wall: Delta = (0, -(1 + e)(v - w'(t))), so both
/// D2 g and D2 Delta are non-zero for a moving wall.
ModelCatalogEntry moving_wall_ball(double gravity, double restitution,
                                   Wall wall, double drop_height = 1.0,
                                   double t1 = 1.0);

/// x' = -x^2 + u in both modes with a guard that never vanishes. The
/// nominal run from x0 = 1 is alpha(t) = 1 / (1 + t).
ModelCatalogEntry smooth_scalar();

std::vector<std::string> catalog_names();

}  // namespace hybridsens::models
