#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hybridsens/types.hpp"

namespace hybridsens {

using VectorField =
    std::function<Vector(const Vector& x, const Vector& u, double t)>;
using GuardFunction = std::function<double(const Vector& x, double t)>;
using ImpulseMap = std::function<Vector(const Vector& x, double t)>;

/// Optional analytic derivatives. Any entry left empty is replaced by
/// central finite differences.
struct Jacobians {
  std::function<Matrix(const Vector&, const Vector&, double)> ante_dx;
  std::function<Matrix(const Vector&, const Vector&, double)> ante_du;
  std::function<Matrix(const Vector&, const Vector&, double)> post_dx;
  std::function<Matrix(const Vector&, const Vector&, double)> post_du;
  /// Gradient of the guard with respect to the state, as a 1 x n row.
  std::function<Matrix(const Vector&, double)> guard_dx;
  std::function<double(const Vector&, double)> guard_dt;
  std::function<Matrix(const Vector&, double)> impulse_dx;
  std::function<Vector(const Vector&, double)> impulse_dt;
};

/// A hybrid system with one state-triggered jump: flow by ``f_ante`` until
/// ``guard`` crosses zero, jump by x+ = x- + impulse(x-, t), then flow by
/// ``f_post``.
///
/// Argument and result dimensions of every callable are checked on each
/// call; a mismatch raises InvalidArgument.
class HybridSystem {
 public:
  HybridSystem(int n_state, int n_input, VectorField f_ante,
               VectorField f_post, GuardFunction guard, ImpulseMap impulse,
               Jacobians jacobians = {});

  int n_state() const { return n_state_; }
  int n_input() const { return n_input_; }

  Vector flow(Mode mode, const Vector& x, const Vector& u, double t) const;
  Vector f_ante(const Vector& x, const Vector& u, double t) const {
    return flow(Mode::kAnte, x, u, t);
  }
  Vector f_post(const Vector& x, const Vector& u, double t) const {
    return flow(Mode::kPost, x, u, t);
  }
  double guard(const Vector& x, double t) const;
  Vector impulse(const Vector& x, double t) const;

  Matrix flow_dx(Mode mode, const Vector& x, const Vector& u, double t) const;
  Matrix flow_du(Mode mode, const Vector& x, const Vector& u, double t) const;
  Matrix guard_dx(const Vector& x, double t) const;
  double guard_dt(const Vector& x, double t) const;
  Matrix impulse_dx(const Vector& x, double t) const;
  Vector impulse_dt(const Vector& x, double t) const;

 private:
  void check_state(const Vector& x, const char* where) const;
  void check_input(const Vector& u, const char* where) const;

  int n_state_;
  int n_input_;
  VectorField f_ante_;
  VectorField f_post_;
  GuardFunction guard_;
  ImpulseMap impulse_;
  Jacobians jac_;
};

/// Central-difference step for component value ``xi``.
inline double fd_step(double xi) { return std::max(1e-6, 1e-6 * std::abs(xi)); }

/// A piecewise-continuous signal t -> R^m on [t_begin, t_end]. Used both for
/// the nominal input and for input perturbation directions.
class InputSignal {
 public:
  InputSignal(int dim, double t_begin, double t_end,
              std::function<Vector(double)> eval);

  static InputSignal zero(int dim, double t_begin, double t_end);
  static InputSignal constant(const Vector& value, double t_begin,
                              double t_end);
  /// Holds ``values[k]`` on [times[k], times[k+1]); the last value holds to
  /// t_end. ``times`` must be increasing and start at t_begin.
  static InputSignal piecewise_constant(std::vector<double> times,
                                        std::vector<Vector> values,
                                        double t_end);

  Vector operator()(double t) const;
  int dim() const { return dim_; }
  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }

  /// a(t) + scale * b(t) on the intersection of the two domains.
  static InputSignal affine(const InputSignal& a, double scale,
                            const InputSignal& b);

 private:
  int dim_;
  double t_begin_;
  double t_end_;
  std::function<Vector(double)> eval_;
};

}  // namespace hybridsens
