#include "hybridsens/models.hpp"

#include <cmath>
#include <numbers>

namespace hybridsens::models {

namespace {

Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

Matrix mat2(double a, double b, double c, double d) {
  return (Matrix(2, 2) << a, b, c, d).finished();
}

void check_ball_params(double gravity, double restitution) {
  if (!(gravity > 0.0)) raise(ErrorKind::kInvalidArgument, "gravity must be > 0");
  if (!(restitution > 0.0 && restitution <= 1.0)) {
    raise(ErrorKind::kInvalidArgument, "restitution must lie in (0, 1]");
  }
}

}  // namespace

ModelCatalogEntry bouncing_ball(const BouncingBallParams& p) {
  check_ball_params(p.gravity, p.restitution);
  if (!(p.drop_height > 0.0)) {
    raise(ErrorKind::kInvalidArgument, "drop height must be > 0");
  }
  const double g = p.gravity;
  const double e = p.restitution;
  auto field = [g](const Vector& x, const Vector& u, double) {
    return vec2(x[1], -g + u[0]);
  };
  Jacobians jac;
  jac.ante_dx = jac.post_dx = [](const Vector&, const Vector&, double) {
    return mat2(0, 1, 0, 0);
  };
  jac.ante_du = jac.post_du = [](const Vector&, const Vector&, double) {
    return Matrix(vec2(0, 1));
  };
  jac.guard_dx = [](const Vector&, double) {
    return Matrix(vec2(1, 0).transpose());
  };
  jac.guard_dt = [](const Vector&, double) { return 0.0; };
  jac.impulse_dx = [e](const Vector&, double) { return mat2(0, 0, 0, -(1 + e)); };
  jac.impulse_dt = [](const Vector&, double) { return Vector::Zero(2).eval(); };

  HybridSystem sys(
      2, 1, field, field, [](const Vector& x, double) { return x[0]; },
      [e](const Vector& x, double) { return vec2(0, -(1 + e) * x[1]); }, jac);

  ModelCatalogEntry entry{"bouncing_ball", std::move(sys),
                          vec2(p.drop_height, 0.0),
                          InputSignal::zero(1, 0.0, p.t1),
                          TimeSpan{0.0, p.t1},
                          {}};
  // Free fall h(t) = h0 - g t^2 / 2 reaches the ground at sqrt(2 h0 / g).
  const double tau = std::sqrt(2.0 * p.drop_height / g);
  if (tau <= p.t1) {
    const double v_minus = -g * tau;
    entry.facts.tau = tau;
    entry.facts.pre_event_state = vec2(0.0, v_minus);
    entry.facts.post_event_state = vec2(0.0, -e * v_minus);
    entry.facts.H =
        mat2(-(1 + e), 0.0, -(1 + e) * g / v_minus, -(1 + e));
  }
  return entry;
}

ModelCatalogEntry bouncing_ball(double gravity, double restitution) {
  BouncingBallParams p;
  p.gravity = gravity;
  p.restitution = restitution;
  return bouncing_ball(p);
}

ModelCatalogEntry switched_linear(const SwitchedLinearParams& p) {
  const auto n = p.A_ante.rows();
  if (n == 0 || p.A_ante.cols() != n || p.A_post.rows() != n ||
      p.A_post.cols() != n) {
    raise(ErrorKind::kInvalidArgument, "mode matrices must be square and equal size");
  }
  if (p.normal.size() != n || p.normal.norm() == 0.0) {
    raise(ErrorKind::kInvalidArgument, "guard normal must be a nonzero n-vector");
  }
  if (p.x0.size() != n) raise(ErrorKind::kInvalidArgument, "x0 dimension mismatch");
  const Matrix B_ante = p.B_ante.size() ? p.B_ante : Matrix(n, 0);
  const Matrix B_post = p.B_post.size() ? p.B_post : Matrix(n, 0);
  if (B_ante.rows() != n || B_post.rows() != n ||
      B_ante.cols() != B_post.cols()) {
    raise(ErrorKind::kInvalidArgument, "input matrices must be n x m, same m");
  }
  const auto m = B_ante.cols();

  const Matrix A1 = p.A_ante, A2 = p.A_post;
  const Vector normal = p.normal;
  const double offset = p.offset;
  Jacobians jac;
  jac.ante_dx = [A1](const Vector&, const Vector&, double) { return A1; };
  jac.post_dx = [A2](const Vector&, const Vector&, double) { return A2; };
  jac.ante_du = [B_ante](const Vector&, const Vector&, double) { return B_ante; };
  jac.post_du = [B_post](const Vector&, const Vector&, double) { return B_post; };
  jac.guard_dx = [normal](const Vector&, double) {
    return Matrix(normal.transpose());
  };
  jac.guard_dt = [](const Vector&, double) { return 0.0; };
  jac.impulse_dx = [n](const Vector&, double) {
    return Matrix::Zero(n, n).eval();
  };
  jac.impulse_dt = [n](const Vector&, double) { return Vector::Zero(n).eval(); };

  HybridSystem sys(
      static_cast<int>(n), static_cast<int>(m),
      [A1, B_ante](const Vector& x, const Vector& u, double) -> Vector {
        return A1 * x + B_ante * u;
      },
      [A2, B_post](const Vector& x, const Vector& u, double) -> Vector {
        return A2 * x + B_post * u;
      },
      [normal, offset](const Vector& x, double) { return normal.dot(x) - offset; },
      [n](const Vector&, double) { return Vector::Zero(n).eval(); }, jac);
  return ModelCatalogEntry{"switched_linear", std::move(sys), p.x0,
                           InputSignal::zero(static_cast<int>(m), p.span.t0,
                                             p.span.t1),
                           p.span, p.facts};
}

SwitchedLinearParams rotation_to_damped_rotation(double damping) {
  SwitchedLinearParams p;
  p.A_ante = mat2(0, 1, -1, 0);
  p.A_post = mat2(-damping, 1, -1, -damping);
  p.B_ante = p.B_post = Matrix(vec2(0, 1));
  p.normal = vec2(0, 1);
  p.offset = 0.0;
  p.x0 = vec2(0, 1);
  p.span = {0.0, 3.0};
  // x(t) = (sin t, cos t) hits x2 = 0 at pi/2 with f- = (0, -1), g_dot = -1,
  // f+ = (-damping, -1); H = (f+ - f-) n^T / g_dot.
  p.facts.tau = std::numbers::pi / 2;
  p.facts.pre_event_state = vec2(1, 0);
  p.facts.post_event_state = vec2(1, 0);
  p.facts.H = mat2(0, damping, 0, 0);
  return p;
}

Wall Wall::fixed() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; },
          [](double) { return 0.0; }};
}

Wall Wall::sinusoid(double amplitude, double frequency) {
  const double a = amplitude, w = frequency;
  return {[a, w](double t) { return a * std::sin(w * t); },
          [a, w](double t) { return a * w * std::cos(w * t); },
          [a, w](double t) { return -a * w * w * std::sin(w * t); }};
}

ModelCatalogEntry moving_wall_ball(double gravity, double restitution,
                                   Wall wall, double drop_height, double t1) {
  check_ball_params(gravity, restitution);
  if (!wall.position || !wall.velocity || !wall.acceleration) {
    raise(ErrorKind::kInvalidArgument, "wall needs position and two derivatives");
  }
  const double g = gravity;
  const double e = restitution;
  auto field = [g](const Vector& x, const Vector& u, double) {
    return vec2(x[1], -g + u[0]);
  };
  Jacobians jac;
  jac.ante_dx = jac.post_dx = [](const Vector&, const Vector&, double) {
    return mat2(0, 1, 0, 0);
  };
  jac.ante_du = jac.post_du = [](const Vector&, const Vector&, double) {
    return Matrix(vec2(0, 1));
  };
  jac.guard_dx = [](const Vector&, double) {
    return Matrix(vec2(1, 0).transpose());
  };
  jac.guard_dt = [wv = wall.velocity](const Vector&, double t) { return -wv(t); };
  jac.impulse_dx = [e](const Vector&, double) { return mat2(0, 0, 0, -(1 + e)); };
  jac.impulse_dt = [e, wa = wall.acceleration](const Vector&, double t) {
    return vec2(0, (1 + e) * wa(t));
  };

  HybridSystem sys(
      2, 1, field, field,
      [wp = wall.position](const Vector& x, double t) { return x[0] - wp(t); },
      [e, wv = wall.velocity](const Vector& x, double t) {
        return vec2(0, -(1 + e) * (x[1] - wv(t)));
      },
      jac);
  return ModelCatalogEntry{"moving_wall_ball", std::move(sys),
                           vec2(drop_height, 0.0), InputSignal::zero(1, 0.0, t1),
                           TimeSpan{0.0, t1}, {}};
}

ModelCatalogEntry smooth_scalar() {
  auto field = [](const Vector& x, const Vector& u, double) -> Vector {
    return (Vector(1) << -x[0] * x[0] + u[0]).finished();
  };
  Jacobians jac;
  jac.ante_dx = jac.post_dx = [](const Vector& x, const Vector&, double) {
    return Matrix::Constant(1, 1, -2.0 * x[0]).eval();
  };
  jac.ante_du = jac.post_du = [](const Vector&, const Vector&, double) {
    return Matrix::Constant(1, 1, 1.0).eval();
  };
  HybridSystem sys(
      1, 1, field, field, [](const Vector&, double) { return 1.0; },
      [](const Vector&, double) { return Vector::Zero(1).eval(); }, jac);
  return ModelCatalogEntry{"smooth_scalar", std::move(sys),
                           Vector::Constant(1, 1.0), InputSignal::zero(1, 0.0, 1.0),
                           TimeSpan{0.0, 1.0}, {}};
}

std::vector<std::string> catalog_names() {
  return {"bouncing_ball", "switched_linear", "moving_wall_ball",
          "smooth_scalar"};
}

}  // namespace hybridsens::models
