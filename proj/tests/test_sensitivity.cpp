#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hybridsens/models.hpp"
#include "hybridsens/sensitivity.hpp"
#include "test_support.hpp"

using namespace hybridsens;
using hybridsens::testing::FreeFall;
using hybridsens::testing::mat2;
using hybridsens::testing::vec;
using Catch::Approx;

namespace {

struct BallRun {
  models::ModelCatalogEntry model;
  HybridTrajectory traj;
  JumpLinearization lin;
};

BallRun ball_run(double e) {
  auto model = models::bouncing_ball(9.81, e);
  auto traj = simulate(model.system, model.x0, model.mu, model.span);
  auto lin = linearize(model.system, traj, model.mu);
  return {std::move(model), std::move(traj), std::move(lin)};
}

InputSignal no_input(const models::ModelCatalogEntry& m) {
  return InputSignal::zero(m.system.n_input(), m.span.t0, m.span.t1);
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("event data of the elastic ball", "[event_data]") {
  const auto run = ball_run(1.0);
  const auto& ev = *run.lin.event;
  const double v = FreeFall{}.v_minus();
  CHECK((ev.f_minus - vec({v, -9.81})).norm() < 1e-10);
  CHECK((ev.f_plus - vec({-v, -9.81})).norm() < 1e-10);
  CHECK(ev.g_dot == Approx(v).epsilon(1e-11));
  CHECK(ev.g_dot == Approx(-4.42945).margin(1e-5));
  CHECK((ev.delta_dot - vec({0.0, 19.62})).norm() < 1e-12);
  CHECK((ev.D1_g - Matrix(vec({1, 0}).transpose())).norm() == 0.0);
  CHECK(ev.D2_g == 0.0);
  CHECK((ev.x_plus - ev.x_minus - run.model.system.impulse(ev.x_minus, ev.tau))
            .norm() == 0.0);
}

TEST_CASE("time-triggered guard has zero state gradient", "[event_data]") {
  auto field = [](const Vector& x, const Vector& u, double) -> Vector {
    return vec({-x[0] + u[0]});
  };
  const HybridSystem sys(
      1, 1, field, field, [](const Vector&, double t) { return t - 0.4; },
      [](const Vector& x, double) { return vec({0.5 * x[0]}); });
  const auto mu = InputSignal::constant(vec({0.2}), 0.0, 1.0);
  const auto traj = simulate(sys, vec({1.0}), mu, {0.0, 1.0});
  const auto ev = event_data(sys, traj, mu);
  CHECK(ev.D1_g.norm() < 1e-9);
  CHECK(ev.g_dot == Approx(1.0).margin(1e-9));
  // Only D1 delta survives: H = 0.5.
  CHECK(jump_gain(ev)(0, 0) == Approx(0.5).margin(1e-8));
}

TEST_CASE("jump gain collapses to zero without jump or switch",
          "[jump_gain][collapse]") {
  models::SwitchedLinearParams p = models::rotation_to_damped_rotation(0.5);
  p.A_post = p.A_ante;
  const auto model = models::switched_linear(p);
  const auto traj = simulate(model.system, model.x0, model.mu, model.span);
  const auto lin = linearize(model.system, traj, model.mu);
  const auto& ev = *lin.event;
  CHECK((ev.f_plus - ev.f_minus).norm() == 0.0);
  CHECK(ev.delta_dot.norm() == 0.0);
  CHECK(lin.H.norm() == 0.0);
}

TEST_CASE("jump gain of the ball matches the closed form", "[jump_gain]") {
  for (double e : {1.0, 0.5}) {
    const auto run = ball_run(e);
    const Matrix expected = *run.model.facts.H;
    CHECK(max_abs(run.lin.H - expected) <= 1e-8 * max_abs(expected));
    const Matrix IH = Matrix::Identity(2, 2) + run.lin.H;
    CHECK(IH(0, 0) == Approx(-e).margin(1e-12));
    CHECK(IH(1, 1) == Approx(-e).margin(1e-12));
    CHECK(IH(0, 1) == 0.0);
    CHECK(IH(1, 0) == Approx(e == 1.0 ? 4.42945 : 3.32209).margin(1e-5));
  }
}

TEST_CASE("jump gain equals the outer-product formula from its fields",
          "[jump_gain][invariant]") {
  const auto model = models::moving_wall_ball(
      9.81, 0.8, models::Wall::sinusoid(0.1, 1.0));
  const auto traj = simulate(model.system, model.x0, model.mu, model.span);
  const auto ev = event_data(model.system, traj, model.mu);
  CHECK(ev.D2_g != 0.0);
  CHECK(ev.D2_delta.norm() > 0.0);
  const Matrix H = jump_gain(ev);
  Matrix manual(2, 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      manual(i, j) =
          (ev.f_plus[i] - ev.f_minus[i] - ev.delta_dot[i]) / ev.g_dot *
              ev.D1_g(0, j) +
          ev.D1_delta(i, j);
    }
  }
  CHECK(max_abs(H - manual) <= 1e-14 * (1.0 + max_abs(manual)));
}

TEST_CASE("pure mode switch gives the saltation matrix", "[jump_gain]") {
  const auto model =
      models::switched_linear(models::rotation_to_damped_rotation(0.5));
  const auto traj = simulate(model.system, model.x0, model.mu, model.span);
  const auto lin = linearize(model.system, traj, model.mu);
  const auto& ev = *lin.event;
  const Matrix saltation = (ev.f_plus - ev.f_minus) * ev.D1_g / ev.g_dot;
  CHECK(max_abs(lin.H - saltation) < 1e-15);
  CHECK(max_abs(lin.H - *model.facts.H) < 1e-8);
}

TEST_CASE("jump gain rejects a near-zero guard rate", "[jump_gain][errors]") {
  auto ev = *ball_run(1.0).lin.event;
  ev.g_dot = 1e-9;
  try {
    jump_gain(ev);
    FAIL("expected TransversalityViolated");
  } catch (const HybridError& err) {
    CHECK(err.kind() == ErrorKind::kTransversalityViolated);
  }
}

TEST_CASE("linearization matrices along the nominal", "[linearize]") {
  SECTION("ball") {
    const auto run = ball_run(1.0);
    for (double t : {0.0, 0.3, 0.7, 1.0}) {
      for (Mode m : {Mode::kAnte, Mode::kPost}) {
        CHECK(run.lin.A(m, t) == mat2(0, 1, 0, 0));
        CHECK(run.lin.B(m, t) == Matrix(vec({0, 1})));
      }
    }
  }
  SECTION("smooth scalar") {
    const auto model = models::smooth_scalar();
    const auto traj = simulate(model.system, model.x0, model.mu, model.span);
    const auto lin = linearize(model.system, traj, model.mu);
    CHECK_FALSE(lin.has_event());
    CHECK(lin.H.norm() == 0.0);
    for (double t : {0.0, 0.5, 1.0}) {
      CHECK(lin.A(Mode::kAnte, t)(0, 0) ==
            Approx(-2.0 / (1.0 + t)).margin(1e-11));
      CHECK(lin.B(Mode::kAnte, t)(0, 0) == 1.0);
    }
    CHECK_THROWS_AS(lin.A(Mode::kPost, 0.5), HybridError);
  }
  SECTION("ball with finite-difference Jacobians") {
    auto field = [](const Vector& x, const Vector& u, double) {
      return vec({x[1], -9.81 + u[0]});
    };
    const HybridSystem sys(
        2, 1, field, field, [](const Vector& x, double) { return x[0]; },
        [](const Vector& x, double) { return vec({0, -2 * x[1]}); });
    const auto model = models::bouncing_ball(9.81, 1.0);
    const auto traj = simulate(sys, model.x0, model.mu, model.span);
    const auto lin = linearize(sys, traj, model.mu);
    for (double t : {0.1, 0.6}) {
      CHECK(max_abs(lin.A(Mode::kAnte, t) - mat2(0, 1, 0, 0)) < 1e-8);
      CHECK(max_abs(lin.A(Mode::kPost, t) - mat2(0, 1, 0, 0)) < 1e-8);
    }
    CHECK(max_abs(lin.H - *model.facts.H) < 1e-6);
  }
}

TEST_CASE("propagate_linearization examples", "[propagate]") {
  const auto run = ball_run(1.0);
  const double tau = run.traj.event_time;
  SECTION("zero perturbation") {
    const auto lt = propagate_linearization(run.lin, Vector::Zero(2),
                                            no_input(run.model));
    CHECK(lt.tau_prime == 0.0);
    for (double t : {0.0, 0.4, tau, 0.9}) {
      CHECK(lt.z(Mode::kAnte, t).norm() == 0.0);
      CHECK(lt.z(Mode::kPost, t).norm() == 0.0);
    }
  }
  SECTION("unit height perturbation") {
    const auto lt =
        propagate_linearization(run.lin, vec({1, 0}), no_input(run.model));
    CHECK((lt.z(Mode::kAnte, tau) - vec({1, 0})).norm() < 1e-14);
    CHECK(lt.tau_prime == Approx(-1.0 / FreeFall{}.v_minus()).epsilon(1e-11));
    CHECK(lt.tau_prime == Approx(0.22576).margin(1e-5));
    const Vector zp = lt.z(Mode::kPost, tau);
    CHECK(zp[0] == Approx(-1.0).margin(1e-12));
    CHECK(zp[1] == Approx(4.42945).margin(1e-5));
    CHECK(lt.z_ante_ext(0.0) == vec({1, 0}));
    CHECK(lt.z_post_ext->t_begin() == 0.0);
    CHECK(lt.z_post_ext->t_end() == 1.0);
    // Elastic reflection mirrors the height perturbation at the bounce.
    CHECK(zp[0] == Approx(-lt.z(Mode::kAnte, tau)[0]).margin(1e-12));
  }
  SECTION("dimension checks") {
    CHECK_THROWS_AS(
        propagate_linearization(run.lin, vec({1}), no_input(run.model)),
        HybridError);
    CHECK_THROWS_AS(propagate_linearization(run.lin, vec({1, 0}),
                                            InputSignal::zero(2, 0, 1)),
                    HybridError);
  }
}

TEST_CASE("approximate examples", "[approximate]") {
  const auto run = ball_run(1.0);
  const auto lt =
      propagate_linearization(run.lin, vec({1, 0}), no_input(run.model));
  SECTION("eps zero is the nominal") {
    const auto ap = approximate(run.traj, lt, 0.0);
    CHECK(ap.switch_time() == run.traj.event_time);
    for (double t : {0.0, 0.2, run.traj.event_time, 0.8, 1.0}) {
      CHECK(ap(t) == run.traj.state(t));
    }
  }
  SECTION("eps 0.01 shifts the switch") {
    const auto ap = approximate(run.traj, lt, 0.01);
    CHECK(ap.switch_time() == Approx(0.45378).margin(1e-5));
    CHECK(ap.switch_time() ==
          Approx(run.traj.event_time + 0.01 * lt.tau_prime).margin(1e-15));
    CHECK_FALSE(ap.switch_outside_span());
    CHECK(ap(0.0) == run.model.x0 + 0.01 * vec({1, 0}));
    const double mid = 0.5 * (run.traj.event_time + ap.switch_time());
    CHECK(ap(mid) == ap.branch(Mode::kAnte, mid));
    CHECK(ap.with_switch(mid, run.traj.event_time) == ap.branch(Mode::kPost, mid));
  }
  SECTION("estimate outside the span is clamped and flagged") {
    const auto ap = approximate(run.traj, lt, 10.0);
    CHECK(ap.switch_outside_span());
    CHECK(ap.estimated_event_time() > 1.0);
    CHECK(ap.switch_time() == 1.0);
    CHECK_NOTHROW(ap(0.99));
  }
}

TEST_CASE("convergence study on the ball", "[convergence]") {
  const auto run = ball_run(1.0);
  const auto lt =
      propagate_linearization(run.lin, vec({1, 0}), no_input(run.model));
  const auto table = convergence_study(run.model.system, run.traj, lt,
                                       run.model.mu, {1e-2, 1e-3, 1e-4});
  REQUIRE(table.rows.size() == 3);
  CHECK_FALSE(table.rows[0].state_slope.has_value());
  CHECK(*table.min_state_slope() >= 1.9);
  CHECK(*table.min_event_slope() >= 1.9);
  for (const auto& r : table.rows) {
    CHECK(r.state_error < 10.0 * r.eps * r.eps + 1e-10);
  }
}

TEST_CASE("convergence study edge cases", "[convergence]") {
  const auto run = ball_run(1.0);
  const auto lt =
      propagate_linearization(run.lin, vec({1, 0}), no_input(run.model));
  SECTION("one eps") {
    const auto table = convergence_study(run.model.system, run.traj, lt,
                                         run.model.mu, {1e-3});
    REQUIRE(table.rows.size() == 1);
    CHECK_FALSE(table.min_state_slope().has_value());
    CHECK_FALSE(table.min_event_slope().has_value());
  }
  SECTION("bad eps lists") {
    for (const std::vector<double>& bad :
         {std::vector<double>{}, {1e-3, 1e-2}, {1e-2, -1e-3}, {1e-3, 1e-3}}) {
      CHECK_THROWS_AS(convergence_study(run.model.system, run.traj, lt,
                                        run.model.mu, bad),
                      HybridError);
    }
  }
  SECTION("perturbed event leaves the span") {
    // Raising the drop height by 4 moves the bounce past t1 = 1.
    try {
      convergence_study(run.model.system, run.traj, lt, run.model.mu, {4.0});
      FAIL("expected NoEventInSpan");
    } catch (const HybridError& e) {
      CHECK(e.kind() == ErrorKind::kNoEventInSpan);
    }
  }
}

TEST_CASE("smooth system reduces to classical sensitivity",
          "[convergence][collapse]") {
  const auto model = models::smooth_scalar();
  const auto traj = simulate(model.system, model.x0, model.mu, model.span);
  const auto lin = linearize(model.system, traj, model.mu);
  const auto v = InputSignal::constant(vec({1.0}), 0.0, 1.0);
  const auto lt = propagate_linearization(lin, vec({0.5}), v);
  CHECK(std::isnan(lt.tau_prime));
  CHECK_FALSE(lt.z_post_ext.has_value());
  const auto table = convergence_study(model.system, traj, lt, model.mu,
                                       {1e-2, 3e-3, 1e-3, 3e-4});
  for (const auto& r : table.rows) {
    CHECK(std::isnan(r.event_time_error));
    if (r.state_slope) CHECK(*r.state_slope == Approx(2.0).margin(0.1));
  }
}

TEST_CASE("reset is linear in the ante sensitivity", "[property]") {
  const auto model =
      models::switched_linear(models::rotation_to_damped_rotation(0.5));
  const auto traj = simulate(model.system, model.x0, model.mu, model.span);
  const auto lin = linearize(model.system, traj, model.mu);
  const auto v0 = InputSignal::zero(1, model.span.t0, model.span.t1);
  const double tau = traj.event_time;
  std::mt19937 rng(1234);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector z1 = vec({normal(rng), normal(rng)});
    const Vector z2 = vec({normal(rng), normal(rng)});
    const double a = normal(rng), b = normal(rng);
    const auto l1 = propagate_linearization(lin, z1, v0);
    const auto l2 = propagate_linearization(lin, z2, v0);
    const auto lc = propagate_linearization(lin, a * z1 + b * z2, v0);
    const Vector combo = a * l1.z(Mode::kPost, tau) + b * l2.z(Mode::kPost, tau);
    CHECK((lc.z(Mode::kPost, tau) - combo).norm() <=
          1e-12 * (1.0 + combo.norm()));
    CHECK(lc.tau_prime == Approx(a * l1.tau_prime + b * l2.tau_prime)
                              .margin(1e-12 * (1 + std::abs(lc.tau_prime))));
  }
}

TEST_CASE("reset happens at the nominal event time", "[property]") {
  const auto run = ball_run(0.7);
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double tau = run.traj.event_time;
  const Matrix IH = Matrix::Identity(2, 2) + run.lin.H;
  for (int trial = 0; trial < 10; ++trial) {
    const Vector z0 = vec({unif(rng), unif(rng)});
    const auto lt = propagate_linearization(run.lin, z0, no_input(run.model));
    CHECK(lt.z_post_ext->contains(tau));
    const auto& times = lt.z_post_ext->times();
    CHECK(std::find(times.begin(), times.end(), tau) != times.end());
    CHECK((lt.z(Mode::kPost, tau) - IH * lt.z(Mode::kAnte, tau)).norm() <=
          1e-14 * (1.0 + lt.z(Mode::kPost, tau).norm()));
  }
}

TEST_CASE("event-time sensitivity scales as the inverse guard rate",
          "[property]") {
  // Drop height h gives v- = -sqrt(2 g h); a unit height perturbation then
  // has tau' = -1 / v-, so tau' * g_dot stays at -1 as grazing approaches.
  for (double h : {1.0, 0.1, 1e-2, 1e-4}) {
    models::BouncingBallParams p;
    p.drop_height = h;
    const auto model = models::bouncing_ball(p);
    const auto traj = simulate(model.system, model.x0, model.mu, model.span);
    const auto lin = linearize(model.system, traj, model.mu);
    const auto lt =
        propagate_linearization(lin, vec({1, 0}), no_input(model));
    CHECK(lt.tau_prime * lin.event->g_dot == Approx(-1.0).epsilon(1e-9));
    CHECK(std::abs(lt.tau_prime) ==
          Approx(1.0 / std::sqrt(2 * 9.81 * h)).epsilon(1e-9));
  }
}
