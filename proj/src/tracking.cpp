#include "hybridsens/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "hybridsens/rk4.hpp"

namespace hybridsens {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector as_vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

double relative_asymmetry(const Matrix& P) {
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  return (P - P.transpose()).cwiseAbs().maxCoeff() / scale;
}

bool is_symmetric(const Matrix& M, double tol = 1e-12) {
  return M.rows() == M.cols() && relative_asymmetry(M) <= tol;
}

void validate_weights(const JumpLinearization& lin, const LqrWeights& w) {
  const auto n = lin.n_state;
  if (!w.Q || !w.R) raise(ErrorKind::kInvalidArgument, "Q and R must be set");
  if (w.P_T.rows() != n || w.P_T.cols() != n || !is_symmetric(w.P_T)) {
    raise(ErrorKind::kInvalidArgument, "P_T must be a symmetric n x n matrix");
  }
  const double t0 = lin.span.t0;
  const double t1 = lin.span.t1;
  const double slack = 1e-12 * (1.0 + std::abs(t1));
  if (!(w.horizon_T > t0) || w.horizon_T > t1 + slack) {
    std::ostringstream os;
    os << "horizon T = " << w.horizon_T << " must lie in (" << t0 << ", " << t1
       << "]; simulate the nominal over the whole horizon";
    raise(ErrorKind::kInvalidArgument, os.str());
  }
}

// Checks Q and R at t and returns cond(R).
double check_weights_at(const LqrWeights& w, double t, Eigen::Index n,
                        Eigen::Index m) {
  const Matrix Q = w.Q(t);
  if (Q.rows() != n || Q.cols() != n || !is_symmetric(Q)) {
    raise(ErrorKind::kInvalidArgument, "Q(t) must be a symmetric n x n matrix");
  }
  if (m == 0) return 1.0;
  const Matrix R = w.R(t);
  if (R.rows() != m || R.cols() != m || !is_symmetric(R)) {
    raise(ErrorKind::kInvalidArgument, "R(t) must be a symmetric m x m matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(R, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  if (!(lo > 0.0)) raise(ErrorKind::kInvalidArgument, "R(t) must be positive definite");
  return eig.eigenvalues().maxCoeff() / lo;
}

struct Piece {
  DenseSegment segment;
  double max_symmetry_error = 0.0;
  double max_R_condition = 1.0;
};

// Backward RK4 over decreasing ``nodes`` from P_end at nodes.front().
Piece integrate_piece(const JumpLinearization& lin, Mode mode,
                      const LqrWeights& w, const Matrix& P_end,
                      const std::vector<double>& nodes,
                      const RiccatiOptions& opts) {
  const Eigen::Index n = lin.n_state;
  const Eigen::Index m = lin.n_input;
  const OdeRhs rhs = [&](double t, const Vector& p) -> Vector {
    const Matrix P = unvec(p, n);
    const Matrix A = lin.A(mode, t);
    Matrix dP = -(A.transpose() * P + P * A + w.Q(t));
    if (m > 0) {
      const Matrix BtP = lin.B(mode, t).transpose() * P;
      dP += BtP.transpose() * w.R(t).ldlt().solve(BtP);
    }
    return as_vec(dP);
  };

  Piece out;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> derivs;
  times.reserve(nodes.size());
  Vector p = as_vec(P_end);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double t = nodes[k];
    out.max_R_condition =
        std::max(out.max_R_condition, check_weights_at(w, t, n, m));
    times.push_back(t);
    states.push_back(p);
    derivs.push_back(rhs(t, p));
    if (k + 1 == nodes.size()) break;
    Matrix P = unvec(rk4_step(rhs, t, p, nodes[k + 1] - t), n);
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > opts.blowup_threshold) {
      std::ostringstream os;
      os.precision(17);
      os << "|P| exceeded " << opts.blowup_threshold << " at t = "
         << nodes[k + 1];
      raise(ErrorKind::kRiccatiBlowup, os.str());
    }
    const double asym = relative_asymmetry(P);
    out.max_symmetry_error = std::max(out.max_symmetry_error, asym);
    if (asym > opts.symmetry_tolerance) {
      std::ostringstream os;
      os << "relative asymmetry " << asym << " at t = " << nodes[k + 1];
      raise(ErrorKind::kNonSymmetricDrift, os.str());
    }
    P = 0.5 * (P + P.transpose());
    p = as_vec(P);
  }
  std::reverse(times.begin(), times.end());
  std::reverse(states.begin(), states.end());
  std::reverse(derivs.begin(), derivs.end());
  out.segment = DenseSegment(std::move(times), std::move(states), std::move(derivs));
  return out;
}

bool reset_inside(const JumpLinearization& lin, double T) {
  return lin.has_event() && lin.tau() > lin.span.t0 && lin.tau() < T;
}

double resolved_step(double step, double t0, double T) {
  return step > 0.0 ? step : (T - t0) / 2000.0;
}

}  // namespace

LqrWeights LqrWeights::constant(const Matrix& Q, const Matrix& R,
                                const Matrix& P_T, double horizon_T) {
  return {[Q](double) { return Q; }, [R](double) { return R; }, P_T, horizon_T};
}

Matrix unvec(const Vector& p, Eigen::Index n) {
  return Eigen::Map<const Matrix>(p.data(), n, n);
}

RiccatiSolution::RiccatiSolution(std::shared_ptr<const JumpLinearization> lin,
                                 LqrWeights weights, DenseSegment P_ante,
                                 std::optional<DenseSegment> P_post,
                                 double max_symmetry_error,
                                 double max_R_condition)
    : lin_(std::move(lin)),
      weights_(std::move(weights)),
      P_ante_(std::move(P_ante)),
      P_post_(std::move(P_post)),
      max_symmetry_error_(max_symmetry_error),
      max_R_condition_(max_R_condition) {}

double RiccatiSolution::tau() const {
  return P_post_ ? P_post_->t_begin() : kInf;
}

Matrix RiccatiSolution::P(Mode mode, double t) const {
  const double tt = std::min(t, t_end());
  if (mode == Mode::kPost) {
    if (!P_post_) raise(ErrorKind::kInvalidArgument, "Riccati solution has no reset");
    return unvec((*P_post_)(tt), lin_->n_state);
  }
  return unvec(P_ante_(tt), lin_->n_state);
}

Matrix RiccatiSolution::P(double t) const {
  return P(P_post_ && t >= tau() ? Mode::kPost : Mode::kAnte, t);
}

Matrix RiccatiSolution::K(Mode mode, double t) const {
  const double tt = std::min(t, t_end());
  if (lin_->n_input == 0) return Matrix(0, lin_->n_state);
  const Matrix BtP = lin_->B(mode, tt).transpose() * P(mode, tt);
  return weights_.R(tt).ldlt().solve(BtP);
}

Matrix RiccatiSolution::K(double t) const {
  return K(P_post_ && std::min(t, t_end()) >= tau() ? Mode::kPost : Mode::kAnte, t);
}

std::optional<Matrix> RiccatiSolution::P_plus_at_tau() const {
  if (!P_post_) return std::nullopt;
  return unvec(P_post_->states().front(), lin_->n_state);
}

std::optional<Matrix> RiccatiSolution::P_minus_at_tau() const {
  if (!P_post_) return std::nullopt;
  return unvec(P_ante_.states().back(), lin_->n_state);
}

double RiccatiSolution::reset_residual() const {
  if (!P_post_) return 0.0;
  const Matrix IH = Matrix::Identity(lin_->n_state, lin_->n_state) + lin_->H;
  const Matrix expected = IH.transpose() * *P_plus_at_tau() * IH;
  return (*P_minus_at_tau() - expected).cwiseAbs().maxCoeff();
}

std::vector<double> RiccatiSolution::sample_times() const {
  if (!P_post_) return {P_ante_.times().begin(), P_ante_.times().end()};
  return merge_grids(P_ante_.times(), P_post_->times());
}

DenseSegment riccati_segment(const JumpLinearization& lin, Mode mode,
                             const LqrWeights& weights, const Matrix& P_end,
                             const TimeSpan& interval,
                             const RiccatiOptions& opts) {
  if (!(interval.t1 > interval.t0)) {
    raise(ErrorKind::kInvalidArgument, "Riccati interval must have t1 > t0");
  }
  auto nodes = uniform_grid(interval.t0, interval.t1,
                            resolved_step(opts.step, interval.t0, interval.t1));
  std::reverse(nodes.begin(), nodes.end());
  return integrate_piece(lin, mode, weights, P_end, nodes, opts).segment;
}

RiccatiSolution riccati_with_jumps(const JumpLinearization& lin,
                                   const LqrWeights& weights,
                                   const RiccatiOptions& opts) {
  validate_weights(lin, weights);
  const double t0 = lin.span.t0;
  const double T = std::min(weights.horizon_T, lin.span.t1);
  LqrWeights w = weights;
  w.horizon_T = T;
  auto grid = uniform_grid(t0, T, resolved_step(opts.step, t0, T));
  auto shared = std::make_shared<const JumpLinearization>(lin);

  if (!reset_inside(lin, T)) {
    std::reverse(grid.begin(), grid.end());
    Piece ante = integrate_piece(lin, Mode::kAnte, w, w.P_T, grid, opts);
    return RiccatiSolution(shared, w, std::move(ante.segment), std::nullopt,
                           ante.max_symmetry_error, ante.max_R_condition);
  }

  const double tau = lin.tau();
  const auto anchored = with_anchor(grid, tau);
  std::vector<double> post_nodes, ante_nodes;
  for (auto it = anchored.rbegin(); it != anchored.rend(); ++it) {
    if (*it >= tau) post_nodes.push_back(*it);
    if (*it <= tau) ante_nodes.push_back(*it);
  }
  Piece post = integrate_piece(lin, Mode::kPost, w, w.P_T, post_nodes, opts);
  const Matrix P_plus = unvec(post.segment.states().front(), lin.n_state);
  const Matrix IH = Matrix::Identity(lin.n_state, lin.n_state) + lin.H;
  Matrix P_minus = IH.transpose() * P_plus * IH;
  P_minus = 0.5 * (P_minus + P_minus.transpose());
  Piece ante = integrate_piece(lin, Mode::kAnte, w, P_minus, ante_nodes, opts);
  return RiccatiSolution(
      shared, w, std::move(ante.segment), std::move(post.segment),
      std::max(ante.max_symmetry_error, post.max_symmetry_error),
      std::max(ante.max_R_condition, post.max_R_condition));
}

LqrPolicy feedback_policy(const RiccatiSolution& sol) {
  auto shared = std::make_shared<const RiccatiSolution>(sol);
  return [shared](Mode mode, double t, const Vector& z) -> Vector {
    return -shared->K(mode, t) * z;
  };
}

LqrPolicy open_loop_policy(const InputSignal& v) {
  return [v](Mode, double t, const Vector&) { return v(t); };
}

double lqr_cost(const JumpLinearization& lin, const LqrWeights& weights,
                const Vector& z0, const LqrPolicy& policy,
                const IntegrationOptions& opts) {
  validate_weights(lin, weights);
  const Eigen::Index n = lin.n_state;
  const Eigen::Index m = lin.n_input;
  if (z0.size() != n) raise(ErrorKind::kInvalidArgument, "z0 dimension mismatch");
  const double t0 = lin.span.t0;
  const double T = std::min(weights.horizon_T, lin.span.t1);
  const double h = opts.step > 0.0 ? opts.step : (T - t0) / 2000.0;

  auto rhs = [&](Mode mode) -> OdeRhs {
    return [&, mode](double t, const Vector& y) -> Vector {
      const Vector z = y.head(n);
      const Vector v = policy(mode, t, z);
      if (v.size() != m) raise(ErrorKind::kInvalidArgument, "policy output size");
      Vector dy(n + 1);
      dy.head(n) = lin.A(mode, t) * z;
      double running = z.dot(weights.Q(t) * z);
      if (m > 0) {
        dy.head(n) += lin.B(mode, t) * v;
        running += v.dot(weights.R(t) * v);
      }
      dy[n] = 0.5 * running;
      return dy;
    };
  };

  Vector y(n + 1);
  y.head(n) = z0;
  y[n] = 0.0;
  const auto grid = uniform_grid(t0, T, h);
  if (reset_inside(lin, T)) {
    const double tau = lin.tau();
    const auto anchored = with_anchor(grid, tau);
    std::vector<double> ante, post;
    for (double t : anchored) {
      if (t <= tau) ante.push_back(t);
      if (t >= tau) post.push_back(t);
    }
    y = integrate_rk4(rhs(Mode::kAnte), ante, y).states().back();
    y.head(n) = (Matrix::Identity(n, n) + lin.H) * y.head(n);
    y = integrate_rk4(rhs(Mode::kPost), post, y).states().back();
  } else {
    y = integrate_rk4(rhs(Mode::kAnte), grid, y).states().back();
  }
  const Vector zT = y.head(n);
  return y[n] + 0.5 * zT.dot(weights.P_T * zT);
}

std::string to_string(SwitchingPolicy policy) {
  return policy == SwitchingPolicy::kDetection ? "detection" : "min_norm";
}

SwitchingPolicy parse_switching_policy(const std::string& name) {
  if (name == "detection") return SwitchingPolicy::kDetection;
  if (name == "min_norm") return SwitchingPolicy::kMinNorm;
  raise(ErrorKind::kInvalidArgument,
        "unknown switching policy '" + name + "' (detection|min_norm)");
}

namespace {

Mode select_reference(const HybridTrajectory& traj, SwitchingPolicy policy,
                      Mode plant_mode, const Vector& x, double t) {
  if (!traj.post_ext) return Mode::kAnte;
  if (policy == SwitchingPolicy::kDetection) return plant_mode;
  const double ea = (traj.ante_ext(t) - x).norm();
  const double ep = ((*traj.post_ext)(t) - x).norm();
  return ep < ea ? Mode::kPost : Mode::kAnte;
}

}  // namespace

HybridSystem closed_loop_fields(const HybridSystem& sys,
                                const HybridTrajectory& traj,
                                const InputSignal& mu, GainSchedule K,
                                SwitchingPolicy policy) {
  auto plant = std::make_shared<const HybridSystem>(sys);
  auto nominal = std::make_shared<const HybridTrajectory>(traj);
  auto input = std::make_shared<const InputSignal>(mu);
  auto gain = std::make_shared<const GainSchedule>(std::move(K));

  auto field = [=](Mode mode) {
    return [=](const Vector& x, const Vector&, double t) -> Vector {
      const Mode ref = select_reference(*nominal, policy, mode, x, t);
      const Vector u =
          (*input)(t) + (*gain)(t) * (nominal->extended(ref, t) - x);
      return plant->flow(mode, x, u, t);
    };
  };
  Jacobians jac;
  jac.guard_dx = [plant](const Vector& x, double t) { return plant->guard_dx(x, t); };
  jac.guard_dt = [plant](const Vector& x, double t) { return plant->guard_dt(x, t); };
  jac.impulse_dx = [plant](const Vector& x, double t) {
    return plant->impulse_dx(x, t);
  };
  jac.impulse_dt = [plant](const Vector& x, double t) {
    return plant->impulse_dt(x, t);
  };
  return HybridSystem(
      sys.n_state(), 0, field(Mode::kAnte), field(Mode::kPost),
      [plant](const Vector& x, double t) { return plant->guard(x, t); },
      [plant](const Vector& x, double t) { return plant->impulse(x, t); }, jac);
}

ClosedLoopTrace track(const HybridSystem& sys, const HybridTrajectory& traj,
                      const InputSignal& mu, const GainSchedule& K,
                      const Vector& x0, SwitchingPolicy policy,
                      const IntegrationOptions& opts) {
  const HybridSystem closed = closed_loop_fields(sys, traj, mu, K, policy);
  ClosedLoopTrace trace;
  trace.policy = policy;
  trace.trajectory = simulate(closed, x0,
                              InputSignal::zero(0, traj.span.t0, traj.span.t1),
                              traj.span, opts);
  const HybridTrajectory& cl = trace.trajectory;
  if (cl.event_found) trace.detection_time = cl.event_time;

  double lo = std::numeric_limits<double>::quiet_NaN(), hi = lo;
  if (traj.event_found && cl.event_found) {
    lo = std::min(traj.event_time, cl.event_time);
    hi = std::max(traj.event_time, cl.event_time);
  }
  for (double t : comparison_grid(traj.grid, cl.grid, lo, hi)) {
    TraceSample s;
    s.t = t;
    s.plant_branch = cl.branch(t);
    s.x = cl.extended(s.plant_branch, t);
    s.reference_branch = select_reference(traj, policy, s.plant_branch, s.x, t);
    const double ea = (traj.ante_ext(t) - s.x).norm();
    const double ep = traj.post_ext ? ((*traj.post_ext)(t) - s.x).norm() : kInf;
    s.error = std::min(ea, ep);
    s.reference_error = s.reference_branch == Mode::kAnte ? ea : ep;
    s.naive_error = (traj.state(t) - s.x).norm();
    s.u = mu(t) + K(t) * (traj.extended(s.reference_branch, t) - s.x);
    trace.sup_error = std::max(trace.sup_error, s.error);
    trace.sup_naive_error = std::max(trace.sup_naive_error, s.naive_error);
    if (!trace.reference_switch_time && s.reference_branch == Mode::kPost) {
      trace.reference_switch_time = t;
    }
    trace.samples.push_back(std::move(s));
  }
  return trace;
}

ClosedLoopTrace track(const HybridSystem& sys, const HybridTrajectory& traj,
                      const InputSignal& mu, const RiccatiSolution& gains,
                      const Vector& x0, SwitchingPolicy policy,
                      const IntegrationOptions& opts) {
  auto shared = std::make_shared<const RiccatiSolution>(gains);
  ClosedLoopTrace trace =
      track(sys, traj, mu, [shared](double t) { return shared->K(t); }, x0,
            policy, opts);
  if (gains.has_reset()) {
    GainMetric metric;
    const double tau = gains.tau();
    metric.norm_at_tau_minus = gains.K(Mode::kAnte, tau).norm();
    const auto times = gains.P_ante_segment().times();
    double sum = 0.0;
    for (double t : times) {
      const double k = gains.K(Mode::kAnte, t).norm();
      metric.max_norm_pre_event = std::max(metric.max_norm_pre_event, k);
      sum += k;
    }
    metric.mean_norm_pre_event = sum / static_cast<double>(times.size());
    trace.gain_metric = metric;
  }
  return trace;
}

}  // namespace hybridsens
