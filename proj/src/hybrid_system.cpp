#include "hybridsens/hybrid_system.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybridsens {

namespace {

[[noreturn]] void dimension_error(const char* where, Eigen::Index got,
                                  Eigen::Index want) {
  std::ostringstream os;
  os << where << ": expected dimension " << want << ", got " << got;
  raise(ErrorKind::kInvalidArgument, os.str());
}

void check_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                 const char* where) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << where << ": expected " << rows << "x" << cols << ", got " << m.rows()
       << "x" << m.cols();
    raise(ErrorKind::kInvalidArgument, os.str());
  }
}

}  // namespace

HybridSystem::HybridSystem(int n_state, int n_input, VectorField f_ante,
                           VectorField f_post, GuardFunction guard,
                           ImpulseMap impulse, Jacobians jacobians)
    : n_state_(n_state),
      n_input_(n_input),
      f_ante_(std::move(f_ante)),
      f_post_(std::move(f_post)),
      guard_(std::move(guard)),
      impulse_(std::move(impulse)),
      jac_(std::move(jacobians)) {
  if (n_state_ <= 0) raise(ErrorKind::kInvalidArgument, "n_state must be > 0");
  if (n_input_ < 0) raise(ErrorKind::kInvalidArgument, "n_input must be >= 0");
  if (!f_ante_ || !f_post_ || !guard_ || !impulse_) {
    raise(ErrorKind::kInvalidArgument,
          "hybrid system needs both vector fields, a guard and an impulse map");
  }
}

void HybridSystem::check_state(const Vector& x, const char* where) const {
  if (x.size() != n_state_) dimension_error(where, x.size(), n_state_);
}

void HybridSystem::check_input(const Vector& u, const char* where) const {
  if (u.size() != n_input_) dimension_error(where, u.size(), n_input_);
}

Vector HybridSystem::flow(Mode mode, const Vector& x, const Vector& u,
                          double t) const {
  check_state(x, "vector field state argument");
  check_input(u, "vector field input argument");
  Vector dx = mode == Mode::kAnte ? f_ante_(x, u, t) : f_post_(x, u, t);
  if (dx.size() != n_state_) {
    dimension_error("vector field result", dx.size(), n_state_);
  }
  return dx;
}

double HybridSystem::guard(const Vector& x, double t) const {
  check_state(x, "guard state argument");
  return guard_(x, t);
}

Vector HybridSystem::impulse(const Vector& x, double t) const {
  check_state(x, "impulse state argument");
  Vector d = impulse_(x, t);
  if (d.size() != n_state_) dimension_error("impulse result", d.size(), n_state_);
  return d;
}

Matrix HybridSystem::flow_dx(Mode mode, const Vector& x, const Vector& u,
                             double t) const {
  const auto& analytic = mode == Mode::kAnte ? jac_.ante_dx : jac_.post_dx;
  if (analytic) {
    Matrix J = analytic(x, u, t);
    check_shape(J, n_state_, n_state_, "state Jacobian");
    return J;
  }
  Matrix J(n_state_, n_state_);
  for (int j = 0; j < n_state_; ++j) {
    const double h = fd_step(x[j]);
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (flow(mode, xp, u, t) - flow(mode, xm, u, t)) / (2.0 * h);
  }
  return J;
}

Matrix HybridSystem::flow_du(Mode mode, const Vector& x, const Vector& u,
                             double t) const {
  const auto& analytic = mode == Mode::kAnte ? jac_.ante_du : jac_.post_du;
  if (analytic) {
    Matrix J = analytic(x, u, t);
    check_shape(J, n_state_, n_input_, "input Jacobian");
    return J;
  }
  Matrix J(n_state_, n_input_);
  for (int j = 0; j < n_input_; ++j) {
    const double h = fd_step(u[j]);
    Vector up = u, um = u;
    up[j] += h;
    um[j] -= h;
    J.col(j) = (flow(mode, x, up, t) - flow(mode, x, um, t)) / (2.0 * h);
  }
  return J;
}

Matrix HybridSystem::guard_dx(const Vector& x, double t) const {
  if (jac_.guard_dx) {
    Matrix J = jac_.guard_dx(x, t);
    check_shape(J, 1, n_state_, "guard gradient");
    return J;
  }
  Matrix J(1, n_state_);
  for (int j = 0; j < n_state_; ++j) {
    const double h = fd_step(x[j]);
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J(0, j) = (guard(xp, t) - guard(xm, t)) / (2.0 * h);
  }
  return J;
}

double HybridSystem::guard_dt(const Vector& x, double t) const {
  if (jac_.guard_dt) return jac_.guard_dt(x, t);
  const double h = fd_step(t);
  return (guard(x, t + h) - guard(x, t - h)) / (2.0 * h);
}

Matrix HybridSystem::impulse_dx(const Vector& x, double t) const {
  if (jac_.impulse_dx) {
    Matrix J = jac_.impulse_dx(x, t);
    check_shape(J, n_state_, n_state_, "impulse Jacobian");
    return J;
  }
  Matrix J(n_state_, n_state_);
  for (int j = 0; j < n_state_; ++j) {
    const double h = fd_step(x[j]);
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (impulse(xp, t) - impulse(xm, t)) / (2.0 * h);
  }
  return J;
}

Vector HybridSystem::impulse_dt(const Vector& x, double t) const {
  if (jac_.impulse_dt) {
    Vector d = jac_.impulse_dt(x, t);
    if (d.size() != n_state_) {
      dimension_error("impulse time derivative", d.size(), n_state_);
    }
    return d;
  }
  const double h = fd_step(t);
  return (impulse(x, t + h) - impulse(x, t - h)) / (2.0 * h);
}

InputSignal::InputSignal(int dim, double t_begin, double t_end,
                         std::function<Vector(double)> eval)
    : dim_(dim), t_begin_(t_begin), t_end_(t_end), eval_(std::move(eval)) {
  if (dim_ < 0) raise(ErrorKind::kInvalidArgument, "signal dimension < 0");
  if (!(t_end_ >= t_begin_)) {
    raise(ErrorKind::kInvalidArgument, "signal domain reversed");
  }
  if (!eval_) raise(ErrorKind::kInvalidArgument, "signal needs an evaluator");
}

InputSignal InputSignal::zero(int dim, double t_begin, double t_end) {
  return InputSignal(dim, t_begin, t_end,
                     [dim](double) { return Vector::Zero(dim).eval(); });
}

InputSignal InputSignal::constant(const Vector& value, double t_begin,
                                  double t_end) {
  return InputSignal(static_cast<int>(value.size()), t_begin, t_end,
                     [value](double) { return value; });
}

InputSignal InputSignal::piecewise_constant(std::vector<double> times,
                                            std::vector<Vector> values,
                                            double t_end) {
  if (times.empty() || times.size() != values.size()) {
    raise(ErrorKind::kInvalidArgument,
          "piecewise-constant signal needs one value per breakpoint");
  }
  if (!std::is_sorted(times.begin(), times.end())) {
    raise(ErrorKind::kInvalidArgument, "breakpoints must be increasing");
  }
  const auto dim = static_cast<int>(values.front().size());
  for (const auto& v : values) {
    if (v.size() != dim) {
      raise(ErrorKind::kInvalidArgument, "inconsistent signal dimension");
    }
  }
  const double t_begin = times.front();
  return InputSignal(dim, t_begin, t_end,
                     [times = std::move(times), values = std::move(values)](
                         double t) {
                       auto it = std::upper_bound(times.begin(), times.end(), t);
                       const std::size_t k =
                           it == times.begin() ? 0 : (it - times.begin()) - 1;
                       return values[k];
                     });
}

Vector InputSignal::operator()(double t) const {
  Vector u = eval_(t);
  if (u.size() != dim_) dimension_error("input signal", u.size(), dim_);
  return u;
}

InputSignal InputSignal::affine(const InputSignal& a, double scale,
                                const InputSignal& b) {
  if (a.dim() != b.dim()) {
    raise(ErrorKind::kInvalidArgument, "signals differ in dimension");
  }
  return InputSignal(a.dim(), std::max(a.t_begin(), b.t_begin()),
                     std::min(a.t_end(), b.t_end()),
                     [a, scale, b](double t) -> Vector {
                       if (scale == 0.0) return a(t);
                       return a(t) + scale * b(t);
                     });
}

}  // namespace hybridsens
