#include "hybridsens/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybridsens::oracle {

double bisect(const std::function<double(double)>& f, double a, double b,
              double tol) {
  double fa = f(a);
  const double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (std::signbit(fa) == std::signbit(fb)) {
    raise(ErrorKind::kNoSignChange, "bisect: no sign change on the bracket");
  }
  for (int i = 0; i < 2000 && b - a > tol; ++i) {
    const double c = 0.5 * (a + b);
    if (c <= a || c >= b) break;
    const double fc = f(c);
    if (fc == 0.0) return c;
    if (std::signbit(fc) == std::signbit(fa)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

namespace {

Vector rk4(const HybridSystem& sys, Mode mode,
           const std::function<Vector(double)>& u, double t, const Vector& x,
           double h) {
  auto f = [&](double s, const Vector& y) { return sys.flow(mode, y, u(s), s); };
  const Vector k1 = f(t, x);
  const Vector k2 = f(t + h / 2, x + h / 2 * k1);
  const Vector k3 = f(t + h / 2, x + h / 2 * k2);
  const Vector k4 = f(t + h, x + h * k3);
  return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

BruteForceRun brute_force_simulate(const HybridSystem& sys, const Vector& x0,
                                   const std::function<Vector(double)>& input,
                                   const TimeSpan& span,
                                   std::vector<double> probe_times, int steps) {
  if (steps < 1 || !(span.t1 > span.t0)) {
    raise(ErrorKind::kInvalidArgument, "brute force: bad span or step count");
  }
  std::sort(probe_times.begin(), probe_times.end());
  for (double p : probe_times) {
    if (p < span.t0 || p > span.t1) {
      raise(ErrorKind::kInvalidArgument, "brute force: probe outside span");
    }
  }
  std::vector<double> nodes;
  const double h = (span.t1 - span.t0) / steps;
  for (int i = 0; i < steps; ++i) nodes.push_back(span.t0 + i * h);
  nodes.push_back(span.t1);
  nodes.insert(nodes.end(), probe_times.begin(), probe_times.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  BruteForceRun run;
  run.probe_times = probe_times;
  std::size_t next_probe = 0;
  auto record = [&](double t, const Vector& x) {
    while (next_probe < probe_times.size() && probe_times[next_probe] == t) {
      run.probe_states.push_back(x);
      ++next_probe;
    }
  };

  Mode mode = Mode::kAnte;
  Vector x = x0;
  const double g0 = sys.guard(x0, span.t0);
  record(span.t0, x);
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const double t = nodes[k];
    const double tn = nodes[k + 1];
    Vector xn = rk4(sys, mode, input, t, x, tn - t);
    if (!run.event_found) {
      const double gn = sys.guard(xn, tn);
      if (gn == 0.0 || std::signbit(gn) != std::signbit(g0)) {
        auto g_at = [&](double s) {
          return sys.guard(rk4(sys, Mode::kAnte, input, t, x, s), t + s);
        };
        const double s = bisect(g_at, 0.0, tn - t, 1e-15);
        const double tau = t + s;
        const Vector x_minus = rk4(sys, Mode::kAnte, input, t, x, s);
        const Vector x_plus = x_minus + sys.impulse(x_minus, tau);
        run.event_found = true;
        run.event_time = tau;
        mode = Mode::kPost;
        xn = tn > tau ? rk4(sys, mode, input, tau, x_plus, tn - tau) : x_plus;
      }
    }
    if (!xn.allFinite()) {
      raise(ErrorKind::kIntegrationFailure, "brute force: non-finite state");
    }
    x = xn;
    record(tn, x);
  }
  return run;
}

FdSensitivity fd_sensitivity(const HybridSystem& sys, const Vector& x0,
                             const InputSignal& mu, const Vector& z0,
                             const InputSignal& v, const TimeSpan& span,
                             double eps_fd, std::vector<double> probe_times,
                             int steps) {
  if (!(eps_fd > 0.0)) raise(ErrorKind::kInvalidArgument, "eps_fd must be > 0");
  auto shifted = [&](double e) {
    return [&mu, &v, e](double t) -> Vector { return mu(t) + e * v(t); };
  };
  const BruteForceRun plus =
      brute_force_simulate(sys, x0 + eps_fd * z0, shifted(eps_fd), span,
                           probe_times, steps);
  const BruteForceRun minus =
      brute_force_simulate(sys, x0 - eps_fd * z0, shifted(-eps_fd), span,
                           probe_times, steps);
  if (plus.event_found != minus.event_found) {
    std::ostringstream os;
    os << "the " << (plus.event_found ? "-eps" : "+eps")
       << " run has no event in span";
    raise(ErrorKind::kEventLost, os.str());
  }

  FdSensitivity out;
  out.probe_times = plus.probe_times;
  double band = 0.0;
  if (plus.event_found) {
    const double d = (plus.event_time - minus.event_time) / (2 * eps_fd);
    out.event_time_derivative = d;
    band = 5 * eps_fd * (1 + std::abs(d));
  }
  for (std::size_t i = 0; i < out.probe_times.size(); ++i) {
    const double t = out.probe_times[i];
    out.directions.push_back((plus.probe_states[i] - minus.probe_states[i]) /
                             (2 * eps_fd));
    out.valid.push_back(!plus.event_found ||
                        (std::abs(t - plus.event_time) > band &&
                         std::abs(t - minus.event_time) > band));
  }
  return out;
}

Matrix FineRiccati::at(double t) const {
  std::size_t lo = 0, hi = times.size() - 1;
  if (P_plus) {
    if (t >= times[tau_index]) {
      lo = tau_index;
    } else {
      hi = tau_index - 1;
    }
  }
  if (t <= times[lo]) return P[lo];
  if (t >= times[hi]) return P[hi];
  const auto it = std::upper_bound(times.begin() + lo, times.begin() + hi + 1, t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin());
  const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return (1 - w) * P[k - 1] + w * P[k];
}

FineRiccati fine_riccati(const JumpLinearization& lin, const LqrWeights& weights,
                         int refinement, double base_step) {
  if (refinement < 1) raise(ErrorKind::kInvalidArgument, "refinement must be >= 1");
  const double t0 = lin.span.t0;
  const double T = std::min(weights.horizon_T, lin.span.t1);
  const double base = base_step > 0.0 ? base_step : (T - t0) / 2000.0;
  const double h = base / refinement;
  const Eigen::Index n = lin.n_state;
  const Eigen::Index m = lin.n_input;

  // Samples in decreasing time order over [a, b], starting from P(b).
  auto piece = [&](Mode mode, double a, double b, Matrix P,
                   std::vector<double>& ts, std::vector<Matrix>& Ps) {
    const auto N = std::max<long>(1, std::lround(std::ceil((b - a) / h - 1e-9)));
    const double hk = (b - a) / static_cast<double>(N);
    ts.push_back(b);
    Ps.push_back(P);
    for (long i = N; i >= 1; --i) {
      const double t = a + i * hk;
      const Matrix A = lin.A(mode, t);
      Matrix rate = A.transpose() * P + P * A + weights.Q(t);
      if (m > 0) {
        const Matrix B = lin.B(mode, t);
        rate -= P * B * weights.R(t).inverse() * B.transpose() * P;
      }
      P = P + hk * rate;
      if (!P.allFinite() || P.norm() > 1e12) {
        raise(ErrorKind::kRiccatiBlowup, "fine Riccati: |P| above 1e12");
      }
      ts.push_back(i == 1 ? a : a + (i - 1) * hk);
      Ps.push_back(P);
    }
  };

  FineRiccati out;
  std::vector<double> ts;
  std::vector<Matrix> Ps;
  const bool reset = lin.has_event() && lin.tau() > t0 && lin.tau() < T;
  if (reset) {
    const double tau = lin.tau();
    std::vector<double> post_t;
    std::vector<Matrix> post_P;
    piece(Mode::kPost, tau, T, weights.P_T, post_t, post_P);
    const Matrix IH = Matrix::Identity(n, n) + lin.H;
    out.P_plus = post_P.back();
    out.P_minus = IH.transpose() * *out.P_plus * IH;
    piece(Mode::kAnte, t0, tau, *out.P_minus, ts, Ps);
    std::reverse(ts.begin(), ts.end());
    std::reverse(Ps.begin(), Ps.end());
    out.tau_index = ts.size();
    ts.insert(ts.end(), post_t.rbegin(), post_t.rend());
    Ps.insert(Ps.end(), post_P.rbegin(), post_P.rend());
  } else {
    piece(Mode::kAnte, t0, T, weights.P_T, ts, Ps);
    std::reverse(ts.begin(), ts.end());
    std::reverse(Ps.begin(), Ps.end());
  }
  out.times = std::move(ts);
  out.P = std::move(Ps);
  return out;
}

double scalar_riccati(double a, double b, double q, double r, double p_T,
                      double T, double t) {
  const double s = T - t;
  const double k = b * b / r;
  if (k == 0.0) {
    if (a == 0.0) return p_T + q * s;
    return (p_T + q / (2 * a)) * std::exp(2 * a * s) - q / (2 * a);
  }
  // In backward time dp/ds = -k (p - p1)(p - p2).
  const double lambda = std::sqrt(a * a + k * q);
  const double p1 = (a + lambda) / k;
  const double p2 = (a - lambda) / k;
  const double C = (p_T - p1) / (p_T - p2);
  const double e = C * std::exp(-2 * lambda * s);
  return (p1 - p2 * e) / (1 - e);
}

}  // namespace hybridsens::oracle
