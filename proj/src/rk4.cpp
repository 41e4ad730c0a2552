#include "hybridsens/rk4.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybridsens {

namespace {

double merge_tolerance(double t) { return 1e-12 * (1.0 + std::abs(t)); }

}  // namespace

std::vector<double> uniform_grid(double t0, double t1, double step) {
  if (!(t1 >= t0)) raise(ErrorKind::kInvalidArgument, "grid span reversed");
  if (t1 == t0) return {t0};
  if (!(step > 0.0) || !std::isfinite(step)) {
    raise(ErrorKind::kInvalidArgument, "grid step must be positive");
  }
  const double ratio = (t1 - t0) / step;
  const auto n = static_cast<std::size_t>(
      std::max(1.0, std::ceil(ratio - 1e-9 * std::max(1.0, ratio))));
  if (n > 50'000'000) {
    raise(ErrorKind::kIntegrationFailure, "step-size underflow: grid too fine");
  }
  std::vector<double> grid(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    grid[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(n);
  }
  grid.back() = t1;
  return grid;
}

std::vector<double> nodes_from_anchor(std::span<const double> base,
                                      double anchor, bool forward) {
  std::vector<double> nodes{anchor};
  const double tol = merge_tolerance(anchor);
  if (forward) {
    for (double t : base) {
      if (t > anchor + tol) nodes.push_back(t);
    }
  } else {
    for (auto it = base.rbegin(); it != base.rend(); ++it) {
      if (*it < anchor - tol) nodes.push_back(*it);
    }
  }
  return nodes;
}

std::vector<double> with_anchor(std::span<const double> base, double anchor) {
  auto lower = nodes_from_anchor(base, anchor, false);
  const auto upper = nodes_from_anchor(base, anchor, true);
  std::reverse(lower.begin(), lower.end());
  lower.insert(lower.end(), upper.begin() + 1, upper.end());
  return lower;
}

std::vector<double> merge_grids(std::span<const double> a,
                                std::span<const double> b) {
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  out.reserve(all.size());
  for (double t : all) {
    if (out.empty() || t - out.back() > merge_tolerance(t)) out.push_back(t);
  }
  return out;
}

Vector rk4_step(const OdeRhs& rhs, double t, const Vector& x, double h) {
  const Vector k1 = rhs(t, x);
  const Vector k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = rhs(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

DenseSegment integrate_rk4(const OdeRhs& rhs, std::span<const double> nodes,
                           const Vector& x_start, double blowup_norm) {
  if (nodes.empty()) {
    raise(ErrorKind::kInvalidArgument, "integration needs at least one node");
  }
  std::vector<double> times(nodes.begin(), nodes.end());
  std::vector<Vector> states;
  std::vector<Vector> derivs;
  states.reserve(nodes.size());
  derivs.reserve(nodes.size());

  Vector x = x_start;
  Vector dx = rhs(times[0], x);
  if (dx.size() != x.size()) {
    raise(ErrorKind::kInvalidArgument, "vector field returned wrong dimension");
  }
  states.push_back(x);
  derivs.push_back(dx);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double h = times[k] - times[k - 1];
    if (h == 0.0) {
      raise(ErrorKind::kIntegrationFailure, "step-size underflow");
    }
    x = rk4_step(rhs, times[k - 1], x, h);
    if (!x.allFinite() || x.norm() > blowup_norm) {
      std::ostringstream os;
      os.precision(17);
      os << "non-finite or unbounded state at t = " << times[k];
      raise(ErrorKind::kIntegrationFailure, os.str());
    }
    states.push_back(x);
    derivs.push_back(rhs(times[k], x));
  }

  if (times.size() > 1 && times.back() < times.front()) {
    std::reverse(times.begin(), times.end());
    std::reverse(states.begin(), states.end());
    std::reverse(derivs.begin(), derivs.end());
  }
  return DenseSegment(std::move(times), std::move(states), std::move(derivs));
}

}  // namespace hybridsens
