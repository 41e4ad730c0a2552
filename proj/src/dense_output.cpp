#include "hybridsens/dense_output.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hybridsens {

namespace {

// Evaluation slightly outside the sampled range is clamped; this absorbs
// round-off in callers that compute the query time arithmetically.
double edge_slack(double a, double b) {
  return 1e-12 * (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace

DenseSegment::DenseSegment(std::vector<double> times,
                           std::vector<Vector> states,
                           std::vector<Vector> derivatives)
    : times_(std::move(times)),
      states_(std::move(states)),
      derivatives_(std::move(derivatives)) {
  if (times_.empty() || times_.size() != states_.size() ||
      times_.size() != derivatives_.size()) {
    raise(ErrorKind::kInvalidArgument,
          "dense segment needs matching, non-empty sample arrays");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      raise(ErrorKind::kInvalidArgument,
            "dense segment times must be strictly increasing");
    }
  }
}

bool DenseSegment::contains(double t) const {
  if (times_.empty()) return false;
  const double slack = edge_slack(t_begin(), t_end());
  return t >= t_begin() - slack && t <= t_end() + slack;
}

std::size_t DenseSegment::interval_index(double t) const {
  if (!contains(t)) {
    std::ostringstream os;
    os.precision(17);
    os << "time " << t << " outside dense segment [" << t_begin() << ", "
       << t_end() << "]";
    raise(ErrorKind::kInvalidArgument, os.str());
  }
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t i = it == times_.begin() ? 0 : (it - times_.begin()) - 1;
  return std::min(i, times_.size() - 2);
}

Vector DenseSegment::operator()(double t) const {
  if (times_.size() == 1) {
    if (!contains(t)) interval_index(t);
    return states_.front();
  }
  const std::size_t i = interval_index(t);
  const double h = times_[i + 1] - times_[i];
  const double s = std::clamp((t - times_[i]) / h, 0.0, 1.0);
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * states_[i] + h10 * h * derivatives_[i] + h01 * states_[i + 1] +
         h11 * h * derivatives_[i + 1];
}

Vector DenseSegment::derivative(double t) const {
  if (times_.size() == 1) {
    if (!contains(t)) interval_index(t);
    return derivatives_.front();
  }
  const std::size_t i = interval_index(t);
  const double h = times_[i + 1] - times_[i];
  const double s = std::clamp((t - times_[i]) / h, 0.0, 1.0);
  const double s2 = s * s;
  const double d00 = (6 * s2 - 6 * s) / h;
  const double d10 = 3 * s2 - 4 * s + 1;
  const double d01 = (-6 * s2 + 6 * s) / h;
  const double d11 = 3 * s2 - 2 * s;
  return d00 * states_[i] + d10 * derivatives_[i] + d01 * states_[i + 1] +
         d11 * derivatives_[i + 1];
}

DenseSegment DenseSegment::concatenate(const DenseSegment& lower,
                                       const DenseSegment& upper) {
  if (lower.empty()) return upper;
  if (upper.empty()) return lower;
  if (std::abs(lower.t_end() - upper.t_begin()) >
      edge_slack(lower.t_end(), upper.t_begin())) {
    raise(ErrorKind::kInvalidArgument,
          "concatenated dense segments must share a boundary sample");
  }
  std::vector<double> times(lower.times_.begin(), lower.times_.end());
  std::vector<Vector> states = lower.states_;
  std::vector<Vector> derivs = lower.derivatives_;
  times.insert(times.end(), upper.times_.begin() + 1, upper.times_.end());
  states.insert(states.end(), upper.states_.begin() + 1, upper.states_.end());
  derivs.insert(derivs.end(), upper.derivatives_.begin() + 1,
                upper.derivatives_.end());
  return DenseSegment(std::move(times), std::move(states), std::move(derivs));
}

}  // namespace hybridsens
