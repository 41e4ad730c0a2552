#pragma once

#include <span>
#include <vector>

#include "hybridsens/types.hpp"

namespace hybridsens {

/// Piecewise cubic Hermite interpolant through (t_i, x_i, dx_i).
///
/// Samples are stored in strictly increasing time order regardless of the
/// direction the generating integration ran in. A segment holding a single
/// sample is valid and evaluates to that sample at its one time point.
class DenseSegment {
 public:
  DenseSegment() = default;
  DenseSegment(std::vector<double> times, std::vector<Vector> states,
               std::vector<Vector> derivatives);

  Vector operator()(double t) const;
  Vector derivative(double t) const;

  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  bool empty() const { return times_.empty(); }
  bool contains(double t) const;
  Eigen::Index dimension() const { return states_.front().size(); }

  std::span<const double> times() const { return times_; }
  const std::vector<Vector>& states() const { return states_; }
  const std::vector<Vector>& derivatives() const { return derivatives_; }

  /// Joins two segments that share their boundary sample (``lower`` ends
  /// where ``upper`` begins). The shared sample is kept once.
  static DenseSegment concatenate(const DenseSegment& lower,
                                  const DenseSegment& upper);

 private:
  std::size_t interval_index(double t) const;

  std::vector<double> times_;
  std::vector<Vector> states_;
  std::vector<Vector> derivatives_;
};

}  // namespace hybridsens
