#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hybridsens/dense_output.hpp"

namespace hybridsens {

using OdeRhs = std::function<Vector(double t, const Vector& x)>;

/// Uniform grid t0 = s_0 < ... < s_N = t1 with N = ceil((t1 - t0) / step).
/// The last point is exactly t1.
std::vector<double> uniform_grid(double t0, double t1, double step);

/// Integration nodes starting at ``anchor`` and running through every point
/// of ``base`` strictly beyond it in the given direction. Base points closer
/// than a round-off tolerance to the anchor are dropped so no zero-length
/// step can occur.
std::vector<double> nodes_from_anchor(std::span<const double> base,
                                      double anchor, bool forward);

/// ``base`` with ``anchor`` inserted; base points within round-off of the
/// anchor are replaced by it.
std::vector<double> with_anchor(std::span<const double> base, double anchor);

/// Merges two increasing grids, collapsing points that agree to round-off.
std::vector<double> merge_grids(std::span<const double> a,
                                std::span<const double> b);

/// Classical fourth-order Runge-Kutta over ``nodes`` (monotone, increasing
/// or decreasing, nodes[0] is the initial time) with cubic Hermite dense
/// output. Throws IntegrationFailure when the state turns non-finite or
/// exceeds ``blowup_norm``.
DenseSegment integrate_rk4(const OdeRhs& rhs, std::span<const double> nodes,
                           const Vector& x_start, double blowup_norm = 1e100);

/// A single classical RK4 step of length h (h may be negative).
Vector rk4_step(const OdeRhs& rhs, double t, const Vector& x, double h);

}  // namespace hybridsens
