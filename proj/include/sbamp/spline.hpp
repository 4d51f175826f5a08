#pragma once

// Natural cubic spline through 2D waypoints, chord-length parameterized,
// with an arclength lookup table for even spacing along the curve.

#include <span>
#include <vector>

#include "sbamp/geometry.hpp"

namespace sbamp {

class CubicSpline2 {
 public:
  /// Fits x(u), y(u) through the points with natural end conditions. Knots
  /// are cumulative chord lengths; consecutive duplicate points are dropped.
  /// Throws DegeneratePathError when fewer than two distinct points remain.
  explicit CubicSpline2(std::span<const Vec2> points);

  double knot_max() const { return knots_.back(); }
  Vec2 position(double u) const;
  Vec2 derivative(double u) const;

  double total_arclength() const { return arc_.back(); }
  /// Parameter u such that the arclength from 0 to u is s (clamped).
  double param_at_arclength(double s) const;

 private:
  struct Poly {  // segment cubic: a + b*t + c*t^2 + d*t^3, t = u - knot[i]
    double a, b, c, d;
  };
  size_t segment_of(double u) const;
  static std::vector<Poly> solve_natural(const std::vector<double>& knots,
                                         const std::vector<double>& values);

  std::vector<double> knots_;
  std::vector<Poly> px_, py_;
  std::vector<double> arc_params_;  // fine parameter grid
  std::vector<double> arc_;         // cumulative chord length on that grid
};

}  // namespace sbamp
