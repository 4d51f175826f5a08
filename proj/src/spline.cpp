#include "sbamp/spline.hpp"

#include <algorithm>
#include <cmath>

#include "sbamp/errors.hpp"

namespace sbamp {

CubicSpline2::CubicSpline2(std::span<const Vec2> points) {
  std::vector<Vec2> pts;
  pts.reserve(points.size());
  for (const Vec2& p : points) {
    if (pts.empty() || distance(pts.back(), p) > 1e-12) pts.push_back(p);
  }
  if (pts.size() < 2) throw DegeneratePathError("spline needs >= 2 distinct points");

  knots_.resize(pts.size());
  knots_[0] = 0.0;
  for (size_t i = 1; i < pts.size(); ++i)
    knots_[i] = knots_[i - 1] + distance(pts[i - 1], pts[i]);

  std::vector<double> xs(pts.size()), ys(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    xs[i] = pts[i].x;
    ys[i] = pts[i].y;
  }
  px_ = solve_natural(knots_, xs);
  py_ = solve_natural(knots_, ys);

  // Arclength table: fine subdivision per segment, chord-summed.
  const int kSub = 32;
  arc_params_.push_back(0.0);
  arc_.push_back(0.0);
  Vec2 prev = position(0.0);
  for (size_t seg = 0; seg + 1 < knots_.size(); ++seg) {
    for (int j = 1; j <= kSub; ++j) {
      const double u = knots_[seg] + (knots_[seg + 1] - knots_[seg]) * j / kSub;
      const Vec2 p = position(u);
      arc_params_.push_back(u);
      arc_.push_back(arc_.back() + distance(prev, p));
      prev = p;
    }
  }
}

std::vector<CubicSpline2::Poly> CubicSpline2::solve_natural(
    const std::vector<double>& knots, const std::vector<double>& values) {
  const size_t n = knots.size();
  // Second derivatives M_i with natural ends (M_0 = M_{n-1} = 0), Thomas
  // algorithm on the standard tridiagonal system.
  std::vector<double> m(n, 0.0);
  if (n > 2) {
    const size_t k = n - 2;
    std::vector<double> diag(k), rhs(k), upper(k);
    for (size_t i = 0; i < k; ++i) {
      const double h0 = knots[i + 1] - knots[i];
      const double h1 = knots[i + 2] - knots[i + 1];
      diag[i] = 2.0 * (h0 + h1);
      upper[i] = h1;
      rhs[i] = 6.0 * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
    }
    for (size_t i = 1; i < k; ++i) {
      const double h0 = knots[i + 1] - knots[i];
      const double w = h0 / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for (size_t j = k - 1; j-- > 0;) m[j + 1] = (rhs[j] - upper[j] * m[j + 2]) / diag[j];
  }

  std::vector<Poly> polys(n - 1);
  for (size_t i = 0; i + 1 < n; ++i) {
    const double h = knots[i + 1] - knots[i];
    polys[i].a = values[i];
    polys[i].b = (values[i + 1] - values[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
    polys[i].c = m[i] / 2.0;
    polys[i].d = (m[i + 1] - m[i]) / (6.0 * h);
  }
  return polys;
}

size_t CubicSpline2::segment_of(double u) const {
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), u);
  size_t i = it == knots_.begin() ? 0 : static_cast<size_t>(it - knots_.begin()) - 1;
  return std::min(i, knots_.size() - 2);
}

Vec2 CubicSpline2::position(double u) const {
  const size_t i = segment_of(u);
  const double t = u - knots_[i];
  const Poly& X = px_[i];
  const Poly& Y = py_[i];
  return {X.a + t * (X.b + t * (X.c + t * X.d)), Y.a + t * (Y.b + t * (Y.c + t * Y.d))};
}

Vec2 CubicSpline2::derivative(double u) const {
  const size_t i = segment_of(u);
  const double t = u - knots_[i];
  const Poly& X = px_[i];
  const Poly& Y = py_[i];
  return {X.b + t * (2.0 * X.c + 3.0 * t * X.d), Y.b + t * (2.0 * Y.c + 3.0 * t * Y.d)};
}

double CubicSpline2::param_at_arclength(double s) const {
  if (s <= 0.0) return 0.0;
  if (s >= arc_.back()) return knot_max();
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  const size_t i = static_cast<size_t>(it - arc_.begin());
  const double s0 = arc_[i - 1], s1 = arc_[i];
  const double u0 = arc_params_[i - 1], u1 = arc_params_[i];
  const double w = s1 > s0 ? (s - s0) / (s1 - s0) : 0.0;
  return u0 + w * (u1 - u0);
}

}  // namespace sbamp
