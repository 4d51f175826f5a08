#pragma once

// Independent oracles used by the test suites. These deliberately avoid the
// library's implementation paths: brute-force rasterization via
// segment/rectangle clipping, linear-scan nearest neighbor, 8-connected grid
// Dijkstra, a dense-solve natural spline, and unconstrained affine least
// squares for the fit residual bound.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "sbamp/geometry.hpp"
#include "sbamp/grid.hpp"
#include "sbamp/planner.hpp"

namespace oracles {

using sbamp::CellIndex;
using sbamp::OccupancyGrid;
using sbamp::Vec2;

/// Liang-Barsky: does segment ab intersect the closed axis-aligned rect?
inline bool segment_hits_rect(Vec2 a, Vec2 b, Vec2 lo, Vec2 hi) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - lo.x, hi.x - a.x, a.y - lo.y, hi.y - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
    } else {
      const double r = q[i] / p[i];
      if (p[i] < 0.0)
        t0 = std::max(t0, r);
      else
        t1 = std::min(t1, r);
      if (t0 > t1) return false;
    }
  }
  return true;
}

/// Brute-force supercover: every grid cell in the segment's bounding box
/// whose rectangle the segment touches.
inline std::vector<CellIndex> supercover_bruteforce(Vec2 a, Vec2 b, double res, Vec2 origin,
                                                    int width, int height) {
  std::vector<CellIndex> out;
  const int x0 = std::max(0, static_cast<int>(std::floor((std::min(a.x, b.x) - origin.x) / res)) - 1);
  const int x1 = std::min(width - 1,
                          static_cast<int>(std::floor((std::max(a.x, b.x) - origin.x) / res)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor((std::min(a.y, b.y) - origin.y) / res)) - 1);
  const int y1 = std::min(height - 1,
                          static_cast<int>(std::floor((std::max(a.y, b.y) - origin.y) / res)) + 1);
  for (int cy = y0; cy <= y1; ++cy) {
    for (int cx = x0; cx <= x1; ++cx) {
      const Vec2 lo{origin.x + cx * res, origin.y + cy * res};
      const Vec2 hi{lo.x + res, lo.y + res};
      if (segment_hits_rect(a, b, lo, hi)) out.push_back({cx, cy});
    }
  }
  return out;
}

/// True iff every cell touched by the segment is Free (brute force).
inline bool segment_free_bruteforce(const OccupancyGrid& grid, Vec2 a, Vec2 b) {
  for (const CellIndex& c :
       supercover_bruteforce(a, b, grid.resolution(), grid.origin(), grid.width(), grid.height()))
    if (grid.at(c) != sbamp::Cell::Free) return false;
  return true;
}

/// Linear-scan nearest node, (distance^2, index) lexicographic.
inline int nearest_linear(const sbamp::Tree& tree, const Vec2& q) {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < tree.size(); ++i) {
    const double d2 = (tree.node(i).position - q).norm_sq();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

/// 8-connected Dijkstra between the cells containing start and goal; returns
/// infinity when disconnected. Costs are resolution (straight) and
/// sqrt(2)*resolution (diagonal); diagonal moves require both orthogonal
/// neighbors free (no corner cutting, matching the supercover queries).
inline double grid_dijkstra(const OccupancyGrid& grid, Vec2 start, Vec2 goal) {
  const CellIndex s = grid.world_to_cell(start);
  const CellIndex g = grid.world_to_cell(goal);
  const int w = grid.width(), h = grid.height();
  std::vector<double> dist(static_cast<size_t>(w) * h,
                           std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  auto id = [w](int x, int y) { return y * w + x; };
  dist[static_cast<size_t>(id(s.x, s.y))] = 0.0;
  pq.push({0.0, id(s.x, s.y)});
  const double res = grid.resolution();
  while (!pq.empty()) {
    const auto [d, cur] = pq.top();
    pq.pop();
    const int cx = cur % w, cy = cur / w;
    if (d > dist[static_cast<size_t>(cur)]) continue;
    if (cx == g.x && cy == g.y) return d;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = cx + dx, ny = cy + dy;
        if (!grid.in_bounds(nx, ny) || grid.at(nx, ny) != sbamp::Cell::Free) continue;
        if (dx != 0 && dy != 0 &&
            (grid.at(cx + dx, cy) != sbamp::Cell::Free ||
             grid.at(cx, cy + dy) != sbamp::Cell::Free))
          continue;
        const double nd = d + (dx != 0 && dy != 0 ? res * std::sqrt(2.0) : res);
        if (nd < dist[static_cast<size_t>(id(nx, ny))]) {
          dist[static_cast<size_t>(id(nx, ny))] = nd;
          pq.push({nd, id(nx, ny)});
        }
      }
    }
  }
  return std::numeric_limits<double>::infinity();
}

/// Natural cubic spline second derivatives via dense Gaussian elimination,
/// independent of the library's Thomas solve.
inline std::vector<double> natural_spline_m_dense(const std::vector<double>& t,
                                                  const std::vector<double>& y) {
  const size_t n = t.size();
  std::vector<std::vector<double>> aug(n, std::vector<double>(n + 1, 0.0));
  aug[0][0] = 1.0;
  aug[n - 1][n - 1] = 1.0;
  for (size_t i = 1; i + 1 < n; ++i) {
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    aug[i][i - 1] = h0;
    aug[i][i] = 2.0 * (h0 + h1);
    aug[i][i + 1] = h1;
    aug[i][n] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
  }
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(aug[r][col]) > std::abs(aug[pivot][col])) pivot = r;
    std::swap(aug[col], aug[pivot]);
    for (size_t r = 0; r < n; ++r) {
      if (r == col || aug[r][col] == 0.0) continue;
      const double f = aug[r][col] / aug[col][col];
      for (size_t c = col; c <= n; ++c) aug[r][c] -= f * aug[col][c];
    }
  }
  std::vector<double> m(n);
  for (size_t i = 0; i < n; ++i) m[i] = aug[i][n] / aug[i][i];
  return m;
}

/// Evaluate the natural spline from dense-solved second derivatives.
inline double spline_eval_dense(const std::vector<double>& t, const std::vector<double>& y,
                                const std::vector<double>& m, double u) {
  size_t i = 0;
  while (i + 2 < t.size() && u > t[i + 1]) ++i;
  const double h = t[i + 1] - t[i];
  const double a = (t[i + 1] - u) / h;
  const double b = (u - t[i]) / h;
  return a * y[i] + b * y[i + 1] +
         ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
}

/// Unconstrained affine least squares v ~ A xi + b; returns the mean squared
/// residual. Solves the 3x3 normal equations per output dimension.
inline double affine_ls_mse(const std::vector<Vec2>& xi, const std::vector<Vec2>& v) {
  const size_t n = xi.size();
  double M[3][4] = {};
  auto solve_dim = [&](auto value) {
    for (auto& row : M)
      for (double& e : row) e = 0.0;
    for (size_t s = 0; s < n; ++s) {
      const double phi[3] = {xi[s].x, xi[s].y, 1.0};
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) M[r][c] += phi[r] * phi[c];
        M[r][3] += phi[r] * value(s);
      }
    }
    for (int col = 0; col < 3; ++col) {
      int pivot = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(M[r][col]) > std::abs(M[pivot][col])) pivot = r;
      for (int c = 0; c < 4; ++c) std::swap(M[col][c], M[pivot][c]);
      for (int r = 0; r < 3; ++r) {
        if (r == col || std::abs(M[col][col]) < 1e-12) continue;
        const double f = M[r][col] / M[col][col];
        for (int c = col; c < 4; ++c) M[r][c] -= f * M[col][c];
      }
    }
    // Degenerate columns (collinear data) get a zero coefficient.
    auto coef = [&](int i) { return std::abs(M[i][i]) < 1e-12 ? 0.0 : M[i][3] / M[i][i]; };
    return std::array<double, 3>{coef(0), coef(1), coef(2)};
  };
  const auto cx = solve_dim([&](size_t s) { return v[s].x; });
  const auto cy = solve_dim([&](size_t s) { return v[s].y; });
  double sse = 0.0;
  for (size_t s = 0; s < n; ++s) {
    const double rx = v[s].x - (cx[0] * xi[s].x + cx[1] * xi[s].y + cx[2]);
    const double ry = v[s].y - (cy[0] * xi[s].x + cy[1] * xi[s].y + cy[2]);
    sse += rx * rx + ry * ry;
  }
  return sse / static_cast<double>(n);
}

}  // namespace oracles
