#pragma once

// Incremental RRT* over the occupancy grid. Deterministic for a fixed seed:
// ties in nearest-neighbor and parent selection always break toward the
// lowest node index, and neighbor sets are processed in index order.

#include <span>
#include <string>
#include <vector>

#include "sbamp/errors.hpp"
#include "sbamp/geometry.hpp"
#include "sbamp/grid.hpp"
#include "sbamp/rng.hpp"

namespace sbamp {

struct PlannerConfig {
  double steer_step = 0.75;     // eta, meters
  double rewire_gamma = 6.0;    // gamma_RRT in r(n) = min(gamma*sqrt(log n / n), eta)
  int max_iterations = 2500;
  double goal_radius = 0.4;
  double goal_bias = 0.05;      // 0 reproduces the pure uniform sampler
  int refine_iterations = 400;  // extra iterations after the first solution
  bool record_best_cost_trace = false;
};

struct TreeNode {
  Vec2 position;
  int parent = -1;  // -1 marks the root
  double cost = 0.0;
};

/// Point kd-tree specialized for incremental RRT* insertion. Queries break
/// distance ties toward the lowest stored index, matching a linear scan.
class KdTree2 {
 public:
  void insert(const Vec2& p);
  size_t size() const { return nodes_.size(); }
  /// Index of the nearest point. Throws EmptyTreeError when empty.
  int nearest(const Vec2& q) const;
  /// Indices within `radius` of q (inclusive), ascending.
  std::vector<int> within_radius(const Vec2& q, double radius) const;

 private:
  struct Node {
    Vec2 p;
    int left = -1, right = -1;
    uint8_t axis = 0;
  };
  void nearest_rec(int node, const Vec2& q, double& best_d2, int& best_idx) const;
  void radius_rec(int node, const Vec2& q, double r2, std::vector<int>& out) const;

  std::vector<Node> nodes_;
  int root_ = -1;
};

class Tree {
 public:
  explicit Tree(const Vec2& root_position);

  int size() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int i) const { return nodes_[static_cast<size_t>(i)]; }
  int root() const { return 0; }

  /// Appends a node; cost = parent cost + edge length. Returns its index.
  int add(const Vec2& position, int parent);
  /// Re-parents `node` and propagates the cost change through its subtree.
  void set_parent(int node, int new_parent);

  int nearest(const Vec2& q) const { return index_.nearest(q); }
  std::vector<int> within_radius(const Vec2& q, double r) const {
    return index_.within_radius(q, r);
  }
  const std::vector<int>& children(int i) const { return children_[static_cast<size_t>(i)]; }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<int>> children_;
  KdTree2 index_;
};

/// Nearest tree node to x (kd-backed, lowest index on ties).
int nearest(const Tree& tree, const Vec2& x);

/// Point at most eta from `from` along the segment toward `toward`.
Vec2 steer(const Vec2& from, const Vec2& toward, double eta);

/// RRT* rewiring step: re-parent any neighbor whose cost strictly improves
/// by routing through new_node over a collision-free segment.
void rewire(Tree& tree, int new_node, std::span<const int> neighbors,
            const OccupancyGrid& grid);

struct WaypointPath {
  std::vector<Vec2> waypoints;
  double cost = 0.0;
  double stamp = 0.0;

  bool same_waypoints(const WaypointPath& o) const { return waypoints == o.waypoints; }
};

double polyline_length(std::span<const Vec2> pts);

/// Sparsify a path by greedily keeping waypoints at least `spacing` apart
/// along the polyline (first and last always kept). Positions are original
/// waypoints, never interpolations.
WaypointPath resample_waypoints(const WaypointPath& path, double spacing);

/// Arclength of the projection of p onto the polyline, and the distance.
struct PolylineProjection {
  double arclength = 0.0;
  double distance = 0.0;
};
PolylineProjection project_on_polyline(std::span<const Vec2> pts, const Vec2& p);

struct PlanResult {
  WaypointPath path;
  int iterations_used = 0;
  int first_solution_iteration = -1;
  int tree_size = 0;
  std::vector<double> best_cost_trace;  // filled when record_best_cost_trace
};

/// Grow an RRT* from start until a node lands within goal_radius of goal,
/// plus refine_iterations of improvement. Throws InvalidEndpointError when an
/// endpoint is not in free space and PlanTimeoutError when no connection is
/// found within max_iterations.
PlanResult plan(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal,
                const PlannerConfig& config, Rng& rng);

std::string path_to_csv(const WaypointPath& path);
WaypointPath path_from_csv(const std::string& text);

}  // namespace sbamp
