#include "sbamp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sbamp/strings.hpp"

namespace sbamp {

void KdTree2::insert(const Vec2& p) {
  const int idx = static_cast<int>(nodes_.size());
  nodes_.push_back({p, -1, -1, 0});
  if (root_ < 0) {
    root_ = idx;
    return;
  }
  int cur = root_;
  for (;;) {
    Node& n = nodes_[static_cast<size_t>(cur)];
    const double qv = n.axis == 0 ? p.x : p.y;
    const double nv = n.axis == 0 ? n.p.x : n.p.y;
    int& child = qv < nv ? n.left : n.right;
    if (child < 0) {
      child = idx;
      nodes_[static_cast<size_t>(idx)].axis = static_cast<uint8_t>((n.axis + 1) & 1);
      return;
    }
    cur = child;
  }
}

int KdTree2::nearest(const Vec2& q) const {
  if (nodes_.empty()) throw EmptyTreeError("nearest() on empty tree");
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_idx = -1;
  nearest_rec(root_, q, best_d2, best_idx);
  return best_idx;
}

void KdTree2::nearest_rec(int node, const Vec2& q, double& best_d2, int& best_idx) const {
  if (node < 0) return;
  const Node& n = nodes_[static_cast<size_t>(node)];
  const double d2 = (n.p - q).norm_sq();
  // Lexicographic (distance, index) ordering keeps ties deterministic and
  // identical to the linear-scan oracle.
  if (d2 < best_d2 || (d2 == best_d2 && node < best_idx)) {
    best_d2 = d2;
    best_idx = node;
  }
  const double qv = n.axis == 0 ? q.x : q.y;
  const double nv = n.axis == 0 ? n.p.x : n.p.y;
  const double diff = qv - nv;
  const int near_child = diff < 0.0 ? n.left : n.right;
  const int far_child = diff < 0.0 ? n.right : n.left;
  nearest_rec(near_child, q, best_d2, best_idx);
  if (diff * diff <= best_d2) nearest_rec(far_child, q, best_d2, best_idx);
}

std::vector<int> KdTree2::within_radius(const Vec2& q, double radius) const {
  std::vector<int> out;
  if (root_ >= 0 && radius >= 0.0) radius_rec(root_, q, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

void KdTree2::radius_rec(int node, const Vec2& q, double r2, std::vector<int>& out) const {
  if (node < 0) return;
  const Node& n = nodes_[static_cast<size_t>(node)];
  if ((n.p - q).norm_sq() <= r2) out.push_back(node);
  const double qv = n.axis == 0 ? q.x : q.y;
  const double nv = n.axis == 0 ? n.p.x : n.p.y;
  const double diff = qv - nv;
  const int near_child = diff < 0.0 ? n.left : n.right;
  const int far_child = diff < 0.0 ? n.right : n.left;
  radius_rec(near_child, q, r2, out);
  if (diff * diff <= r2) radius_rec(far_child, q, r2, out);
}

Tree::Tree(const Vec2& root_position) {
  nodes_.push_back({root_position, -1, 0.0});
  children_.emplace_back();
  index_.insert(root_position);
}

int Tree::add(const Vec2& position, int parent) {
  const int idx = static_cast<int>(nodes_.size());
  const double cost = nodes_[static_cast<size_t>(parent)].cost +
                      distance(nodes_[static_cast<size_t>(parent)].position, position);
  nodes_.push_back({position, parent, cost});
  children_.emplace_back();
  children_[static_cast<size_t>(parent)].push_back(idx);
  index_.insert(position);
  return idx;
}

void Tree::set_parent(int node, int new_parent) {
  TreeNode& n = nodes_[static_cast<size_t>(node)];
  auto& old_siblings = children_[static_cast<size_t>(n.parent)];
  old_siblings.erase(std::find(old_siblings.begin(), old_siblings.end(), node));
  n.parent = new_parent;
  children_[static_cast<size_t>(new_parent)].push_back(node);

  const double new_cost = nodes_[static_cast<size_t>(new_parent)].cost +
                          distance(nodes_[static_cast<size_t>(new_parent)].position, n.position);
  const double delta = new_cost - n.cost;
  // Propagate the cost change through the whole subtree.
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    nodes_[static_cast<size_t>(cur)].cost += delta;
    for (int c : children_[static_cast<size_t>(cur)]) stack.push_back(c);
  }
}

int nearest(const Tree& tree, const Vec2& x) { return tree.nearest(x); }

Vec2 steer(const Vec2& from, const Vec2& toward, double eta) {
  const Vec2 d = toward - from;
  const double n = d.norm();
  if (n <= eta) return toward;
  return from + d * (eta / n);
}

void rewire(Tree& tree, int new_node, std::span<const int> neighbors,
            const OccupancyGrid& grid) {
  const TreeNode& nn = tree.node(new_node);
  for (int j : neighbors) {
    if (j == new_node) continue;
    const TreeNode& nb = tree.node(j);
    if (tree.node(new_node).parent == j) continue;
    const double candidate = nn.cost + distance(nn.position, nb.position);
    if (candidate + 1e-12 >= nb.cost) continue;
    if (!grid.segment_free(nn.position, nb.position)) continue;
    tree.set_parent(j, new_node);
  }
}

double polyline_length(std::span<const Vec2> pts) {
  double len = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) len += distance(pts[i - 1], pts[i]);
  return len;
}

WaypointPath resample_waypoints(const WaypointPath& path, double spacing) {
  if (path.waypoints.size() <= 2 || spacing <= 0.0) return path;
  WaypointPath out;
  out.stamp = path.stamp;
  out.waypoints.push_back(path.waypoints.front());
  double since_kept = 0.0;
  for (size_t i = 1; i + 1 < path.waypoints.size(); ++i) {
    since_kept += distance(path.waypoints[i - 1], path.waypoints[i]);
    if (since_kept + 1e-12 >= spacing) {
      out.waypoints.push_back(path.waypoints[i]);
      since_kept = 0.0;
    }
  }
  out.waypoints.push_back(path.waypoints.back());
  out.cost = polyline_length(out.waypoints);
  return out;
}

PolylineProjection project_on_polyline(std::span<const Vec2> pts, const Vec2& p) {
  PolylineProjection best{0.0, std::numeric_limits<double>::infinity()};
  double arc = 0.0;
  if (pts.size() == 1) return {0.0, distance(pts[0], p)};
  for (size_t i = 1; i < pts.size(); ++i) {
    const Vec2 a = pts[i - 1];
    const Vec2 b = pts[i];
    const Vec2 ab = b - a;
    const double len2 = ab.norm_sq();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + ab * t;
    const double d = distance(p, q);
    if (d < best.distance) best = {arc + t * std::sqrt(len2), d};
    arc += std::sqrt(len2);
  }
  return best;
}

PlanResult plan(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal,
                const PlannerConfig& config, Rng& rng) {
  if (!grid.is_free(start)) throw InvalidEndpointError("start is not in free space");
  if (!grid.is_free(goal)) throw InvalidEndpointError("goal is not in free space");

  const FreeSampler sampler(grid);
  Tree tree(start);
  std::vector<int> goal_nodes;
  PlanResult result;

  auto best_goal_node = [&]() -> int {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int g : goal_nodes) {
      const double c = tree.node(g).cost;
      if (c < best_cost) {
        best_cost = c;
        best = g;
      }
    }
    return best;
  };

  for (int it = 1; it <= config.max_iterations; ++it) {
    result.iterations_used = it;

    const Vec2 target =
        (config.goal_bias > 0.0 && rng.uniform01() < config.goal_bias) ? goal
                                                                       : sampler.sample(rng);
    const int near_idx = tree.nearest(target);
    const Vec2 near_pos = tree.node(near_idx).position;
    const Vec2 new_pos = steer(near_pos, target, config.steer_step);

    if (!(new_pos == near_pos) && grid.segment_free(near_pos, new_pos)) {
      const int n = tree.size();
      const double radius = std::min(
          config.rewire_gamma *
              std::sqrt(std::log(static_cast<double>(n)) / static_cast<double>(n)),
          config.steer_step);
      const std::vector<int> neighbors = tree.within_radius(new_pos, radius);

      // Choose-parent among the neighborhood (plus the nearest node).
      int parent = near_idx;
      double best_cost = tree.node(near_idx).cost + distance(near_pos, new_pos);
      for (int j : neighbors) {
        const double c = tree.node(j).cost + distance(tree.node(j).position, new_pos);
        if (c + 1e-12 < best_cost && grid.segment_free(tree.node(j).position, new_pos)) {
          best_cost = c;
          parent = j;
        }
      }
      const int new_idx = tree.add(new_pos, parent);
      rewire(tree, new_idx, neighbors, grid);

      if (distance(new_pos, goal) <= config.goal_radius) {
        goal_nodes.push_back(new_idx);
        if (result.first_solution_iteration < 0) result.first_solution_iteration = it;
      }
    }

    if (config.record_best_cost_trace) {
      const int bg = best_goal_node();
      result.best_cost_trace.push_back(bg < 0 ? std::numeric_limits<double>::infinity()
                                              : tree.node(bg).cost);
    }

    if (result.first_solution_iteration > 0 &&
        it >= result.first_solution_iteration + config.refine_iterations)
      break;
  }

  result.tree_size = tree.size();
  const int bg = best_goal_node();
  if (bg < 0)
    throw PlanTimeoutError("no path within iteration budget", result.iterations_used);

  std::vector<Vec2> waypoints;
  for (int cur = bg; cur >= 0; cur = tree.node(cur).parent)
    waypoints.push_back(tree.node(cur).position);
  std::reverse(waypoints.begin(), waypoints.end());
  result.path.cost = tree.node(bg).cost;
  // Finish at the exact goal when the closing segment is free.
  if (!(waypoints.back() == goal) && grid.segment_free(waypoints.back(), goal)) {
    result.path.cost += distance(waypoints.back(), goal);
    waypoints.push_back(goal);
  }
  result.path.waypoints = std::move(waypoints);
  return result;
}

std::string path_to_csv(const WaypointPath& path) {
  std::string out = "# cost=" + format_double(path.cost) + " stamp=" + format_double(path.stamp) + "\n";
  out += "index,x,y\n";
  for (size_t i = 0; i < path.waypoints.size(); ++i) {
    out += std::to_string(i) + "," + format_double(path.waypoints[i].x) + "," +
           format_double(path.waypoints[i].y) + "\n";
  }
  return out;
}

WaypointPath path_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  WaypointPath path;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto cpos = line.find("cost=");
      const auto spos = line.find("stamp=");
      if (cpos != std::string::npos)
        path.cost = parse_double(line.substr(cpos + 5, line.find(' ', cpos + 5) - cpos - 5), line_no);
      if (spos != std::string::npos) path.stamp = parse_double(line.substr(spos + 6), line_no);
      continue;
    }
    if (line.rfind("index,", 0) == 0) continue;
    std::istringstream row(line);
    std::string idx, xs, ys;
    if (!std::getline(row, idx, ',') || !std::getline(row, xs, ',') || !std::getline(row, ys))
      throw ParseError("malformed path row", line_no);
    path.waypoints.push_back({parse_double(xs, line_no), parse_double(ys, line_no)});
  }
  return path;
}

}  // namespace sbamp
