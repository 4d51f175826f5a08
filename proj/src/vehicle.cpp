#include "sbamp/vehicle.hpp"

#include <algorithm>
#include <cmath>

#include "sbamp/errors.hpp"

namespace sbamp {

namespace {

struct Deriv {
  double dx, dy, dtheta;
};

Deriv kinematics(double theta, double v, double tan_delta, double wheelbase) {
  return {v * std::cos(theta), v * std::sin(theta), v / wheelbase * tan_delta};
}

}  // namespace

VehicleState step(const VehicleState& state, const DriveCommand& cmd, double dt) {
  const double v = std::clamp(cmd.v, -state.v_max, state.v_max);
  const double delta = std::clamp(cmd.delta, -state.delta_max, state.delta_max);
  const double td = std::tan(delta);

  const Deriv k1 = kinematics(state.theta, v, td, state.wheelbase);
  const Deriv k2 = kinematics(state.theta + 0.5 * dt * k1.dtheta, v, td, state.wheelbase);
  const Deriv k3 = kinematics(state.theta + 0.5 * dt * k2.dtheta, v, td, state.wheelbase);
  const Deriv k4 = kinematics(state.theta + dt * k3.dtheta, v, td, state.wheelbase);

  VehicleState out = state;
  out.x += dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  out.y += dt / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
  out.theta = wrap_angle(state.theta + dt / 6.0 * (k1.dtheta + 2.0 * k2.dtheta +
                                                   2.0 * k3.dtheta + k4.dtheta));
  return out;
}

DriveCommand ds_to_command(const VehicleState& state, const Vec2& desired_velocity,
                           const CommandGains& gains, bool* reverse_latch) {
  const double speed_des = desired_velocity.norm();
  if (speed_des < 1e-12) return {0.0, 0.0};

  const double heading_error =
      wrap_angle(std::atan2(desired_velocity.y, desired_velocity.x) - state.theta);
  const double v_forward = std::min(speed_des, state.v_max);
  const double abs_err = std::abs(heading_error);

  bool reversing = abs_err > gains.reverse_threshold;
  if (reverse_latch != nullptr) {
    if (reversing)
      *reverse_latch = true;
    else if (abs_err < gains.reverse_exit)
      *reverse_latch = false;
    reversing = *reverse_latch;
  }
  if (reversing) {
    // Reversing J-turn: back up while swinging the nose toward the field;
    // the opposite steering sign under v < 0 rotates the heading the short
    // way around.
    const double delta =
        std::clamp(-gains.k_delta * heading_error, -state.delta_max, state.delta_max);
    return {-gains.creep_fraction * v_forward, delta};
  }

  if (abs_err <= kPi / 2.0) {
    const double delta = std::clamp(gains.k_delta * heading_error, -state.delta_max,
                                    state.delta_max);
    return {v_forward, delta};
  }

  // Pointed away: creep forward while steering hard so the turn stays
  // possible (pure cos-gating would stall the nonholonomic vehicle).
  const double factor = std::max(std::cos(heading_error), gains.creep_fraction);
  const double delta = std::clamp(gains.k_delta * heading_error, -state.delta_max,
                                  state.delta_max);
  return {v_forward * factor, delta};
}

VehicleState apply_perturbation(const VehicleState& state, const Perturbation& p,
                                const OccupancyGrid& collision_grid) {
  VehicleState out = state;
  if (const Translate* t = std::get_if<Translate>(&p)) {
    const double dir = state.theta + t->direction;
    out.x += t->distance * std::cos(dir);
    out.y += t->distance * std::sin(dir);
  } else if (const Rotate* r = std::get_if<Rotate>(&p)) {
    out.theta = wrap_angle(state.theta + r->angle);
  } else if (const CornerTrap* c = std::get_if<CornerTrap>(&p)) {
    out.x = c->x;
    out.y = c->y;
    out.theta = wrap_angle(c->theta);
  }
  if (collision_grid.is_occupied(out.position()) || !collision_grid.in_bounds(out.position()))
    throw PerturbationIntoObstacleError("perturbation target pose is occupied");
  return out;
}

RangeScan simulate_scan(const OccupancyGrid& true_map, const VehicleState& state,
                        const ScanParams& params) {
  RangeScan scan;
  scan.position = state.position();
  scan.heading = state.theta;
  scan.max_range = params.max_range;
  scan.angles.reserve(static_cast<size_t>(params.beam_count));
  scan.ranges.reserve(static_cast<size_t>(params.beam_count));

  for (int i = 0; i < params.beam_count; ++i) {
    const double a = params.beam_count > 1
                         ? -params.fov / 2.0 + params.fov * i / (params.beam_count - 1)
                         : 0.0;
    const double dir = state.theta + a;
    const Vec2 end = scan.position + Vec2{std::cos(dir), std::sin(dir)} * params.max_range;

    double range = params.max_range;
    for (const CellIndex& c :
         supercover_cells(scan.position, end, true_map.resolution(), true_map.origin())) {
      if (!true_map.in_bounds(c.x, c.y)) break;
      if (true_map.at(c) == Cell::Occupied) {
        // Report the distance to the hit cell center; integrate_scan maps it
        // back to the same cell.
        range = std::min(params.max_range,
                         distance(scan.position, true_map.cell_to_world(c)));
        break;
      }
    }
    scan.angles.push_back(a);
    scan.ranges.push_back(range);
  }
  return scan;
}

std::optional<DriveCommand> PurePursuit::command(const VehicleState& state,
                                                 double speed) const {
  if (!path_ || path_->waypoints.size() < 2) return std::nullopt;
  const auto& pts = path_->waypoints;

  const PolylineProjection proj = project_on_polyline(pts, state.position());
  if (proj.distance > config_.drop_distance) return std::nullopt;

  const double total = polyline_length(pts);
  const double dist_to_end = distance(state.position(), pts.back());
  if (dist_to_end < 0.15) return DriveCommand{0.0, 0.0};  // buffer consumed: hold

  // Lookahead target along the path.
  const double s_target = std::min(proj.arclength + config_.lookahead, total);
  double s = 0.0;
  Vec2 target = pts.back();
  for (size_t i = 1; i < pts.size(); ++i) {
    const double seg = distance(pts[i - 1], pts[i]);
    if (s + seg >= s_target && seg > 0.0) {
      target = pts[i - 1] + (pts[i] - pts[i - 1]) * ((s_target - s) / seg);
      break;
    }
    s += seg;
  }

  const double alpha =
      wrap_angle(std::atan2(target.y - state.y, target.x - state.x) - state.theta);
  const double ld = std::max(distance(state.position(), target), 1e-6);
  const double delta = std::clamp(std::atan2(2.0 * state.wheelbase * std::sin(alpha), ld),
                                  -state.delta_max, state.delta_max);
  // Taper into the path end instead of orbiting it.
  const double v = dist_to_end < config_.lookahead
                       ? std::min(speed, std::max(0.25, 1.8 * dist_to_end))
                       : speed;
  return DriveCommand{std::min(v, state.v_max), delta};
}

}  // namespace sbamp
