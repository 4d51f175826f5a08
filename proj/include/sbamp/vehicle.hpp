#pragma once

// Ackermann kinematic vehicle, the DS-velocity-to-drive-command law, the
// pure-pursuit baseline follower, perturbation application, and simulated
// range scans against the true map.

#include <optional>
#include <span>
#include <variant>

#include "sbamp/geometry.hpp"
#include "sbamp/grid.hpp"
#include "sbamp/planner.hpp"

namespace sbamp {

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // wrapped to (-pi, pi]
  double wheelbase = 0.33;
  double v_max = 1.0;
  double delta_max = 0.45;

  Vec2 position() const { return {x, y}; }
};

struct DriveCommand {
  double v = 0.0;      // m/s, |v| <= v_max
  double delta = 0.0;  // rad, |delta| <= delta_max
};

/// Integrate the bicycle kinematics (x' = v cos, y' = v sin,
/// theta' = v/L tan delta) with RK4 over dt; theta re-wrapped.
VehicleState step(const VehicleState& state, const DriveCommand& cmd, double dt);

struct CommandGains {
  double k_delta = 2.5;            // heading-proportional steering gain
  double creep_fraction = 0.2;     // forward speed floor while badly misaligned
  double reverse_threshold = 2.0;  // |heading error| that engages backing up
  double reverse_exit = 0.6;       // |heading error| that releases the latch
};

/// Convert a desired planar velocity into (speed, steering). Aligned motion
/// tracks the field speed; misalignment beyond pi/2 drops to a creeping
/// turn, and beyond reverse_threshold the vehicle backs up, swinging the
/// nose toward the field (Ackermann cannot turn in place). With
/// reverse_latch the backing maneuver holds until the error falls below
/// reverse_exit, so corner escapes complete instead of diving back in.
DriveCommand ds_to_command(const VehicleState& state, const Vec2& desired_velocity,
                           const CommandGains& gains, bool* reverse_latch = nullptr);

struct Translate {
  double distance = 0.0;
  double direction = kPi / 2.0;  // body-frame angle; +pi/2 = lateral left
};
struct Rotate {
  double angle = 0.0;
};
struct CornerTrap {
  double x = 0.0, y = 0.0, theta = 0.0;
};
using Perturbation = std::variant<Translate, Rotate, CornerTrap>;

/// Apply a perturbation; throws PerturbationIntoObstacleError when the
/// resulting pose lands in an occupied cell of `collision_grid`.
VehicleState apply_perturbation(const VehicleState& state, const Perturbation& p,
                                const OccupancyGrid& collision_grid);

struct ScanParams {
  int beam_count = 812;
  double fov = 270.0 * kPi / 180.0;
  double max_range = 12.0;
};

/// Ray-cast a scan against the true (uninflated) map from the vehicle pose.
RangeScan simulate_scan(const OccupancyGrid& true_map, const VehicleState& state,
                        const ScanParams& params);

/// Geometric path tracker for the bare-RRT* baseline: tracks the latest
/// path at constant speed, and reports nothing (zero command upstream) when
/// it has no usable path.
class PurePursuit {
 public:
  struct Config {
    double lookahead = 0.55;
    double drop_distance = 0.6;  // path farther than this is stale
    double goal_radius = 0.4;
  };

  explicit PurePursuit(const Config& config) : config_(config) {}

  void set_path(const WaypointPath& path) { path_ = path; }
  void clear_path() { path_.reset(); }
  bool has_path() const { return path_.has_value(); }

  /// Steering command toward the lookahead point, or nullopt when no valid
  /// path exists (missing, stale, or fully consumed).
  std::optional<DriveCommand> command(const VehicleState& state, double speed) const;

 private:
  Config config_;
  std::optional<WaypointPath> path_;
};

}  // namespace sbamp
