#pragma once

// Switching supervisor: reacts to new paths (refit + attractor recenter),
// advances the active waypoint, enforces the average-dwell-time budget by
// deferring switches, and keeps the commanded speed continuous across
// switches with a short magnitude-blend window.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbamp/ds.hpp"
#include "sbamp/geometry.hpp"
#include "sbamp/planner.hpp"

namespace sbamp {

struct SupervisorConfig {
  double dt_c = 1.0 / 60.0;  // control period
  double dt_g = 1.0;         // planner period
  double tau_d = 0.0;        // average dwell time; 0 = min(20*dt_c, dt_g/2)
  int n0 = 1;                // switch-count offset in the dwell bound
  double blend_window = 0.1;
  double waypoint_radius = 0.3;
  bool count_advance_in_dwell = true;

  double nominal_speed = 1.0;
  double demo_spacing = 0.25;
  double eps_stab = 0.1;
  int mixture_k = 4;
  int segment_waypoints = 2;   // chain segments behind the attractor in the demo
  // The supervisor consumes a sparsified waypoint chain (the planner tree is
  // much denser than useful attractor targets).
  double waypoint_spacing = 1.5;
  ds::FitConfig fit;

  double effective_tau_d() const { return tau_d > 0.0 ? tau_d : std::min(20.0 * dt_c, dt_g / 2.0); }
};

struct SupervisorEvent {
  enum class Kind { Switch, Defer, FitFail, WaypointAdvance };
  double t = 0.0;
  Kind kind = Kind::Switch;
  std::string detail;
};

std::string events_to_csv(std::span<const SupervisorEvent> events);

/// N_sigma(t1, t2) <= n0 + (t2 - t1) / tau_d on a sorted switch log.
bool dwell_bound_holds(std::span<const double> switch_times, double t1, double t2,
                       double tau_d, int n0);

struct LyapunovViolation {
  double t_start = 0.0, t_end = 0.0;
  double increase = 0.0;
};

struct LyapunovReport {
  bool interval_decrease = true;  // V decayed across every switch-free interval
  double final_v = 0.0;
  std::vector<LyapunovViolation> violations;
};

struct TimedPoint {
  double t = 0.0;
  Vec2 xi;
};

class Supervisor {
 public:
  explicit Supervisor(const SupervisorConfig& config);

  /// Deliver a freshly planned path. Refits the mixture (warm-started from
  /// the active model), recenters at the first waypoint ahead of the
  /// vehicle, and switches immediately when the dwell budget allows;
  /// otherwise the switch is deferred and the old model stays active. A
  /// fit failure keeps the previous model and logs a FitFail event.
  void on_new_path(const WaypointPath& path, const Vec2& vehicle_position, double t);

  /// Deliver an already-fitted model for a path (the fit normally runs in
  /// the planner-rate task; this is the snapshot handoff). Applies the same
  /// duplicate/defer rules as on_new_path.
  void on_fitted_model(const WaypointPath& path, ds::MixtureModel model,
                       const Vec2& vehicle_position, double t);

  /// One control tick: applies any admissible pending switch, advances the
  /// waypoint when reached, evaluates the field, and blends the command
  /// magnitude across switch instants. Requires at least one delivered model.
  Vec2 control_step(const Vec2& xi, double t);

  /// Average-dwell-time bound over [t1, t2] on the recorded switches.
  bool dwell_admissible(double t1, double t2) const;

  static LyapunovReport lyapunov_monitor(std::span<const TimedPoint> trajectory,
                                         const Vec2& goal,
                                         std::span<const double> switch_times,
                                         double v_tol = 1e-9);

  bool has_model() const { return active_model_.has_value(); }
  const ds::MixtureModel& active_model() const { return *active_model_; }
  const WaypointPath* current_path() const {
    return current_path_.has_value() ? &*current_path_ : nullptr;
  }
  size_t active_waypoint_index() const { return active_waypoint_; }
  Vec2 last_velocity() const { return last_velocity_; }
  const std::vector<double>& switch_times() const { return switch_times_; }
  const std::vector<SupervisorEvent>& events() const { return events_; }
  const SupervisorConfig& config() const { return config_; }

 private:
  struct PendingPath {
    WaypointPath path;
    ds::MixtureModel model;  // fitted, attractor still at segment end
  };

  bool can_switch_at(double t) const;
  void apply_pending(const Vec2& vehicle_position, double t);
  void record_switch(double t, bool count_in_dwell);
  int first_waypoint_ahead(const WaypointPath& path, const Vec2& position) const;

  SupervisorConfig config_;
  std::optional<ds::MixtureModel> active_model_;
  std::optional<WaypointPath> current_path_;
  std::optional<PendingPath> pending_;
  bool pending_defer_logged_ = false;
  size_t active_waypoint_ = 0;
  std::vector<double> switch_times_;
  std::vector<SupervisorEvent> events_;
  Vec2 last_velocity_;
  double blend_start_ = -1.0;
  double blend_from_speed_ = 0.0;
};

}  // namespace sbamp
