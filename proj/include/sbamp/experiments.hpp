#pragma once

// Scenario definitions, the fixed-step co-simulation loop (planner at dt_g
// with a simulated latency model, controller at dt_c), perturbation
// schedules, metric computation, and the three desk-scale experiments.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sbamp/grid.hpp"
#include "sbamp/planner.hpp"
#include "sbamp/supervisor.hpp"
#include "sbamp/vehicle.hpp"

namespace sbamp {

enum class Mode { BareRrt, Sbamp };
const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct PerturbationSpec {
  // Fires when t >= trigger_time (if >= 0) or when the vehicle crosses
  // x >= trigger_x (if finite). With repeat_period > 0 the time trigger
  // re-fires periodically (the lateral-shove protocol of experiment 1).
  double trigger_time = -1.0;
  double trigger_x = std::numeric_limits<double>::quiet_NaN();
  double repeat_period = 0.0;
  // Interpret a Translate's distance as a target lateral offset from the
  // route line y = start.y instead of a displacement from the current pose
  // (the fixed-straightaway shove of experiment 1).
  bool absolute_lateral = false;
  Perturbation perturbation;
  // Randomized schedules nudge a translate that would land in an obstacle
  // instead of aborting the run.
  bool clamp_to_free = false;
};

struct ObstacleSpawnSpec {
  double trigger_time = -1.0;
  double ahead_distance = 2.0;   // along the active path from the vehicle
  double lateral_offset = 0.0;   // signed offset from the path point
  double half_size = 0.15;
};

struct Scenario {
  std::string name;
  OccupancyGrid base_map;  // true static map, uninflated
  Vec2 start;
  double start_theta = 0.0;
  Vec2 goal;

  double dt_c = 1.0 / 60.0;
  double dt_g = 1.0;
  double nominal_speed = 1.0;
  double duration = 30.0;
  double inflation_radius = 0.25;   // planning grid
  double collision_radius = 0.15;   // physical collision check
  double corridor_tolerance = 0.5;  // recovery corridor around the nominal path

  std::vector<PerturbationSpec> perturbations;
  std::vector<ObstacleSpawnSpec> obstacle_spawns;
  std::vector<uint64_t> seeds{1};
  int run_count = 20;
  std::vector<double> exp1_dd{0.0, 1.5, 2.5, 3.5, 4.5};  // default teleport sweep

  PlannerConfig planner;
  SupervisorConfig supervisor;  // dt_c/dt_g/speed are overwritten from above
  CommandGains gains;
  PurePursuit::Config follower;
  VehicleState vehicle;  // pose fields are overwritten from start
  ScanParams scan;

  // Simulated planning latency: seconds per consumed iteration. 0 means
  // "calibrate so the nominal plan takes planner_utilization * dt_g".
  double latency_per_iteration = 0.0;
  double planner_utilization = 0.55;

  void validate() const;  // dt_c divides dt_g, run_count >= 1, ...
};

/// One planning run on the scenario's initial grid; used to pin the latency
/// model so the nominal scenario replans at the configured dt_g.
double calibrate_latency(const Scenario& scenario);

constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct RunMetrics {
  double f_plan_hz = 0.0;        // successful replans / sim time
  bool recovery = false;
  double time_to_recovery = kInfinity;
  int collisions = 0;
  double min_command_rate_hz = 0.0;  // referenced control ticks per second
  double final_goal_error = kInfinity;
  bool reached_goal = false;
  double mean_speed = 0.0;
  double elapsed = 0.0;
  int replans_success = 0;
  int replans_failed = 0;
};

struct TrajectoryRow {
  double t, x, y, theta, v_cmd, delta_cmd;
};

struct RunLogs {
  std::vector<TrajectoryRow> trajectory;
  std::vector<SupervisorEvent> supervisor_events;
  std::vector<std::pair<double, Vec2>> ds_commands;  // sbamp mode only
  std::vector<double> plan_success_times;
  WaypointPath nominal_path;  // first successful plan
};

struct RunResult {
  RunMetrics metrics;
  RunLogs logs;
};

RunResult run_scenario(const Scenario& scenario, Mode mode, uint64_t seed);

std::string trajectory_to_csv(std::span<const TrajectoryRow> rows);

// ---- Experiments ----------------------------------------------------------

struct Experiment1Row {
  Mode mode;
  double delta_d;
  int run;
  double f_plan_hz;
  double mean_v_mps;
  double cmd_rate_hz;
};

struct Experiment1Result {
  std::vector<Experiment1Row> rows;
  std::string csv;       // mode,delta_d,run,f_plan_hz,mean_v_mps
  std::string fig5_csv;  // delta_d,mode,rate_hz (bare: f_plan, sbamp: command rate)
  double mean_f_plan(Mode mode, double delta_d) const;
  double mean_cmd_rate(Mode mode, double delta_d) const;
};

/// Lateral-teleport sweep on the straightaway scenario, N runs per (mode, dd).
Experiment1Result experiment1(const Scenario& scenario, std::span<const double> dd_list,
                              int n_runs);

struct Experiment2Point {
  Mode mode;
  std::string disturbance;
  double magnitude;
  bool recovered;  // over all seeds
  double t_recover_s;
  int collisions;
};

struct Experiment2Result {
  double threshold = 0.0;  // largest magnitude with recovery over all seeds
  std::vector<Experiment2Point> points;
  std::string csv;  // mode,disturbance,magnitude,recovered,t_recover_s,collisions
};

enum class Disturbance { Translate, Rotate, CornerTrap };
const char* disturbance_name(Disturbance d);
Disturbance disturbance_from_name(const std::string& name);

/// Binary search for the largest disturbance magnitude every seed recovers
/// from. The scenario must be the matching exp2 corridor variant.
Experiment2Result experiment2(const Scenario& scenario, Mode mode, Disturbance disturbance);

struct Experiment3Row {
  uint64_t seed;
  bool recovered;
  int collisions;
  double t_recover_s;
};

struct Experiment3Result {
  std::vector<Experiment3Row> rows;
  double recovery_rate = 0.0;
  int collisions_on_recovered = 0;
  std::string csv;  // seed,recovered,collisions,t_recover_s
};

/// Randomized perturbation stress test (translate <= 1 m, rotate <= pi/2,
/// one random obstacle) on the loop scenario, sbamp mode, one run per seed.
Experiment3Result experiment3(const Scenario& scenario, int seed_count);

// ---- Built-in scenarios ----------------------------------------------------

Scenario make_exp1_scenario();
Scenario make_exp2_scenario(Disturbance disturbance);
Scenario make_exp3_scenario();
/// Plain 10x10 empty map, used by planner acceptance checks and the demo.
Scenario make_empty_scenario();

// Corner poses used by the exp2 corner-trap interpolation.
struct CornerTrapPoses {
  double entry_x, entry_y, entry_theta;  // magnitude 0
  double deep_x, deep_y, deep_theta;     // magnitude 1
};
CornerTrapPoses exp2_corner_poses();

// ---- Scenario file I/O ------------------------------------------------------

/// JSON scenario (map stored as a side-by-side path). `map_dir` resolves
/// relative map_path entries.
Scenario scenario_from_json(const std::string& text, const std::string& map_dir);
std::string scenario_to_json(const Scenario& scenario, const std::string& map_path);

/// Apply a dotted-key override such as "planner.max_iterations=500". Throws
/// ConfigError on unknown keys.
void apply_override(Scenario& scenario, const std::string& key, const std::string& value);

}  // namespace sbamp
