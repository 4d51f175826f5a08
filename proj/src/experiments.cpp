#include "sbamp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sbamp/strings.hpp"

namespace sbamp {

namespace {

// Stream labels for counter-based seed splitting.
constexpr uint64_t kStreamPlanner = 1;
constexpr uint64_t kStreamCalibration = 2;
constexpr uint64_t kStreamScenarioGen = 3;

}  // namespace

const char* mode_name(Mode mode) { return mode == Mode::BareRrt ? "bare_rrt" : "sbamp"; }

Mode mode_from_name(const std::string& name) {
  if (name == "bare_rrt") return Mode::BareRrt;
  if (name == "sbamp") return Mode::Sbamp;
  throw ConfigError("unknown mode: " + name);
}

const char* disturbance_name(Disturbance d) {
  switch (d) {
    case Disturbance::Translate: return "translate";
    case Disturbance::Rotate: return "rotate";
    default: return "corner_trap";
  }
}

Disturbance disturbance_from_name(const std::string& name) {
  if (name == "translate") return Disturbance::Translate;
  if (name == "rotate") return Disturbance::Rotate;
  if (name == "corner_trap") return Disturbance::CornerTrap;
  throw ConfigError("unknown disturbance: " + name);
}

void Scenario::validate() const {
  if (dt_c <= 0.0 || dt_g <= 0.0) throw ConfigError("dt_c and dt_g must be > 0");
  const double ratio = dt_g / dt_c;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw ConfigError("dt_c must divide dt_g");
  if (run_count < 1) throw ConfigError("run_count must be >= 1");
  if (nominal_speed <= 0.0) throw ConfigError("nominal_speed must be > 0");
  if (duration <= 0.0) throw ConfigError("duration must be > 0");
  if (base_map.width() == 0) throw ConfigError("scenario has no map");
}

double calibrate_latency(const Scenario& scenario) {
  // Worst of a few seeded plans on the nominal problem, scaled so the
  // nominal cycle fits comfortably inside dt_g.
  const OccupancyGrid planning = scenario.base_map.inflated(scenario.inflation_radius);
  int worst = 1;
  for (uint64_t i = 0; i < 5; ++i) {
    Rng rng = Rng::stream(0x5BA3F00DULL, {kStreamCalibration, i});
    try {
      const PlanResult r =
          plan(planning, scenario.start, scenario.goal, scenario.planner, rng);
      worst = std::max(worst, r.iterations_used);
    } catch (const Error&) {
      worst = std::max(worst, scenario.planner.max_iterations);
    }
  }
  return scenario.planner_utilization * scenario.dt_g / static_cast<double>(worst);
}

namespace {

bool perturbation_triggered(const PerturbationSpec& spec, double t, const VehicleState& v) {
  if (spec.trigger_time >= 0.0 && t + 1e-9 >= spec.trigger_time) return true;
  if (std::isfinite(spec.trigger_x) && v.x >= spec.trigger_x) return true;
  return false;
}

VehicleState apply_with_clamp(const VehicleState& state, const PerturbationSpec& spec,
                              const OccupancyGrid& collision_grid) {
  if (!spec.clamp_to_free) return apply_perturbation(state, spec.perturbation, collision_grid);
  const Translate* tr = std::get_if<Translate>(&spec.perturbation);
  if (tr == nullptr) return apply_perturbation(state, spec.perturbation, collision_grid);
  // Nudge the teleport distance in growing +/- steps until the target is
  // free; keeps the intended displacement instead of collapsing it.
  for (int k = 0; k <= 16; ++k) {
    for (const double sign : {1.0, -1.0}) {
      const double adjusted = tr->distance + sign * 0.05 * k;
      if (adjusted < 0.0) continue;
      try {
        return apply_perturbation(state, Translate{adjusted, tr->direction}, collision_grid);
      } catch (const PerturbationIntoObstacleError&) {
      }
      if (k == 0) break;  // +0 and -0 are the same candidate
    }
  }
  return state;  // nowhere free nearby: keep the pose
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, Mode mode, uint64_t seed) {
  scenario.validate();

  OccupancyGrid true_map = scenario.base_map;
  OccupancyGrid known_raw = scenario.base_map;
  OccupancyGrid collision = true_map.inflated(scenario.collision_radius);
  OccupancyGrid planning = known_raw.inflated(scenario.inflation_radius);

  VehicleState vehicle = scenario.vehicle;
  vehicle.x = scenario.start.x;
  vehicle.y = scenario.start.y;
  vehicle.theta = scenario.start_theta;

  SupervisorConfig sup_cfg = scenario.supervisor;
  sup_cfg.dt_c = scenario.dt_c;
  sup_cfg.dt_g = scenario.dt_g;
  sup_cfg.nominal_speed = scenario.nominal_speed;
  std::optional<Supervisor> supervisor;
  if (mode == Mode::Sbamp) supervisor.emplace(sup_cfg);

  PurePursuit::Config follower = scenario.follower;
  follower.goal_radius = scenario.planner.goal_radius;
  PurePursuit pursuit(follower);

  const double c_iter = scenario.latency_per_iteration > 0.0 ? scenario.latency_per_iteration
                                                             : calibrate_latency(scenario);

  RunResult rr;
  RunMetrics& m = rr.metrics;
  RunLogs& logs = rr.logs;

  std::vector<bool> fired(scenario.perturbations.size(), false);
  std::vector<double> next_fire(scenario.perturbations.size(), -1.0);
  std::vector<bool> spawned(scenario.obstacle_spawns.size(), false);
  double last_disturbance = -1.0;

  bool plan_inflight = false;
  bool plan_ok = false;
  PlanResult inflight;
  double plan_started = 0.0;
  double plan_finish = 0.0;
  double next_plan_start = 0.0;
  uint64_t plan_cycle = 0;

  int ticks_executed = 0;
  int commanded_ticks = 0;
  bool reverse_latch = false;
  int first_ref_tick = -1;
  double speed_accum = 0.0;
  bool corridor_reentered = false;
  bool collided = false;

  const int total_ticks = static_cast<int>(std::lround(scenario.duration / scenario.dt_c));
  for (int tick = 0; tick < total_ticks; ++tick) {
    const double t = tick * scenario.dt_c;

    // -- perturbation schedule
    for (size_t i = 0; i < scenario.perturbations.size(); ++i) {
      const PerturbationSpec& spec = scenario.perturbations[i];
      bool fire = false;
      if (!fired[i] && perturbation_triggered(spec, t, vehicle)) {
        fire = true;
        fired[i] = true;
        if (spec.repeat_period > 0.0) next_fire[i] = t + spec.repeat_period;
      } else if (fired[i] && spec.repeat_period > 0.0 && next_fire[i] >= 0.0 &&
                 t + 1e-9 >= next_fire[i]) {
        fire = true;
        next_fire[i] += spec.repeat_period;
      }
      if (!fire) continue;
      const OccupancyGrid& place_grid = spec.clamp_to_free || spec.absolute_lateral
                                            ? planning
                                            : collision;
      if (spec.absolute_lateral) {
        const Translate* tr = std::get_if<Translate>(&spec.perturbation);
        const double target_y = scenario.start.y + (tr != nullptr ? tr->distance : 0.0);
        for (int k = 0; k <= 16; ++k) {
          bool placed = false;
          for (const double sign : {1.0, -1.0}) {
            try {
              vehicle = apply_perturbation(
                  vehicle, CornerTrap{vehicle.x, target_y + sign * 0.05 * k, vehicle.theta},
                  place_grid);
              placed = true;
              break;
            } catch (const PerturbationIntoObstacleError&) {
            }
            if (k == 0) break;
          }
          if (placed) break;
        }
      } else {
        vehicle = apply_with_clamp(vehicle, spec, place_grid);
      }
      last_disturbance = t;
      corridor_reentered = false;
    }
    for (size_t i = 0; i < scenario.obstacle_spawns.size(); ++i) {
      const ObstacleSpawnSpec& o = scenario.obstacle_spawns[i];
      if (spawned[i] || o.trigger_time < 0.0 || t + 1e-9 < o.trigger_time) continue;
      if (logs.nominal_path.waypoints.empty()) continue;  // wait for a route
      const auto& pts = logs.nominal_path.waypoints;
      const PolylineProjection proj = project_on_polyline(pts, vehicle.position());
      const double target_s = proj.arclength + o.ahead_distance;
      // Walk the polyline to the spawn anchor.
      double s = 0.0;
      Vec2 anchor = pts.back();
      Vec2 tangent{1.0, 0.0};
      for (size_t j = 1; j < pts.size(); ++j) {
        const double seg = distance(pts[j - 1], pts[j]);
        if (s + seg >= target_s && seg > 0.0) {
          const double w = (target_s - s) / seg;
          anchor = pts[j - 1] + (pts[j] - pts[j - 1]) * w;
          tangent = (pts[j] - pts[j - 1]).normalized();
          break;
        }
        s += seg;
      }
      const Vec2 normal{-tangent.y, tangent.x};
      const Vec2 center = anchor + normal * o.lateral_offset;
      if (distance(center, vehicle.position()) < 0.6) continue;          // not on the vehicle
      if (distance(center, scenario.goal) < scenario.planner.goal_radius + 0.3) continue;
      true_map.fill_rect(center - Vec2{o.half_size, o.half_size},
                         center + Vec2{o.half_size, o.half_size}, Cell::Occupied);
      collision = true_map.inflated(scenario.collision_radius);
      spawned[i] = true;
      last_disturbance = t;
      corridor_reentered = false;
    }

    // -- planner task: completion then (re)start, both latency-modeled
    if (plan_inflight && t + 1e-9 >= plan_finish) {
      plan_inflight = false;
      if (plan_ok) {
        inflight.path.stamp = t;
        ++m.replans_success;
        logs.plan_success_times.push_back(t);
        if (logs.nominal_path.waypoints.empty()) logs.nominal_path = inflight.path;
        if (mode == Mode::Sbamp)
          supervisor->on_new_path(inflight.path, vehicle.position(), t);
        else
          pursuit.set_path(inflight.path);
      } else {
        ++m.replans_failed;
      }
    }
    if (!plan_inflight && t + 1e-9 >= next_plan_start) {
      RangeScan scan = simulate_scan(true_map, vehicle, scenario.scan);
      try {
        known_raw.integrate_scan(scan);
        planning = known_raw.inflated(scenario.inflation_radius);
      } catch (const OutOfBoundsError&) {
        // Sensor pushed outside the map; keep the previous grid.
      }
      Rng rng = Rng::stream(seed, {kStreamPlanner, plan_cycle});
      int iterations = 0;
      try {
        inflight = plan(planning, vehicle.position(), scenario.goal, scenario.planner, rng);
        plan_ok = true;
        iterations = inflight.iterations_used;
      } catch (const PlanTimeoutError& e) {
        plan_ok = false;
        iterations = e.iterations_used;
      } catch (const InvalidEndpointError&) {
        plan_ok = false;
        iterations = std::max(1, scenario.planner.max_iterations / 20);
      }
      plan_started = t;
      plan_finish = t + c_iter * iterations;
      next_plan_start = std::max(plan_started + scenario.dt_g, plan_finish);
      plan_inflight = true;
      ++plan_cycle;
    }

    // -- control task
    DriveCommand cmd{};
    bool referenced = false;
    if (mode == Mode::Sbamp) {
      if (supervisor->has_model()) {
        const Vec2 ds_cmd = supervisor->control_step(vehicle.position(), t);
        cmd = ds_to_command(vehicle, ds_cmd, scenario.gains, &reverse_latch);
        logs.ds_commands.push_back({t, ds_cmd});
        referenced = true;
      }
    } else {
      const std::optional<DriveCommand> oc = pursuit.command(vehicle, scenario.nominal_speed);
      if (oc) {
        cmd = *oc;
        referenced = true;
      }
    }
    if (referenced) {
      if (first_ref_tick < 0) first_ref_tick = tick;
      ++commanded_ticks;
    }

    vehicle = step(vehicle, cmd, scenario.dt_c);
    speed_accum += std::abs(cmd.v);
    logs.trajectory.push_back({t + scenario.dt_c, vehicle.x, vehicle.y, vehicle.theta,
                               cmd.v, cmd.delta});
    ++ticks_executed;

    // -- collision: terminate the run
    if (!collision.in_bounds(vehicle.position()) || collision.is_occupied(vehicle.position())) {
      ++m.collisions;
      collided = true;
      break;
    }

    // -- recovery corridor re-entry after the last disturbance
    if (!corridor_reentered && last_disturbance >= 0.0 &&
        !logs.nominal_path.waypoints.empty()) {
      const PolylineProjection proj =
          project_on_polyline(logs.nominal_path.waypoints, vehicle.position());
      if (proj.distance <= scenario.corridor_tolerance) {
        corridor_reentered = true;
        m.time_to_recovery = t + scenario.dt_c - last_disturbance;
      }
    }

    // -- goal arrival ends the run
    if (distance(vehicle.position(), scenario.goal) <= scenario.planner.goal_radius) {
      m.reached_goal = true;
      break;
    }
  }

  m.elapsed = ticks_executed * scenario.dt_c;
  m.f_plan_hz = m.elapsed > 0.0 ? m.replans_success / m.elapsed : 0.0;
  m.final_goal_error = distance(vehicle.position(), scenario.goal);
  m.mean_speed = ticks_executed > 0 ? speed_accum / ticks_executed : 0.0;
  if (first_ref_tick >= 0) {
    const double ref_window = (ticks_executed - first_ref_tick) * scenario.dt_c;
    m.min_command_rate_hz = ref_window > 0.0 ? commanded_ticks / ref_window : 0.0;
  }
  const bool disturbed = last_disturbance >= 0.0;
  if (collided)
    m.recovery = false;
  else if (!disturbed)
    m.recovery = m.reached_goal;
  else
    m.recovery = corridor_reentered && m.reached_goal;
  if (!m.recovery) m.time_to_recovery = kInfinity;

  if (mode == Mode::Sbamp) logs.supervisor_events = supervisor->events();
  return rr;
}

std::string trajectory_to_csv(std::span<const TrajectoryRow> rows) {
  std::string out = "t,x,y,theta,v_cmd,delta_cmd\n";
  for (const TrajectoryRow& r : rows) {
    out += format_double(r.t) + "," + format_double(r.x) + "," + format_double(r.y) + "," +
           format_double(r.theta) + "," + format_double(r.v_cmd) + "," +
           format_double(r.delta_cmd) + "\n";
  }
  return out;
}

// ---- Experiment 1 -----------------------------------------------------------

double Experiment1Result::mean_f_plan(Mode mode, double delta_d) const {
  double sum = 0.0;
  int n = 0;
  for (const Experiment1Row& r : rows)
    if (r.mode == mode && r.delta_d == delta_d) {
      sum += r.f_plan_hz;
      ++n;
    }
  return n > 0 ? sum / n : 0.0;
}

double Experiment1Result::mean_cmd_rate(Mode mode, double delta_d) const {
  double sum = 0.0;
  int n = 0;
  for (const Experiment1Row& r : rows)
    if (r.mode == mode && r.delta_d == delta_d) {
      sum += r.cmd_rate_hz;
      ++n;
    }
  return n > 0 ? sum / n : 0.0;
}

Experiment1Result experiment1(const Scenario& scenario, std::span<const double> dd_list,
                              int n_runs) {
  if (dd_list.empty()) throw ConfigError("experiment1 needs a non-empty dd list");
  Scenario sc = scenario;
  if (sc.latency_per_iteration <= 0.0) sc.latency_per_iteration = calibrate_latency(sc);
  const uint64_t base_seed = sc.seeds.empty() ? 1 : sc.seeds.front();

  Experiment1Result result;
  result.csv = "mode,delta_d,run,f_plan_hz,mean_v_mps\n";
  for (Mode mode : {Mode::BareRrt, Mode::Sbamp}) {
    for (double dd : dd_list) {
      Scenario variant = sc;
      for (PerturbationSpec& p : variant.perturbations)
        if (Translate* tr = std::get_if<Translate>(&p.perturbation)) tr->distance = dd;
      for (int run = 0; run < n_runs; ++run) {
        const RunResult rr = run_scenario(variant, mode, base_seed + static_cast<uint64_t>(run));
        result.rows.push_back({mode, dd, run, rr.metrics.f_plan_hz, rr.metrics.mean_speed,
                               rr.metrics.min_command_rate_hz});
        result.csv += std::string(mode_name(mode)) + "," + format_double(dd) + "," +
                      std::to_string(run) + "," + format_double(rr.metrics.f_plan_hz) + "," +
                      format_double(rr.metrics.mean_speed) + "\n";
      }
    }
  }

  result.fig5_csv = "delta_d,mode,rate_hz\n";
  for (double dd : dd_list) {
    result.fig5_csv += format_double(dd) + ",bare_rrt," +
                       format_double(result.mean_f_plan(Mode::BareRrt, dd)) + "\n";
    result.fig5_csv += format_double(dd) + ",sbamp," +
                       format_double(result.mean_cmd_rate(Mode::Sbamp, dd)) + "\n";
  }
  return result;
}

// ---- Experiment 2 -----------------------------------------------------------

CornerTrapPoses exp2_corner_poses() {
  return {1.0, -0.1, 0.0, 0.55, -0.68, -2.75};
}

namespace {

void set_disturbance(Scenario& sc, Disturbance d, double magnitude) {
  sc.perturbations.clear();
  PerturbationSpec spec;
  switch (d) {
    case Disturbance::Translate:
      spec.trigger_x = 2.0;
      spec.perturbation = Translate{magnitude, kPi / 2.0};
      break;
    case Disturbance::Rotate:
      spec.trigger_x = 2.0;
      spec.perturbation = Rotate{magnitude};
      break;
    case Disturbance::CornerTrap: {
      const CornerTrapPoses p = exp2_corner_poses();
      CornerTrap trap;
      trap.x = p.entry_x + magnitude * (p.deep_x - p.entry_x);
      trap.y = p.entry_y + magnitude * (p.deep_y - p.entry_y);
      trap.theta = wrap_angle(p.entry_theta +
                              magnitude * wrap_angle(p.deep_theta - p.entry_theta));
      spec.trigger_time = 2.5;
      spec.perturbation = trap;
      break;
    }
  }
  if (magnitude > 0.0) sc.perturbations.push_back(spec);
}

}  // namespace

Experiment2Result experiment2(const Scenario& scenario, Mode mode, Disturbance disturbance) {
  Scenario sc = scenario;
  if (sc.latency_per_iteration <= 0.0) sc.latency_per_iteration = calibrate_latency(sc);

  double hi = 1.0, granularity = 1.0 / 8.0;
  if (disturbance == Disturbance::Translate) {
    hi = 0.8;
    granularity = 0.05;
  } else if (disturbance == Disturbance::Rotate) {
    hi = kPi;
    granularity = kPi / 32.0;
  }

  Experiment2Result result;
  result.csv = "mode,disturbance,magnitude,recovered,t_recover_s,collisions\n";

  auto evaluate = [&](double magnitude) {
    Scenario variant = sc;
    set_disturbance(variant, disturbance, magnitude);
    bool all_recovered = true;
    int collisions = 0;
    double worst_recover = 0.0;
    for (uint64_t seed : sc.seeds) {
      const RunResult rr = run_scenario(variant, mode, seed);
      all_recovered = all_recovered && rr.metrics.recovery;
      collisions += rr.metrics.collisions;
      if (std::isfinite(rr.metrics.time_to_recovery))
        worst_recover = std::max(worst_recover, rr.metrics.time_to_recovery);
    }
    const double t_rec = all_recovered ? worst_recover : kInfinity;
    result.points.push_back(
        {mode, disturbance_name(disturbance), magnitude, all_recovered, t_rec, collisions});
    result.csv += std::string(mode_name(mode)) + "," + disturbance_name(disturbance) + "," +
                  format_double(magnitude) + "," + (all_recovered ? "1" : "0") + "," +
                  format_double(t_rec) + "," + std::to_string(collisions) + "\n";
    return all_recovered;
  };

  double lo = 0.0;
  evaluate(0.0);
  if (evaluate(hi)) {
    result.threshold = hi;
    return result;
  }
  double known_bad = hi;
  while (known_bad - lo > granularity + 1e-12) {
    const double mid = 0.5 * (lo + known_bad);
    if (evaluate(mid))
      lo = mid;
    else
      known_bad = mid;
  }
  result.threshold = lo;
  return result;
}

// ---- Experiment 3 -----------------------------------------------------------

Experiment3Result experiment3(const Scenario& scenario, int seed_count) {
  if (seed_count < 1) throw ConfigError("experiment3 needs seed_count >= 1");
  Scenario sc = scenario;
  if (sc.latency_per_iteration <= 0.0) sc.latency_per_iteration = calibrate_latency(sc);

  Experiment3Result result;
  result.csv = "seed,recovered,collisions,t_recover_s\n";
  int recovered_count = 0;

  for (int i = 0; i < seed_count; ++i) {
    const uint64_t seed = (sc.seeds.empty() ? 1 : sc.seeds.front()) + static_cast<uint64_t>(i);
    Scenario variant = sc;
    variant.perturbations.clear();
    variant.obstacle_spawns.clear();

    Rng gen = Rng::stream(seed, {kStreamScenarioGen});
    PerturbationSpec spec;
    spec.trigger_time = gen.uniform(2.0, 4.0);
    spec.clamp_to_free = true;
    if (gen.uniform01() < 0.5) {
      const double dist = gen.uniform(0.3, 1.0);
      const double dir = gen.uniform01() < 0.5 ? kPi / 2.0 : -kPi / 2.0;
      spec.perturbation = Translate{dist, dir};
    } else {
      const double sign = gen.uniform01() < 0.5 ? 1.0 : -1.0;
      spec.perturbation = Rotate{sign * gen.uniform(0.5, kPi / 2.0)};
    }
    variant.perturbations.push_back(spec);

    ObstacleSpawnSpec spawn;
    spawn.trigger_time = gen.uniform(5.5, 7.5);
    spawn.ahead_distance = 2.2;
    spawn.lateral_offset = (gen.uniform01() < 0.5 ? 1.0 : -1.0) * gen.uniform(0.15, 0.45);
    spawn.half_size = 0.15;
    variant.obstacle_spawns.push_back(spawn);

    const RunResult rr = run_scenario(variant, Mode::Sbamp, seed);
    result.rows.push_back({seed, rr.metrics.recovery, rr.metrics.collisions,
                           rr.metrics.time_to_recovery});
    if (rr.metrics.recovery) {
      ++recovered_count;
      result.collisions_on_recovered += rr.metrics.collisions;
    }
    result.csv += std::to_string(seed) + "," + (rr.metrics.recovery ? "1" : "0") + "," +
                  std::to_string(rr.metrics.collisions) + "," +
                  format_double(rr.metrics.time_to_recovery) + "\n";
  }
  result.recovery_rate = static_cast<double>(recovered_count) / seed_count;
  return result;
}

// ---- Built-in scenarios -----------------------------------------------------

namespace {

Scenario base_defaults(std::string name) {
  Scenario sc;
  sc.name = std::move(name);
  sc.vehicle.wheelbase = 0.33;
  sc.vehicle.v_max = 1.0;
  sc.vehicle.delta_max = 0.6;
  return sc;
}

}  // namespace

Scenario make_empty_scenario() {
  Scenario sc = base_defaults("empty");
  sc.base_map = OccupancyGrid(0.05, {0.0, 0.0}, 200, 200, Cell::Free, 0.0);
  sc.start = {1.0, 1.0};
  sc.goal = {9.0, 1.0};
  sc.duration = 15.0;
  sc.inflation_radius = 0.0;
  return sc;
}

Scenario make_exp1_scenario() {
  Scenario sc = base_defaults("exp1_straightaway");
  // 14 x 6.2 m hall: the nominal lane runs along y = -0.5; above it, four
  // staggered-gap walls form a clutter field the teleports land in.
  OccupancyGrid map(0.05, {0.0, -1.2}, 280, 124, Cell::Free, 0.0);
  map.fill_rect({0.0, -1.2}, {14.0, -1.0}, Cell::Occupied);
  map.fill_rect({0.0, 4.6}, {14.0, 5.0}, Cell::Occupied);
  map.fill_rect({0.0, -1.2}, {0.2, 5.0}, Cell::Occupied);
  map.fill_rect({13.8, -1.2}, {14.0, 5.0}, Cell::Occupied);
  const double rows[4] = {0.5, 1.5, 2.5, 3.5};
  const double gaps[4] = {1.0, 0.85, 0.7, 0.6};  // tighter the deeper
  for (int i = 0; i < 4; ++i) {
    const double gap_lo = (i % 2 == 0) ? 3.3 : 10.3;
    const double gap_hi = gap_lo + gaps[i];
    map.fill_rect({0.2, rows[i] - 0.05}, {gap_lo, rows[i] + 0.05}, Cell::Occupied);
    map.fill_rect({gap_hi, rows[i] - 0.05}, {13.8, rows[i] + 0.05}, Cell::Occupied);
  }
  sc.base_map = std::move(map);
  sc.start = {0.8, -0.5};
  sc.goal = {13.2, -0.5};
  sc.dt_g = 0.1;
  sc.duration = 10.0;
  sc.planner.max_iterations = 3000;
  sc.planner.refine_iterations = 300;
  PerturbationSpec teleport;
  teleport.trigger_time = 1.2;
  teleport.perturbation = Translate{0.0, kPi / 2.0};
  teleport.repeat_period = 2.5;    // sustained shove protocol
  teleport.absolute_lateral = true;  // shove measured from the route line
  sc.perturbations.push_back(teleport);
  return sc;
}

Scenario make_exp2_scenario(Disturbance disturbance) {
  Scenario sc = base_defaults(std::string("exp2_corridor_") + disturbance_name(disturbance));
  // 5 x 2 m recovery corridor, walls 0.2 m thick.
  OccupancyGrid map(0.05, {0.0, -1.2}, 108, 48, Cell::Free, 0.0);
  map.fill_rect({0.0, -1.2}, {5.4, -1.0}, Cell::Occupied);
  map.fill_rect({0.0, 1.0}, {5.4, 1.2}, Cell::Occupied);
  map.fill_rect({0.0, -1.2}, {0.2, 1.2}, Cell::Occupied);
  map.fill_rect({5.2, -1.2}, {5.4, 1.2}, Cell::Occupied);
  sc.base_map = std::move(map);
  sc.start = {0.7, 0.0};
  sc.goal = {4.7, 0.0};
  sc.duration = 30.0;
  sc.seeds = {1, 2, 3};
  set_disturbance(sc, disturbance, 0.0);
  return sc;
}

Scenario make_exp3_scenario() {
  Scenario sc = base_defaults("exp3_loop");
  // 9 x 9 m loop: outer walls plus a 3.6 m square island, 2.5 m corridors.
  OccupancyGrid map(0.05, {0.0, 0.0}, 180, 180, Cell::Free, 0.0);
  map.fill_rect({0.0, 0.0}, {9.0, 0.2}, Cell::Occupied);
  map.fill_rect({0.0, 8.8}, {9.0, 9.0}, Cell::Occupied);
  map.fill_rect({0.0, 0.0}, {0.2, 9.0}, Cell::Occupied);
  map.fill_rect({8.8, 0.0}, {9.0, 9.0}, Cell::Occupied);
  map.fill_rect({2.7, 2.7}, {6.3, 6.3}, Cell::Occupied);
  sc.base_map = std::move(map);
  sc.start = {1.45, 1.45};
  sc.start_theta = kPi / 2.0;
  sc.goal = {1.45, 7.55};
  sc.duration = 35.0;
  sc.dt_g = 0.5;  // faster replanning shortens the obstacle-blind window
  return sc;
}

// ---- Scenario JSON ----------------------------------------------------------

namespace {

nlohmann::json perturbation_to_json(const PerturbationSpec& spec) {
  nlohmann::json j;
  if (spec.trigger_time >= 0.0) j["trigger_time"] = spec.trigger_time;
  if (std::isfinite(spec.trigger_x)) j["trigger_x"] = spec.trigger_x;
  if (spec.repeat_period > 0.0) j["repeat_period"] = spec.repeat_period;
  if (spec.absolute_lateral) j["absolute_lateral"] = true;
  if (spec.clamp_to_free) j["clamp_to_free"] = true;
  if (const Translate* t = std::get_if<Translate>(&spec.perturbation)) {
    j["type"] = "translate";
    j["distance"] = t->distance;
    j["direction"] = t->direction;
  } else if (const Rotate* r = std::get_if<Rotate>(&spec.perturbation)) {
    j["type"] = "rotate";
    j["angle"] = r->angle;
  } else if (const CornerTrap* c = std::get_if<CornerTrap>(&spec.perturbation)) {
    j["type"] = "corner_trap";
    j["pose"] = {c->x, c->y, c->theta};
  }
  return j;
}

PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
  PerturbationSpec spec;
  spec.trigger_time = j.value("trigger_time", -1.0);
  spec.trigger_x = j.contains("trigger_x") ? j.at("trigger_x").get<double>()
                                           : std::numeric_limits<double>::quiet_NaN();
  spec.repeat_period = j.value("repeat_period", 0.0);
  spec.absolute_lateral = j.value("absolute_lateral", false);
  spec.clamp_to_free = j.value("clamp_to_free", false);
  const std::string type = j.at("type").get<std::string>();
  if (type == "translate")
    spec.perturbation = Translate{j.at("distance").get<double>(), j.value("direction", kPi / 2.0)};
  else if (type == "rotate")
    spec.perturbation = Rotate{j.at("angle").get<double>()};
  else if (type == "corner_trap")
    spec.perturbation = CornerTrap{j.at("pose").at(0).get<double>(),
                                   j.at("pose").at(1).get<double>(),
                                   j.at("pose").at(2).get<double>()};
  else
    throw ParseError("unknown perturbation type: " + type);
  return spec;
}

}  // namespace

std::string scenario_to_json(const Scenario& sc, const std::string& map_path) {
  nlohmann::json j;
  j["name"] = sc.name;
  j["map_path"] = map_path;
  j["start"] = {sc.start.x, sc.start.y, sc.start_theta};
  j["goal"] = {sc.goal.x, sc.goal.y};
  j["dt_c"] = sc.dt_c;
  j["dt_g"] = sc.dt_g;
  j["speed"] = sc.nominal_speed;
  j["duration"] = sc.duration;
  j["inflation_radius"] = sc.inflation_radius;
  j["collision_radius"] = sc.collision_radius;
  j["corridor_tolerance"] = sc.corridor_tolerance;
  j["run_count"] = sc.run_count;
  j["seeds"] = sc.seeds;
  j["exp1_dd"] = sc.exp1_dd;
  j["perturbations"] = nlohmann::json::array();
  for (const PerturbationSpec& p : sc.perturbations)
    j["perturbations"].push_back(perturbation_to_json(p));
  j["obstacle_spawns"] = nlohmann::json::array();
  for (const ObstacleSpawnSpec& o : sc.obstacle_spawns)
    j["obstacle_spawns"].push_back({{"trigger_time", o.trigger_time},
                                    {"ahead_distance", o.ahead_distance},
                                    {"lateral_offset", o.lateral_offset},
                                    {"half_size", o.half_size}});
  j["planner"] = {{"steer_step", sc.planner.steer_step},
                  {"rewire_gamma", sc.planner.rewire_gamma},
                  {"max_iterations", sc.planner.max_iterations},
                  {"goal_radius", sc.planner.goal_radius},
                  {"goal_bias", sc.planner.goal_bias},
                  {"refine_iterations", sc.planner.refine_iterations}};
  j["supervisor"] = {{"tau_d", sc.supervisor.tau_d},
                     {"n0", sc.supervisor.n0},
                     {"blend_window", sc.supervisor.blend_window},
                     {"waypoint_radius", sc.supervisor.waypoint_radius},
                     {"count_advance_in_dwell", sc.supervisor.count_advance_in_dwell},
                     {"eps_stab", sc.supervisor.eps_stab},
                     {"mixture_k", sc.supervisor.mixture_k},
                     {"demo_spacing", sc.supervisor.demo_spacing},
                     {"segment_waypoints", sc.supervisor.segment_waypoints},
                     {"waypoint_spacing", sc.supervisor.waypoint_spacing}};
  j["gains"] = {{"k_delta", sc.gains.k_delta},
                {"creep_fraction", sc.gains.creep_fraction},
                {"reverse_threshold", sc.gains.reverse_threshold},
                {"reverse_exit", sc.gains.reverse_exit}};
  j["follower"] = {{"lookahead", sc.follower.lookahead},
                   {"drop_distance", sc.follower.drop_distance}};
  j["vehicle"] = {{"wheelbase", sc.vehicle.wheelbase},
                  {"v_max", sc.vehicle.v_max},
                  {"delta_max", sc.vehicle.delta_max}};
  j["scan"] = {{"beam_count", sc.scan.beam_count},
               {"fov", sc.scan.fov},
               {"max_range", sc.scan.max_range}};
  j["latency_per_iteration"] = sc.latency_per_iteration;
  j["planner_utilization"] = sc.planner_utilization;
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text, const std::string& map_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }

  Scenario sc;
  try {
    sc.name = j.value("name", "scenario");
    const std::string map_path = j.at("map_path").get<std::string>();
    const std::string resolved =
        (!map_path.empty() && map_path.front() == '/') || map_dir.empty()
            ? map_path
            : map_dir + "/" + map_path;
    sc.base_map = OccupancyGrid::load(resolved);
    sc.start = {j.at("start").at(0).get<double>(), j.at("start").at(1).get<double>()};
    sc.start_theta = j.at("start").size() > 2 ? j.at("start").at(2).get<double>() : 0.0;
    sc.goal = {j.at("goal").at(0).get<double>(), j.at("goal").at(1).get<double>()};
    sc.dt_c = j.value("dt_c", sc.dt_c);
    sc.dt_g = j.value("dt_g", sc.dt_g);
    sc.nominal_speed = j.value("speed", sc.nominal_speed);
    sc.duration = j.value("duration", sc.duration);
    sc.inflation_radius = j.value("inflation_radius", sc.inflation_radius);
    sc.collision_radius = j.value("collision_radius", sc.collision_radius);
    sc.corridor_tolerance = j.value("corridor_tolerance", sc.corridor_tolerance);
    sc.run_count = j.value("run_count", sc.run_count);
    if (j.contains("seeds")) sc.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    if (j.contains("exp1_dd")) sc.exp1_dd = j.at("exp1_dd").get<std::vector<double>>();
    if (j.contains("perturbations"))
      for (const auto& p : j.at("perturbations"))
        sc.perturbations.push_back(perturbation_from_json(p));
    if (j.contains("obstacle_spawns"))
      for (const auto& o : j.at("obstacle_spawns"))
        sc.obstacle_spawns.push_back({o.value("trigger_time", -1.0),
                                      o.value("ahead_distance", 2.0),
                                      o.value("lateral_offset", 0.0),
                                      o.value("half_size", 0.15)});
    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      sc.planner.steer_step = p.value("steer_step", sc.planner.steer_step);
      sc.planner.rewire_gamma = p.value("rewire_gamma", sc.planner.rewire_gamma);
      sc.planner.max_iterations = p.value("max_iterations", sc.planner.max_iterations);
      sc.planner.goal_radius = p.value("goal_radius", sc.planner.goal_radius);
      sc.planner.goal_bias = p.value("goal_bias", sc.planner.goal_bias);
      sc.planner.refine_iterations = p.value("refine_iterations", sc.planner.refine_iterations);
    }
    if (j.contains("supervisor")) {
      const auto& s = j.at("supervisor");
      sc.supervisor.tau_d = s.value("tau_d", sc.supervisor.tau_d);
      sc.supervisor.n0 = s.value("n0", sc.supervisor.n0);
      sc.supervisor.blend_window = s.value("blend_window", sc.supervisor.blend_window);
      sc.supervisor.waypoint_radius = s.value("waypoint_radius", sc.supervisor.waypoint_radius);
      sc.supervisor.count_advance_in_dwell =
          s.value("count_advance_in_dwell", sc.supervisor.count_advance_in_dwell);
      sc.supervisor.eps_stab = s.value("eps_stab", sc.supervisor.eps_stab);
      sc.supervisor.mixture_k = s.value("mixture_k", sc.supervisor.mixture_k);
      sc.supervisor.demo_spacing = s.value("demo_spacing", sc.supervisor.demo_spacing);
      sc.supervisor.segment_waypoints =
          s.value("segment_waypoints", sc.supervisor.segment_waypoints);
      sc.supervisor.waypoint_spacing = s.value("waypoint_spacing", sc.supervisor.waypoint_spacing);
    }
    if (j.contains("gains")) {
      const auto& g = j.at("gains");
      sc.gains.k_delta = g.value("k_delta", sc.gains.k_delta);
      sc.gains.creep_fraction = g.value("creep_fraction", sc.gains.creep_fraction);
      sc.gains.reverse_threshold = g.value("reverse_threshold", sc.gains.reverse_threshold);
      sc.gains.reverse_exit = g.value("reverse_exit", sc.gains.reverse_exit);
    }
    if (j.contains("follower")) {
      const auto& f = j.at("follower");
      sc.follower.lookahead = f.value("lookahead", sc.follower.lookahead);
      sc.follower.drop_distance = f.value("drop_distance", sc.follower.drop_distance);
    }
    if (j.contains("vehicle")) {
      const auto& v = j.at("vehicle");
      sc.vehicle.wheelbase = v.value("wheelbase", sc.vehicle.wheelbase);
      sc.vehicle.v_max = v.value("v_max", sc.vehicle.v_max);
      sc.vehicle.delta_max = v.value("delta_max", sc.vehicle.delta_max);
    }
    if (j.contains("scan")) {
      const auto& s = j.at("scan");
      sc.scan.beam_count = s.value("beam_count", sc.scan.beam_count);
      sc.scan.fov = s.value("fov", sc.scan.fov);
      sc.scan.max_range = s.value("max_range", sc.scan.max_range);
    }
    sc.latency_per_iteration = j.value("latency_per_iteration", 0.0);
    sc.planner_utilization = j.value("planner_utilization", sc.planner_utilization);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
  sc.validate();
  return sc;
}

// Dotted keys mirror the JSON structure; unknown keys are rejected.
void apply_override(Scenario& sc, const std::string& key, const std::string& value) {
  if (key == "dt_c") sc.dt_c = parse_double(value);
  else if (key == "dt_g") sc.dt_g = parse_double(value);
  else if (key == "speed") sc.nominal_speed = parse_double(value);
  else if (key == "duration") sc.duration = parse_double(value);
  else if (key == "inflation_radius") sc.inflation_radius = parse_double(value);
  else if (key == "collision_radius") sc.collision_radius = parse_double(value);
  else if (key == "corridor_tolerance") sc.corridor_tolerance = parse_double(value);
  else if (key == "run_count") sc.run_count = static_cast<int>(parse_long(value));
  else if (key == "planner.steer_step") sc.planner.steer_step = parse_double(value);
  else if (key == "planner.rewire_gamma") sc.planner.rewire_gamma = parse_double(value);
  else if (key == "planner.max_iterations")
    sc.planner.max_iterations = static_cast<int>(parse_long(value));
  else if (key == "planner.goal_radius") sc.planner.goal_radius = parse_double(value);
  else if (key == "planner.goal_bias") sc.planner.goal_bias = parse_double(value);
  else if (key == "planner.refine_iterations")
    sc.planner.refine_iterations = static_cast<int>(parse_long(value));
  else if (key == "supervisor.tau_d") sc.supervisor.tau_d = parse_double(value);
  else if (key == "supervisor.n0") sc.supervisor.n0 = static_cast<int>(parse_long(value));
  else if (key == "supervisor.blend_window") sc.supervisor.blend_window = parse_double(value);
  else if (key == "supervisor.waypoint_radius")
    sc.supervisor.waypoint_radius = parse_double(value);
  else if (key == "supervisor.count_advance_in_dwell")
    sc.supervisor.count_advance_in_dwell = parse_long(value) != 0;
  else if (key == "supervisor.eps_stab") sc.supervisor.eps_stab = parse_double(value);
  else if (key == "supervisor.mixture_k")
    sc.supervisor.mixture_k = static_cast<int>(parse_long(value));
  else if (key == "supervisor.demo_spacing") sc.supervisor.demo_spacing = parse_double(value);
  else if (key == "supervisor.segment_waypoints")
    sc.supervisor.segment_waypoints = static_cast<int>(parse_long(value));
  else if (key == "supervisor.waypoint_spacing")
    sc.supervisor.waypoint_spacing = parse_double(value);
  else if (key == "gains.k_delta") sc.gains.k_delta = parse_double(value);
  else if (key == "gains.creep_fraction") sc.gains.creep_fraction = parse_double(value);
  else if (key == "gains.reverse_threshold") sc.gains.reverse_threshold = parse_double(value);
  else if (key == "gains.reverse_exit") sc.gains.reverse_exit = parse_double(value);
  else if (key == "follower.lookahead") sc.follower.lookahead = parse_double(value);
  else if (key == "follower.drop_distance") sc.follower.drop_distance = parse_double(value);
  else if (key == "vehicle.wheelbase") sc.vehicle.wheelbase = parse_double(value);
  else if (key == "vehicle.v_max") sc.vehicle.v_max = parse_double(value);
  else if (key == "vehicle.delta_max") sc.vehicle.delta_max = parse_double(value);
  else if (key == "scan.beam_count") sc.scan.beam_count = static_cast<int>(parse_long(value));
  else if (key == "scan.max_range") sc.scan.max_range = parse_double(value);
  else if (key == "latency_per_iteration") sc.latency_per_iteration = parse_double(value);
  else if (key == "planner_utilization") sc.planner_utilization = parse_double(value);
  else throw ConfigError("unknown override key: " + key);
}

}  // namespace sbamp
