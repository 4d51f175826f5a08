#include "sbamp/supervisor.hpp"

#include <algorithm>
#include <cmath>

#include "sbamp/strings.hpp"

namespace sbamp {

namespace {

const char* event_name(SupervisorEvent::Kind kind) {
  switch (kind) {
    case SupervisorEvent::Kind::Switch: return "switch";
    case SupervisorEvent::Kind::Defer: return "defer";
    case SupervisorEvent::Kind::FitFail: return "fit_fail";
    default: return "waypoint_advance";
  }
}

}  // namespace

std::string events_to_csv(std::span<const SupervisorEvent> events) {
  std::string out = "t,event,detail\n";
  for (const SupervisorEvent& e : events)
    out += format_double(e.t) + "," + event_name(e.kind) + "," + e.detail + "\n";
  return out;
}

Supervisor::Supervisor(const SupervisorConfig& config) : config_(config) {
  const double tau = config_.effective_tau_d();
  if (!(config_.dt_c < tau && tau <= config_.dt_g))
    throw ConfigError("dwell admissibility requires dt_c < tau_d <= dt_g");
  if (config_.dt_c <= 0.0) throw ConfigError("dt_c must be > 0");
}

bool dwell_bound_holds(std::span<const double> switch_times, double t1, double t2,
                       double tau_d, int n0) {
  if (!(t1 < t2)) throw ConfigError("dwell bound needs t1 < t2");
  int count = 0;
  for (double s : switch_times)
    if (s >= t1 && s <= t2) ++count;
  return count <= n0 + (t2 - t1) / tau_d + 1e-12;
}

bool Supervisor::dwell_admissible(double t1, double t2) const {
  return dwell_bound_holds(switch_times_, t1, t2, config_.effective_tau_d(), config_.n0);
}

bool Supervisor::can_switch_at(double t) const {
  // A switch is admissible when adding it keeps the dwell bound valid for
  // every window ending at t. Windows starting at recorded switches are the
  // binding ones.
  if (!switch_times_.empty() && switch_times_.back() >= t) return false;
  const double tau = config_.effective_tau_d();
  int count_after = 1;
  if (1 > config_.n0) return false;  // window [t, t] alone
  for (auto it = switch_times_.rbegin(); it != switch_times_.rend(); ++it) {
    ++count_after;
    if (count_after > config_.n0 + (t - *it) / tau + 1e-12) return false;
  }
  return true;
}

void Supervisor::record_switch(double t, bool count_in_dwell) {
  if (count_in_dwell) switch_times_.push_back(t);
  blend_start_ = t;
  blend_from_speed_ = last_velocity_.norm();
}

int Supervisor::first_waypoint_ahead(const WaypointPath& path, const Vec2& position) const {
  const auto& pts = path.waypoints;
  const PolylineProjection proj = project_on_polyline(pts, position);
  double arc = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) {
    arc += distance(pts[i - 1], pts[i]);
    if (arc > proj.arclength + 1e-9) return static_cast<int>(i);
  }
  return static_cast<int>(pts.size()) - 1;
}

void Supervisor::on_new_path(const WaypointPath& raw_path, const Vec2& vehicle_position,
                             double t) {
  if (raw_path.waypoints.size() < 2) return;
  const WaypointPath path = resample_waypoints(raw_path, config_.waypoint_spacing);
  if (current_path_ && current_path_->same_waypoints(path)) return;  // duplicate: no-op
  if (pending_ && pending_->path.same_waypoints(path)) return;

  // Fit on the local segment ENDING at the first waypoint ahead of the
  // vehicle: the demo's terminal position is exactly the attractor the apply
  // step recenters on, so the fitted field's speed profile carries over.
  const int ahead = first_waypoint_ahead(path, vehicle_position);
  const size_t lo =
      static_cast<size_t>(std::max(0, ahead - std::max(1, config_.segment_waypoints)));
  const size_t hi = static_cast<size_t>(ahead) + 1;
  WaypointPath segment;
  segment.waypoints.assign(path.waypoints.begin() + static_cast<long>(lo),
                           path.waypoints.begin() + static_cast<long>(hi));
  segment.cost = polyline_length(segment.waypoints);
  segment.stamp = path.stamp;

  ds::FitConfig fit_config = config_.fit;
  if (active_model_) fit_config.warm_start = &*active_model_;
  ds::MixtureModel model;
  try {
    const ds::DemoDataset demo =
        ds::synthesize_demo(segment, config_.nominal_speed, config_.demo_spacing);
    const int k = std::min<int>(config_.mixture_k,
                                static_cast<int>(demo.samples.size()) / 4);
    model = ds::fit(demo, std::max(1, k), config_.eps_stab, fit_config).model;
  } catch (const Error& e) {
    events_.push_back({t, SupervisorEvent::Kind::FitFail, e.what()});
    return;  // recoverable: keep the previous model
  }
  on_fitted_model(path, std::move(model), vehicle_position, t);
}

void Supervisor::on_fitted_model(const WaypointPath& path, ds::MixtureModel model,
                                 const Vec2& vehicle_position, double t) {
  if (path.waypoints.size() < 2) return;
  if (current_path_ && current_path_->same_waypoints(path)) return;
  pending_ = PendingPath{path, std::move(model)};
  pending_defer_logged_ = false;
  if (!active_model_ || can_switch_at(t)) {
    apply_pending(vehicle_position, t);
  } else {
    pending_defer_logged_ = true;
    events_.push_back({t, SupervisorEvent::Kind::Defer, "dwell budget exhausted"});
  }
}

void Supervisor::apply_pending(const Vec2& vehicle_position, double t) {
  const int ahead = first_waypoint_ahead(pending_->path, vehicle_position);
  active_model_ = ds::shift_attractor(
      pending_->model, pending_->path.waypoints[static_cast<size_t>(ahead)]);
  current_path_ = std::move(pending_->path);
  active_waypoint_ = static_cast<size_t>(ahead);
  pending_.reset();
  pending_defer_logged_ = false;
  record_switch(t, true);
  events_.push_back({t, SupervisorEvent::Kind::Switch,
                     "path stamp=" + format_double(current_path_->stamp) +
                         " waypoint=" + std::to_string(active_waypoint_)});
}

Vec2 Supervisor::control_step(const Vec2& xi, double t) {
  if (!active_model_ && !pending_)
    throw ConfigError("control_step before any model was delivered");

  // Deferred switches fire at the first admissible tick; never dropped.
  if (pending_ && (!active_model_ || can_switch_at(t))) apply_pending(xi, t);

  // Waypoint advance: reaching the active attractor recenters on the next
  // waypoint. Counts toward the dwell budget (configurable), so it may be
  // deferred as well.
  if (current_path_ && active_waypoint_ + 1 < current_path_->waypoints.size() &&
      distance(xi, active_model_->attractor) < config_.waypoint_radius) {
    if (!config_.count_advance_in_dwell || can_switch_at(t)) {
      ++active_waypoint_;
      active_model_ =
          ds::shift_attractor(*active_model_, current_path_->waypoints[active_waypoint_]);
      record_switch(t, config_.count_advance_in_dwell);
      events_.push_back({t, SupervisorEvent::Kind::WaypointAdvance,
                         "waypoint=" + std::to_string(active_waypoint_)});
    }
  }

  const Vec2 raw = ds::evaluate(*active_model_, xi);
  Vec2 out = raw;
  if (blend_start_ >= 0.0 && t - blend_start_ < config_.blend_window) {
    // Magnitude interpolates from the pre-switch speed to the new field's
    // speed; direction comes from the new field.
    const double lambda = (t - blend_start_) / config_.blend_window;
    const double mag = (1.0 - lambda) * blend_from_speed_ + lambda * raw.norm();
    Vec2 dir = raw.normalized();
    if (dir == Vec2{}) dir = last_velocity_.normalized();
    out = dir * mag;
  }
  last_velocity_ = out;
  return out;
}

LyapunovReport Supervisor::lyapunov_monitor(std::span<const TimedPoint> trajectory,
                                            const Vec2& goal,
                                            std::span<const double> switch_times,
                                            double v_tol) {
  LyapunovReport report;
  if (trajectory.empty()) return report;
  report.final_v = (trajectory.back().xi - goal).norm_sq();

  // Interval endpoints: trajectory start/end plus every switch instant.
  std::vector<double> bounds{trajectory.front().t};
  for (double s : switch_times)
    if (s > trajectory.front().t && s < trajectory.back().t) bounds.push_back(s);
  bounds.push_back(trajectory.back().t);
  std::sort(bounds.begin(), bounds.end());

  auto value_at = [&](double t) {
    // V at the last trajectory sample with sample.t <= t.
    size_t lo = 0;
    for (size_t i = 0; i < trajectory.size(); ++i) {
      if (trajectory[i].t <= t + 1e-12) lo = i;
      else break;
    }
    return (trajectory[lo].xi - goal).norm_sq();
  };

  for (size_t i = 0; i + 1 < bounds.size(); ++i) {
    const double v0 = value_at(bounds[i]);
    const double v1 = value_at(bounds[i + 1]);
    if (v1 > v0 + v_tol) {
      report.interval_decrease = false;
      report.violations.push_back({bounds[i], bounds[i + 1], v1 - v0});
    }
  }
  return report;
}

}  // namespace sbamp
