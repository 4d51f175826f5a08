// Acceptance suite: one check per shipping criterion, each printing a
// single [PASS]/[FAIL] line. Exits nonzero when any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <cstdarg>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sbamp/experiments.hpp"
#include "sbamp/rng.hpp"

using namespace sbamp;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& label, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion,
              label.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

/// Random short demonstration through a box, as the online pipeline makes
/// them: spline a few waypoints, tangent velocities, terminal zero.
ds::DemoDataset random_demo(Rng& rng) {
  WaypointPath path;
  Vec2 p{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
  path.waypoints.push_back(p);
  const int hops = 2 + static_cast<int>(rng.uniform_int(3));
  double heading = rng.uniform(-kPi, kPi);
  for (int i = 0; i < hops; ++i) {
    heading += rng.uniform(-0.8, 0.8);
    p += Vec2{std::cos(heading), std::sin(heading)} * rng.uniform(1.0, 2.0);
    path.waypoints.push_back(p);
  }
  path.cost = polyline_length(path.waypoints);
  return ds::synthesize_demo(path, rng.uniform(0.6, 1.4), 0.25);
}

ds::MixtureModel random_fitted_model(Rng& rng, double eps_stab = 0.1) {
  for (;;) {
    const ds::DemoDataset demo = random_demo(rng);
    const int k = 1 + static_cast<int>(rng.uniform_int(4));
    if (demo.samples.size() < static_cast<size_t>(4 * k)) continue;
    return ds::fit(demo, k, eps_stab).model;
  }
}

// ---- criterion 1 ------------------------------------------------------------

void criterion1() {
  Rng rng(101);
  const double eps_stab = 0.1;
  double worst_eig = -1e9;
  double worst_fp = 0.0;
  bool ok = true;
  for (int i = 0; i < 1000 && ok; ++i) {
    const ds::MixtureModel model = random_fitted_model(rng, eps_stab);
    for (const ds::LinearSubsystem& c : model.components) {
      const SymEigenvalues eig = sym_eigenvalues(c.A + c.A.transpose());
      worst_eig = std::max(worst_eig, eig.hi);
      ok = ok && eig.hi <= -eps_stab + 1e-12;
    }
    const double fp = ds::evaluate(model, model.attractor).norm();
    worst_fp = std::max(worst_fp, fp);
    ok = ok && fp <= 1e-9;
  }
  report(1, ok, "stability construction on 1000 fitted models",
         fmt("max eig(A+A^T)=%.4f <= -%.2f, max |f(attractor)|=%.2e", worst_eig, eps_stab,
             worst_fp));
}

// ---- criterion 2 ------------------------------------------------------------

void criterion2() {
  // Fields fitted by the normal pipeline (plan -> spline demo -> fit), then
  // integrated from uniform free-space starts of the planning map.
  Rng rng(202);
  const OccupancyGrid grid(0.05, {0.0, 0.0}, 200, 200, Cell::Free);
  const FreeSampler sampler(grid);
  bool ok = true;
  double worst_time = 0.0;
  double worst_v_bump = 0.0;
  int runs = 0;
  for (int m = 0; m < 5; ++m) {
    PlannerConfig config;
    Rng plan_rng(900 + static_cast<uint64_t>(m));
    const Vec2 start{rng.uniform(1.0, 3.0), rng.uniform(1.0, 9.0)};
    const Vec2 goal{rng.uniform(7.0, 9.5), rng.uniform(1.0, 9.0)};
    const PlanResult planned = plan(grid, start, goal, config, plan_rng);
    const ds::DemoDataset demo =
        ds::synthesize_demo(resample_waypoints(planned.path, 1.5), 1.0, 0.25);
    const ds::MixtureModel model = ds::fit(demo, 4, 0.1).model;
    for (int s = 0; s < 20; ++s) {
      ++runs;
      Vec2 xi = sampler.sample(rng);
      const double h = 1e-3;
      double v_prev = (xi - model.attractor).norm_sq();
      bool arrived = false;
      for (int step = 0; step < 60000; ++step) {
        xi += h * ds::evaluate(model, xi);
        const double v = (xi - model.attractor).norm_sq();
        worst_v_bump = std::max(worst_v_bump, v - v_prev);
        if (v > v_prev + 1e-9) ok = false;
        v_prev = v;
        if ((xi - model.attractor).norm() < 1e-3) {
          arrived = true;
          worst_time = std::max(worst_time, (step + 1) * h);
          break;
        }
      }
      if (!arrived) ok = false;
    }
  }
  report(2, ok, "Lyapunov convergence of forward-integrated fitted fields",
         fmt("%d starts, max arrival %.2f s <= 60, max per-step V increase %.2e <= 1e-9",
             runs, worst_time, worst_v_bump));
}

// ---- criterion 3 ------------------------------------------------------------

void criterion3() {
  // Known field xi_dot = -xi sampled on an inward spiral ending at 0.
  ds::DemoDataset demo;
  const int n = 100;
  for (int i = 0; i < n - 1; ++i) {
    const double phi = 4.0 * kPi * i / (n - 1);
    const double r = 1.0 - static_cast<double>(i) / (n - 1);
    const Vec2 xi{r * std::cos(phi), r * std::sin(phi)};
    demo.samples.push_back({xi, -xi});
  }
  demo.samples.push_back({{0.0, 0.0}, {0.0, 0.0}});
  const ds::FitResult fit = ds::fit(demo, 1, 0.1);
  const double frob = (fit.model.components[0].A + Mat2::identity()).frobenius_norm();
  bool ok = frob < 0.15;

  // Analytic gradient vs central differences on 20 random instances.
  Rng rng(303);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    ds::FitProblem problem;
    problem.k = k;
    problem.eps_stab = 0.1;
    for (int s = 0; s < 25; ++s) {
      problem.offsets.push_back({rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)});
      problem.velocities.push_back({rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)});
      std::vector<double> row(static_cast<size_t>(k));
      double sum = 0.0;
      for (double& w : row) sum += w = rng.uniform(0.01, 1.0);
      for (double w : row) problem.weights.push_back(w / sum);
    }
    std::vector<ds::StableParam> params(static_cast<size_t>(k));
    for (ds::StableParam& p : params) {
      p.skew = rng.uniform(-1.0, 1.0);
      p.l00 = rng.uniform(0.2, 1.2);
      p.l10 = rng.uniform(-0.8, 0.8);
      p.l11 = rng.uniform(0.2, 1.2);
    }
    std::vector<ds::StableParam> grad(static_cast<size_t>(k));
    ds::fit_gradient(problem, params, grad);
    const double h = 1e-6;
    double num2 = 0.0, diff2 = 0.0;
    auto probe = [&](double& coord, double analytic) {
      const double saved = coord;
      coord = saved + h;
      const double jp = ds::fit_objective(problem, params);
      coord = saved - h;
      const double jm = ds::fit_objective(problem, params);
      coord = saved;
      const double fd = (jp - jm) / (2.0 * h);
      num2 += fd * fd;
      diff2 += (fd - analytic) * (fd - analytic);
    };
    for (int i = 0; i < k; ++i) {
      auto& p = params[static_cast<size_t>(i)];
      auto& g = grad[static_cast<size_t>(i)];
      probe(p.skew, g.skew);
      probe(p.l00, g.l00);
      probe(p.l10, g.l10);
      probe(p.l11, g.l11);
    }
    const double rel = std::sqrt(diff2) / (1.0 + std::sqrt(num2));
    worst_rel = std::max(worst_rel, rel);
    ok = ok && rel <= 1e-5;
  }
  report(3, ok, "fit recovers -I from spiral data; analytic gradient checks",
         fmt("|A+I|_F=%.4f < 0.15, worst gradient rel err %.2e <= 1e-5", frob, worst_rel));
}

// ---- criterion 4 ------------------------------------------------------------

void criterion4() {
  const OccupancyGrid grid(0.05, {0.0, 0.0}, 200, 200, Cell::Free);
  PlannerConfig config;
  config.max_iterations = 5000;
  config.refine_iterations = 5000;
  Rng rng(404);
  const PlanResult r = plan(grid, {1.0, 1.0}, {9.0, 1.0}, config, rng);
  bool ok = r.path.cost <= 1.05 * 8.0;
  std::string detail = fmt("cost %.4f <= %.4f at 5000 iters", r.path.cost, 1.05 * 8.0);

  // Monotone best cost for 10 seeds.
  PlannerConfig trace_config;
  trace_config.max_iterations = 2000;
  trace_config.refine_iterations = 2000;
  trace_config.record_best_cost_trace = true;
  bool monotone = true;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng seeded(seed);
    const PlanResult t = plan(grid, {1.0, 1.0}, {9.0, 9.0}, trace_config, seeded);
    for (size_t i = 1; i < t.best_cost_trace.size(); ++i)
      monotone = monotone && t.best_cost_trace[i] <= t.best_cost_trace[i - 1] + 1e-12;
  }
  ok = ok && monotone;

  // Nearest neighbor vs linear scan, 1e4 queries.
  Rng nn_rng(405);
  Tree tree({5.0, 5.0});
  for (int i = 1; i < 3000; ++i)
    tree.add({nn_rng.uniform(0.0, 10.0), nn_rng.uniform(0.0, 10.0)},
             static_cast<int>(nn_rng.uniform_int(static_cast<uint64_t>(tree.size()))));
  int mismatches = 0;
  for (int q = 0; q < 10000; ++q) {
    const Vec2 query{nn_rng.uniform(-1.0, 11.0), nn_rng.uniform(-1.0, 11.0)};
    if (tree.nearest(query) != oracles::nearest_linear(tree, query)) ++mismatches;
  }
  ok = ok && mismatches == 0;
  report(4, ok, "planner optimality trend, monotone refinement, exact NN",
         detail + fmt(", monotone 10/10 seeds: %s, NN mismatches %d/10000",
                      monotone ? "yes" : "no", mismatches));
}

// ---- criterion 5 ------------------------------------------------------------

void criterion5() {
  Scenario sc = make_exp3_scenario();
  sc.latency_per_iteration = calibrate_latency(sc);
  const RunResult rr = run_scenario(sc, Mode::Sbamp, 21);

  // Recorded switch instants: path switches plus counted waypoint advances.
  std::vector<double> switch_times;
  for (const SupervisorEvent& e : rr.logs.supervisor_events)
    if (e.kind == SupervisorEvent::Kind::Switch ||
        e.kind == SupervisorEvent::Kind::WaypointAdvance)
      switch_times.push_back(e.t);

  bool ok = switch_times.size() >= 10;
  std::string detail = fmt("%zu switches", switch_times.size());

  // Commanded-speed continuity at each switch tick vs the previous tick.
  double worst_jump = 0.0;
  const auto& cmds = rr.logs.ds_commands;
  for (double ts : switch_times) {
    size_t idx = 0;
    while (idx < cmds.size() && cmds[idx].first < ts - 1e-9) ++idx;
    if (idx == 0 || idx >= cmds.size()) continue;  // first command has no predecessor
    const double jump = std::abs(cmds[idx].second.norm() - cmds[idx - 1].second.norm());
    worst_jump = std::max(worst_jump, jump);
  }
  ok = ok && worst_jump < 1e-9;
  detail += fmt(", max speed jump %.2e < 1e-9", worst_jump);

  // Dwell bound over every switch-time window plus the whole run.
  const SupervisorConfig sup = [&] {
    SupervisorConfig c = sc.supervisor;
    c.dt_c = sc.dt_c;
    c.dt_g = sc.dt_g;
    return c;
  }();
  const double tau_d = sup.effective_tau_d();
  bool dwell_ok = dwell_bound_holds(switch_times, 0.0, rr.metrics.elapsed, tau_d, sup.n0);
  for (size_t i = 0; i < switch_times.size() && dwell_ok; ++i)
    for (size_t j = i + 1; j < switch_times.size(); ++j)
      dwell_ok = dwell_ok && dwell_bound_holds(switch_times, switch_times[i] - 1e-9,
                                               switch_times[j] + 1e-9, tau_d, sup.n0);
  ok = ok && dwell_ok;
  detail += fmt(", dwell bound (tau_d=%.3f, n0=%d): %s", tau_d, sup.n0,
                dwell_ok ? "holds" : "violated");
  report(5, ok, "switch continuity and average dwell-time bound", detail);
}

// ---- criterion 6 ------------------------------------------------------------

void criterion6() {
  Scenario sc = make_exp1_scenario();
  const std::vector<double> dd{0.0, 1.5, 2.5, 3.5, 4.5};
  const Experiment1Result r = experiment1(sc, dd, 20);

  bool rate_ok = true;
  for (double d : dd) {
    const double rate = r.mean_cmd_rate(Mode::Sbamp, d);
    rate_ok = rate_ok && std::abs(rate - 1.0 / sc.dt_c) <= 1e-9;
  }

  std::string curve;
  bool strictly_decreasing = true;
  bool crosses = false;
  double prev = 0.0;
  for (size_t i = 0; i < dd.size(); ++i) {
    const double f = r.mean_f_plan(Mode::BareRrt, dd[i]);
    curve += fmt(i == 0 ? "%.2f" : " > %.2f", f);
    if (i > 0) strictly_decreasing = strictly_decreasing && f < prev;
    crosses = crosses || f < 2.0;
    prev = f;
  }
  const bool ok = rate_ok && strictly_decreasing && crosses;
  report(6, ok, "experiment 1 trend (N=20 per point)",
         fmt("sbamp rate 60 Hz at all dd: %s; bare f_plan %s; crosses 2 Hz: %s",
             rate_ok ? "yes" : "no", curve.c_str(), crosses ? "yes" : "no"));
}

// ---- criterion 7 ------------------------------------------------------------

void criterion7() {
  Scenario rotate_sc = make_exp2_scenario(Disturbance::Rotate);
  rotate_sc.latency_per_iteration = calibrate_latency(rotate_sc);
  const Experiment2Result sbamp_rot = experiment2(rotate_sc, Mode::Sbamp, Disturbance::Rotate);
  const Experiment2Result bare_rot = experiment2(rotate_sc, Mode::BareRrt, Disturbance::Rotate);
  bool ok = sbamp_rot.threshold >= kPi / 2.0 && sbamp_rot.threshold > bare_rot.threshold;

  // Corner trap with a starved planner: the pure SBAMP rescue story.
  Scenario trap_sc = make_exp2_scenario(Disturbance::CornerTrap);
  trap_sc.latency_per_iteration = calibrate_latency(trap_sc);
  trap_sc.planner.max_iterations = 150;
  trap_sc.planner.refine_iterations = 50;
  const CornerTrapPoses poses = exp2_corner_poses();
  trap_sc.perturbations.clear();
  PerturbationSpec trap;
  trap.trigger_time = 2.5;
  trap.perturbation = CornerTrap{poses.deep_x, poses.deep_y, poses.deep_theta};
  trap_sc.perturbations.push_back(trap);
  bool sbamp_trap = true, bare_trap = false;
  for (uint64_t seed : trap_sc.seeds) {
    sbamp_trap = sbamp_trap && run_scenario(trap_sc, Mode::Sbamp, seed).metrics.recovery;
    bare_trap = bare_trap || run_scenario(trap_sc, Mode::BareRrt, seed).metrics.recovery;
  }
  ok = ok && sbamp_trap && !bare_trap;
  report(7, ok, "experiment 2 ordering (rotation thresholds, corner trap)",
         fmt("rotate: sbamp %.3f rad >= pi/2 and > bare %.3f rad; corner trap: sbamp %s, "
             "bare %s",
             sbamp_rot.threshold, bare_rot.threshold,
             sbamp_trap ? "recovers" : "fails", bare_trap ? "recovers" : "fails"));
}

// ---- criterion 8 ------------------------------------------------------------

void criterion8() {
  Scenario sc = make_exp3_scenario();
  const Experiment3Result r = experiment3(sc, 20);
  const bool ok = r.recovery_rate >= 0.95 && r.collisions_on_recovered == 0;
  report(8, ok, "experiment 3 randomized perturbations (20 seeds)",
         fmt("recovery rate %.2f >= 0.95, collisions on recovered runs %d == 0",
             r.recovery_rate, r.collisions_on_recovered));
}

// ---- criterion 9 ------------------------------------------------------------

void criterion9() {
  Scenario e3 = make_exp3_scenario();
  const Experiment3Result a = experiment3(e3, 5);
  const Experiment3Result b = experiment3(e3, 5);
  bool ok = a.csv == b.csv;

  Scenario e1 = make_exp1_scenario();
  e1.duration = 5.0;
  const std::vector<double> dd{0.0, 2.5};
  const Experiment1Result x = experiment1(e1, dd, 2);
  const Experiment1Result y = experiment1(e1, dd, 2);
  ok = ok && x.csv == y.csv && x.fig5_csv == y.fig5_csv;
  report(9, ok, "determinism: identical configs give byte-identical CSVs",
         ok ? "exp1 and exp3 reruns match byte-for-byte" : "rerun CSVs differ");
}

// ---- criterion 10 -----------------------------------------------------------

void criterion10() {
  // Turning circle radius against L / tan(delta).
  VehicleState s;
  s.x = 1.0;
  s.y = 2.0;
  s.theta = 0.3;
  s.wheelbase = 0.33;
  s.v_max = 2.0;
  s.delta_max = 0.8;
  const double delta = 0.45;
  const double expected_radius = s.wheelbase / std::tan(delta);
  std::vector<Vec2> pts;
  VehicleState cur = s;
  for (int i = 0; i < 400; ++i) {
    cur = step(cur, {0.8, delta}, 0.01);
    pts.push_back(cur.position());
  }
  const Vec2 a = pts[50], b = pts[180], c = pts[320];
  const double la = distance(b, c), lb = distance(a, c), lc = distance(a, b);
  const double area = 0.5 * std::abs((b - a).cross(c - a));
  const double radius = la * lb * lc / (4.0 * area);
  const double radius_err = std::abs(radius - expected_radius) / expected_radius;
  bool ok = radius_err < 0.001;

  // RK4 observed order across a dt sweep against the closed-form circle.
  const double v = 1.0, horizon = 1.0;
  const double omega = v * std::tan(delta) / s.wheelbase;
  const double turn_radius = v / omega;
  auto exact = [&](const VehicleState& s0, double t) {
    VehicleState e = s0;
    e.x = s0.x + turn_radius * (std::sin(s0.theta + omega * t) - std::sin(s0.theta));
    e.y = s0.y - turn_radius * (std::cos(s0.theta + omega * t) - std::cos(s0.theta));
    e.theta = wrap_angle(s0.theta + omega * t);
    return e;
  };
  double prev_err = -1.0;
  double min_order = 1e9;
  for (const double dt : {0.1, 0.05, 0.025}) {
    VehicleState cur2 = s;
    const int n = static_cast<int>(std::round(horizon / dt));
    for (int i = 0; i < n; ++i) cur2 = step(cur2, {v, delta}, dt);
    const VehicleState ex = exact(s, horizon);
    const double err = std::hypot(cur2.x - ex.x, cur2.y - ex.y) +
                       std::abs(wrap_angle(cur2.theta - ex.theta));
    if (prev_err > 0.0) min_order = std::min(min_order, std::log2(prev_err / err));
    prev_err = err;
  }
  ok = ok && min_order >= 3.8;
  report(10, ok, "vehicle model: turning circle and RK4 order",
         fmt("radius err %.4f%% < 0.1%%, observed order %.2f >= 3.8", 100.0 * radius_err,
             min_order));
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                              criterion5, criterion6, criterion7, criterion8,
                                              criterion9, criterion10};
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) {
      const int n = std::atoi(argv[i]);
      if (n >= 1 && n <= static_cast<int>(criteria.size()))
        criteria[static_cast<size_t>(n - 1)]();
    }
  } else {
    for (auto& c : criteria) c();
  }
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
