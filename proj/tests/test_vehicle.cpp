#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sbamp/vehicle.hpp"
#include "sbamp/rng.hpp"

using namespace sbamp;

namespace {

VehicleState make_state(double x = 0.0, double y = 0.0, double theta = 0.0) {
  VehicleState s;
  s.x = x;
  s.y = y;
  s.theta = theta;
  s.wheelbase = 0.33;
  s.v_max = 1.0;
  s.delta_max = 0.6;
  return s;
}

// Closed-form bicycle motion under constant (v, delta).
VehicleState closed_form(const VehicleState& s0, double v, double delta, double t) {
  VehicleState s = s0;
  const double td = std::tan(delta);
  if (std::abs(td) < 1e-15) {
    s.x += v * t * std::cos(s0.theta);
    s.y += v * t * std::sin(s0.theta);
    return s;
  }
  const double omega = v * td / s0.wheelbase;
  const double radius = v / omega;
  s.x = s0.x + radius * (std::sin(s0.theta + omega * t) - std::sin(s0.theta));
  s.y = s0.y - radius * (std::cos(s0.theta + omega * t) - std::cos(s0.theta));
  s.theta = wrap_angle(s0.theta + omega * t);
  return s;
}

}  // namespace

TEST_CASE("straight motion integrates exactly") {
  const VehicleState s = step(make_state(), {1.0, 0.0}, 0.1);
  CHECK(s.x == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.y == 0.0);
  CHECK(s.theta == 0.0);
}

TEST_CASE("yaw rate matches v/L tan(delta)") {
  VehicleState s = make_state();
  s.wheelbase = 0.3;
  s.delta_max = 1.0;
  const double dt = 1e-7;
  const VehicleState next = step(s, {1.0, kPi / 4.0}, dt);
  CHECK(next.theta / dt == doctest::Approx(1.0 / 0.3).epsilon(1e-6));
}

TEST_CASE("constant steering traces the bicycle turning circle") {
  VehicleState s = make_state(1.0, 2.0, 0.3);
  const double delta = 0.45;
  const double expected_radius = s.wheelbase / std::tan(delta);
  std::vector<Vec2> pts;
  for (int i = 0; i < 400; ++i) {
    s = step(s, {0.8, delta}, 0.01);
    pts.push_back(s.position());
  }
  // Circumradius from three well-separated trajectory points.
  const Vec2 a = pts[50], b = pts[180], c = pts[320];
  const double la = distance(b, c), lb = distance(a, c), lc = distance(a, b);
  const double area = 0.5 * std::abs((b - a).cross(c - a));
  const double radius = la * lb * lc / (4.0 * area);
  CHECK(radius == doctest::Approx(expected_radius).epsilon(0.001));
}

TEST_CASE("zero speed is the identity for any steering") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const VehicleState s = make_state(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                                      rng.uniform(-3.0, 3.0));
    const VehicleState next = step(s, {0.0, rng.uniform(-0.6, 0.6)}, 0.05);
    CHECK(next.x == s.x);
    CHECK(next.y == s.y);
    CHECK(next.theta == s.theta);
  }
}

TEST_CASE("RK4 observed convergence order is at least 3.8") {
  const VehicleState s0 = make_state(0.0, 0.0, 0.2);
  const double v = 1.0, delta = 0.5, horizon = 1.0;
  auto integrate = [&](double dt) {
    VehicleState s = s0;
    const int n = static_cast<int>(std::round(horizon / dt));
    for (int i = 0; i < n; ++i) s = step(s, {v, delta}, dt);
    return s;
  };
  const VehicleState exact = closed_form(s0, v, delta, horizon);
  double prev_err = -1.0;
  for (const double dt : {0.1, 0.05, 0.025}) {
    const VehicleState got = integrate(dt);
    const double err = std::hypot(got.x - exact.x, got.y - exact.y) +
                       std::abs(wrap_angle(got.theta - exact.theta));
    if (prev_err > 0.0) {
      const double order = std::log2(prev_err / err);
      CHECK(order >= 3.8);
    }
    prev_err = err;
  }
}

TEST_CASE("theta stays wrapped to (-pi, pi]") {
  VehicleState s = make_state(0.0, 0.0, 3.1);
  for (int i = 0; i < 200; ++i) {
    s = step(s, {1.0, 0.6}, 0.05);
    CHECK(s.theta > -kPi);
    CHECK(s.theta <= kPi);
  }
  const VehicleState r = apply_perturbation(
      s, Rotate{kPi}, OccupancyGrid(0.1, {-5.0, -5.0}, 100, 100, Cell::Free));
  CHECK(r.theta > -kPi);
  CHECK(r.theta <= kPi);
}

TEST_CASE("ds_to_command tracks an aligned field directly") {
  const CommandGains gains;
  const DriveCommand cmd = ds_to_command(make_state(), {0.5, 0.0}, gains);
  CHECK(cmd.v == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cmd.delta == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ds_to_command returns zero for a zero field") {
  const DriveCommand cmd = ds_to_command(make_state(), {0.0, 0.0}, CommandGains{});
  CHECK(cmd.v == 0.0);
  CHECK(cmd.delta == 0.0);
}

TEST_CASE("perpendicular field saturates the steering") {
  const CommandGains gains;  // k_delta * pi/2 >> delta_max
  const DriveCommand cmd = ds_to_command(make_state(), {0.0, 0.7}, gains);
  CHECK(std::abs(cmd.delta) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(cmd.v == doctest::Approx(0.7).epsilon(1e-12));  // |e| = pi/2: no slow-down yet
}

TEST_CASE("misaligned field creeps forward, opposed field reverses") {
  const CommandGains gains;
  // ~110 degrees off: creeping forward turn.
  const DriveCommand creep = ds_to_command(make_state(0, 0, 0), {-0.35, 0.94}, gains);
  CHECK(creep.v > 0.0);
  CHECK(creep.v == doctest::Approx(gains.creep_fraction * 1.0).epsilon(1e-9));
  CHECK(creep.delta == 0.6);
  // Nearly opposed: reverse with the nose swinging toward the field.
  const DriveCommand rev = ds_to_command(make_state(0, 0, 0), {-1.0, 0.1}, gains);
  CHECK(rev.v < 0.0);
  CHECK(std::abs(rev.delta) == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("reverse mode monotonically shrinks a large heading error") {
  const CommandGains gains;
  VehicleState s = make_state(0.0, 0.0, kPi);  // facing exactly away from +x field
  const Vec2 field{1.0, 0.0};
  double prev = std::abs(wrap_angle(std::atan2(field.y, field.x) - s.theta));
  for (int i = 0; i < 2000; ++i) {
    const DriveCommand cmd = ds_to_command(s, field, gains);
    s = step(s, cmd, 1.0 / 60.0);
    const double err = std::abs(wrap_angle(std::atan2(field.y, field.x) - s.theta));
    CHECK(err <= prev + 1e-9);
    prev = err;
    if (err < 0.05) break;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("perturbations move the pose as specified") {
  const OccupancyGrid free_grid(0.1, {-10.0, -10.0}, 200, 200, Cell::Free);
  SUBCASE("lateral-left translate") {
    const VehicleState s = apply_perturbation(make_state(), Translate{2.5, kPi / 2.0}, free_grid);
    CHECK(s.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.y == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(s.theta == 0.0);
  }
  SUBCASE("rotate wraps") {
    const VehicleState s =
        apply_perturbation(make_state(0, 0, 3.0), Rotate{kPi / 2.0}, free_grid);
    CHECK(s.theta == doctest::Approx(3.0 + kPi / 2.0 - 2.0 * kPi).epsilon(1e-12));
  }
  SUBCASE("corner trap into an occupied cell is rejected") {
    OccupancyGrid grid = free_grid;
    grid.fill_rect({1.0, 1.0}, {2.0, 2.0}, Cell::Occupied);
    CHECK_THROWS_AS(apply_perturbation(make_state(), CornerTrap{1.5, 1.5, 0.0}, grid),
                    PerturbationIntoObstacleError);
  }
}

TEST_CASE("simulated scans see the true walls") {
  OccupancyGrid world(0.05, {0.0, 0.0}, 100, 100, Cell::Free);
  world.fill_rect({4.0, 0.0}, {5.0, 5.0}, Cell::Occupied);  // wall to the right
  ScanParams params;
  params.beam_count = 181;
  params.fov = kPi;
  params.max_range = 10.0;
  const VehicleState s = make_state(1.0, 2.5, 0.0);
  const RangeScan scan = simulate_scan(world, s, params);
  REQUIRE(scan.ranges.size() == 181);
  // The forward beam hits the wall ~3 m ahead (cell-center quantized).
  const double forward = scan.ranges[90];
  CHECK(forward == doctest::Approx(3.0).epsilon(0.05));
  // Integrating into an unknown grid reproduces an occupied front.
  OccupancyGrid known(0.05, {0.0, 0.0}, 100, 100, Cell::Unknown);
  known.integrate_scan(scan);
  CHECK(known.is_free({2.5, 2.5}));
  CHECK(known.at(known.world_to_cell({4.02, 2.5})) == Cell::Occupied);
}

TEST_CASE("pure pursuit tracks, drops stale paths, and holds at the end") {
  PurePursuit::Config config;
  config.lookahead = 0.8;
  config.drop_distance = 0.6;
  config.goal_radius = 0.3;
  PurePursuit pursuit(config);
  CHECK_FALSE(pursuit.command(make_state(), 1.0).has_value());

  WaypointPath path;
  path.waypoints = {{0.0, 0.0}, {2.0, 0.0}, {4.0, 0.0}};
  path.cost = 4.0;
  pursuit.set_path(path);

  SUBCASE("tracks toward the lookahead point") {
    const auto cmd = pursuit.command(make_state(0.2, 0.3, 0.0), 1.0);
    REQUIRE(cmd.has_value());
    CHECK(cmd->v == doctest::Approx(1.0));
    CHECK(cmd->delta < 0.0);  // steer back down toward the path
  }
  SUBCASE("stale when far from the path") {
    CHECK_FALSE(pursuit.command(make_state(1.0, 2.0, 0.0), 1.0).has_value());
  }
  SUBCASE("holds position once the buffer is consumed") {
    const auto cmd = pursuit.command(make_state(3.9, 0.05, 0.0), 1.0);
    REQUIRE(cmd.has_value());
    CHECK(cmd->v == 0.0);
  }
}
