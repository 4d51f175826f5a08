// sbamp command-line front end: map/scenario validation, single operations
// (plan, fit, simulate), and the three experiment reproductions. Every
// invocation writes its artifacts plus a manifest (file list + config hash)
// under --out, and identical inputs produce byte-identical outputs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbamp/experiments.hpp"
#include "sbamp/strings.hpp"

namespace fs = std::filesystem;
using namespace sbamp;

namespace {

uint64_t fnv1a(const std::string& data) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct OutputDir {
  fs::path dir;
  std::vector<std::pair<std::string, uint64_t>> artifacts;

  explicit OutputDir(const std::string& path) : dir(path) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw Error("output directory not writable: " + path);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << content;
    artifacts.emplace_back(name, fnv1a(content));
  }

  void finalize(const nlohmann::json& config) {
    nlohmann::json manifest;
    manifest["config"] = config;
    manifest["config_hash"] = fnv1a(config.dump());
    manifest["artifacts"] = nlohmann::json::array();
    for (const auto& [name, hash] : artifacts)
      manifest["artifacts"].push_back({{"path", name}, {"hash", hash}});
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
};

nlohmann::json scenario_config_json(const Scenario& sc) {
  // Defaults are printed into the manifest so published CSVs are
  // self-describing.
  return nlohmann::json::parse(scenario_to_json(sc, sc.name + ".map"));
}

Scenario load_or_builtin(const std::string& scenario_arg, const std::string& map_arg) {
  Scenario sc;
  if (scenario_arg == "builtin:empty") sc = make_empty_scenario();
  else if (scenario_arg == "builtin:exp1") sc = make_exp1_scenario();
  else if (scenario_arg == "builtin:exp2_translate")
    sc = make_exp2_scenario(Disturbance::Translate);
  else if (scenario_arg == "builtin:exp2_rotate") sc = make_exp2_scenario(Disturbance::Rotate);
  else if (scenario_arg == "builtin:exp2_corner_trap")
    sc = make_exp2_scenario(Disturbance::CornerTrap);
  else if (scenario_arg == "builtin:exp3") sc = make_exp3_scenario();
  else if (scenario_arg.rfind("builtin:", 0) == 0)
    throw ConfigError("unknown builtin scenario: " + scenario_arg);
  else if (scenario_arg.empty())
    throw ConfigError("--scenario is required");
  else {
    std::ifstream in(scenario_arg, std::ios::binary);
    if (!in) throw Error("cannot read scenario file: " + scenario_arg);
    std::ostringstream ss;
    ss << in.rdbuf();
    sc = scenario_from_json(ss.str(), fs::path(scenario_arg).parent_path().string());
  }
  if (!map_arg.empty()) sc.base_map = OccupancyGrid::load(map_arg);
  return sc;
}

void apply_overrides(Scenario& sc, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kv);
    apply_override(sc, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

std::vector<double> parse_dd_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(parse_double(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SBAMP: RRT* global planning + stable dynamical-system control"};
  app.require_subcommand(1);

  std::string scenario_arg, map_arg, out_arg = "out", mode_arg = "sbamp";
  std::string disturbance_arg = "rotate", dd_arg;
  std::vector<std::string> set_args;
  uint64_t seed = 1;
  int seeds_n = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_arg, "scenario file or builtin:<name>");
    cmd->add_option("--map", map_arg, "override map file");
    cmd->add_option("--out", out_arg, "output directory");
    cmd->add_option("--seed", seed, "base seed");
    cmd->add_option("--set", set_args, "override key=value (repeatable)");
  };

  CLI::App* validate = app.add_subcommand("validate", "parse a scenario and print it");
  add_common(validate);

  CLI::App* plan_cmd = app.add_subcommand("plan", "run one global plan, dump the path CSV");
  add_common(plan_cmd);

  CLI::App* fit_cmd = app.add_subcommand("fit", "plan once, fit the mixture, dump model JSON");
  add_common(fit_cmd);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "one full run with logs");
  add_common(sim_cmd);
  sim_cmd->add_option("--mode", mode_arg, "bare_rrt|sbamp");

  CLI::App* exp1_cmd = app.add_subcommand("exp1", "lateral perturbation sweep");
  add_common(exp1_cmd);
  exp1_cmd->add_option("--dd", dd_arg, "comma-separated teleport distances");
  exp1_cmd->add_option("--seeds", seeds_n, "runs per (mode, dd)");

  CLI::App* exp2_cmd = app.add_subcommand("exp2", "extreme-failure recovery thresholds");
  add_common(exp2_cmd);
  exp2_cmd->add_option("--mode", mode_arg, "bare_rrt|sbamp");
  exp2_cmd->add_option("--disturbance", disturbance_arg, "translate|rotate|corner_trap");

  CLI::App* exp3_cmd = app.add_subcommand("exp3", "randomized perturbation stress test");
  add_common(exp3_cmd);
  exp3_cmd->add_option("--seeds", seeds_n, "number of seeded runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) {
      Scenario sc = load_or_builtin(scenario_arg, map_arg);
      apply_overrides(sc, set_args);
      sc.validate();
      std::cout << scenario_to_json(sc, sc.name + ".map");
      return 0;
    }

    OutputDir out(out_arg);

    if (plan_cmd->parsed()) {
      Scenario sc = load_or_builtin(scenario_arg, map_arg);
      apply_overrides(sc, set_args);
      const OccupancyGrid planning = sc.base_map.inflated(sc.inflation_radius);
      Rng rng(seed);
      const PlanResult result = plan(planning, sc.start, sc.goal, sc.planner, rng);
      out.write("path.csv", path_to_csv(result.path));
      out.finalize(scenario_config_json(sc));
      std::cout << "plan: cost=" << format_double(result.path.cost)
                << " waypoints=" << result.path.waypoints.size()
                << " iterations=" << result.iterations_used << "\n";
      return 0;
    }

    if (fit_cmd->parsed()) {
      Scenario sc = load_or_builtin(scenario_arg, map_arg);
      apply_overrides(sc, set_args);
      const OccupancyGrid planning = sc.base_map.inflated(sc.inflation_radius);
      Rng rng(seed);
      const PlanResult result = plan(planning, sc.start, sc.goal, sc.planner, rng);
      const ds::DemoDataset demo =
          ds::synthesize_demo(result.path, sc.nominal_speed, sc.supervisor.demo_spacing);
      const ds::FitResult fitres =
          ds::fit(demo, sc.supervisor.mixture_k, sc.supervisor.eps_stab, sc.supervisor.fit);
      out.write("path.csv", path_to_csv(result.path));
      out.write("model.json", ds::model_to_json(fitres.model));
      out.finalize(scenario_config_json(sc));
      std::cout << "fit: k=" << fitres.model.k()
                << " mse=" << format_double(fitres.mean_squared_residual) << "\n";
      return 0;
    }

    if (sim_cmd->parsed()) {
      Scenario sc = load_or_builtin(scenario_arg, map_arg);
      apply_overrides(sc, set_args);
      const Mode mode = mode_from_name(mode_arg);
      const RunResult rr = run_scenario(sc, mode, seed);
      out.write("trajectory.csv", trajectory_to_csv(rr.logs.trajectory));
      out.write("events.csv", events_to_csv(rr.logs.supervisor_events));
      std::string metrics = "f_plan_hz,recovery,t_recover_s,collisions,cmd_rate_hz,"
                            "final_goal_error_m,reached_goal,mean_v_mps,elapsed_s\n";
      metrics += format_double(rr.metrics.f_plan_hz);
      metrics += std::string(",") + (rr.metrics.recovery ? "1" : "0") + ",";
      metrics += format_double(rr.metrics.time_to_recovery) + ",";
      metrics += std::to_string(rr.metrics.collisions) + ",";
      metrics += format_double(rr.metrics.min_command_rate_hz) + ",";
      metrics += format_double(rr.metrics.final_goal_error) + ",";
      metrics += std::string(rr.metrics.reached_goal ? "1" : "0") + ",";
      metrics += format_double(rr.metrics.mean_speed) + ",";
      metrics += format_double(rr.metrics.elapsed) + "\n";
      out.write("metrics.csv", metrics);
      out.write(sc.name + ".map", sc.base_map.to_text());
      out.write("scenario.json", scenario_to_json(sc, sc.name + ".map"));
      out.finalize(scenario_config_json(sc));
      std::cout << "simulate: reached_goal=" << rr.metrics.reached_goal
                << " collisions=" << rr.metrics.collisions
                << " f_plan=" << format_double(rr.metrics.f_plan_hz) << "\n";
      return 0;
    }

    if (exp1_cmd->parsed()) {
      Scenario sc = scenario_arg.empty() ? make_exp1_scenario()
                                         : load_or_builtin(scenario_arg, map_arg);
      apply_overrides(sc, set_args);
      sc.seeds = {seed};
      const int n = seeds_n > 0 ? seeds_n : sc.run_count;
      const std::vector<double> dd =
          dd_arg.empty() ? sc.exp1_dd : parse_dd_list(dd_arg);  // flag wins
      const Experiment1Result r = experiment1(sc, dd, n);
      out.write("experiment1.csv", r.csv);
      out.write("experiment1_fig5.csv", r.fig5_csv);
      out.write(sc.name + ".map", sc.base_map.to_text());
      out.write("scenario.json", scenario_to_json(sc, sc.name + ".map"));
      out.finalize(scenario_config_json(sc));
      std::cout << "exp1: " << r.rows.size() << " runs\n";
      return 0;
    }

    if (exp2_cmd->parsed()) {
      const Disturbance d = disturbance_from_name(disturbance_arg);
      Scenario sc =
          scenario_arg.empty() ? make_exp2_scenario(d) : load_or_builtin(scenario_arg, map_arg);
      apply_overrides(sc, set_args);
      const Mode mode = mode_from_name(mode_arg);
      const Experiment2Result r = experiment2(sc, mode, d);
      out.write("experiment2.csv", r.csv);
      out.write(sc.name + ".map", sc.base_map.to_text());
      out.write("scenario.json", scenario_to_json(sc, sc.name + ".map"));
      out.finalize(scenario_config_json(sc));
      std::cout << "exp2 " << disturbance_name(d) << " " << mode_name(mode)
                << ": threshold=" << format_double(r.threshold) << "\n";
      return 0;
    }

    if (exp3_cmd->parsed()) {
      Scenario sc = scenario_arg.empty() ? make_exp3_scenario()
                                         : load_or_builtin(scenario_arg, map_arg);
      apply_overrides(sc, set_args);
      sc.seeds = {seed};
      const int n = seeds_n > 0 ? seeds_n : 20;
      const Experiment3Result r = experiment3(sc, n);
      out.write("experiment3.csv", r.csv);
      out.write(sc.name + ".map", sc.base_map.to_text());
      out.write("scenario.json", scenario_to_json(sc, sc.name + ".map"));
      out.finalize(scenario_config_json(sc));
      std::cout << "exp3: recovery_rate=" << format_double(r.recovery_rate)
                << " collisions_on_recovered=" << r.collisions_on_recovered << "\n";
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
