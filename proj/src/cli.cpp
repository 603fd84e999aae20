#include "drnav/cli.hpp"

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "drnav/error.hpp"
#include "drnav/estimator.hpp"
#include "drnav/eval.hpp"
#include "drnav/scenarios.hpp"
#include "drnav/simulator.hpp"
#include "drnav/trace.hpp"

namespace drnav {

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

void simulate_to(const ScenarioSpec& spec, const GlobalConfig& cfg, const std::filesystem::path& out_dir) {
  const auto sim = simulate(spec, cfg.noise);
  emit(sim, out_dir);
}

}  // namespace

int cmd_simulate(const std::filesystem::path& scenario, const GlobalConfig& cfg, const std::filesystem::path& out_dir,
                 std::ostream& err) {
  return guarded(err, [&] { simulate_to(load_scenario(scenario), cfg, out_dir); });
}

int cmd_simulate_builtin(const std::string& scenario, const GlobalConfig& cfg, const std::filesystem::path& out_dir,
                         std::ostream& err) {
  return guarded(err, [&] { simulate_to(builtin_scenario(scenario), cfg, out_dir); });
}

int cmd_run(const std::filesystem::path& trace, const std::filesystem::path& db, const GlobalConfig& cfg,
            const std::filesystem::path& out, std::ostream& err) {
  return guarded(err, [&] {
    const Trace t = load_trace(trace);
    EstimatorConfig ec = cfg.estimator;
    std::vector<LandmarkFingerprint> landmarks;
    if (db.empty()) {
      ec.landmarks_enabled = false;
    } else {
      landmarks = load_landmark_db(db);
    }
    const auto poses = run(t, landmarks, ec);
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    save_poses(out, poses);
  });
}

int cmd_eval(const std::filesystem::path& poses, const std::filesystem::path& truth, const GlobalConfig& cfg,
             const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto est = load_poses(poses);
    const auto rows = load_truth(truth);
    const auto report = evaluate(est, rows, cfg.eval);
    write_report(out_dir, report, est);
    out << summary_json(report).dump(2) << '\n';
  });
}

void write_patterns(std::ostream& out, std::span<const DetectedPattern> patterns) {
  out << "kind,t_start,t_end,t_anchor,heading_delta_deg";
  for (std::size_t i = 0; i < kFeatureLength; ++i) out << ",f" << i;
  out << '\n';
  for (const auto& p : patterns) {
    out << fmt::format("{},{},{},{},{}", to_string(p.kind), p.t_start, p.t_end, p.t_anchor, p.heading_delta);
    for (double f : p.features) out << fmt::format(",{}", f);
    out << '\n';
  }
}

int cmd_detect(const std::filesystem::path& trace, const GlobalConfig& cfg, const std::filesystem::path& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const auto analysis = analyze_trace(load_trace(trace), cfg.estimator);
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    std::ofstream f(out);
    if (!f) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", out.string()));
    write_patterns(f, analysis.patterns);
  });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dead-reckoning localization toolkit"};
  app.require_subcommand(1);
  app.footer(config_help());

  std::string config_path;
  std::vector<std::string> overrides;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override one config key, key=value")->take_all();
    sub->footer(config_help());
  };

  std::string scenario_path, builtin, out_dir = "out";
  std::optional<std::uint64_t> seed;
  auto* sim = app.add_subcommand("simulate", "simulate a scenario into trace.jsonl, landmarks.json, truth.csv");
  auto* scen_opt = sim->add_option("--scenario", scenario_path, "scenario JSON file");
  auto* builtin_opt = sim->add_option("--builtin", builtin, "builtin scenario name")
                          ->check(CLI::IsMember(builtin_scenario_names()));
  scen_opt->excludes(builtin_opt);
  sim->add_option("--seed", seed, "noise seed, same as --set noise.seed=N");
  sim->add_option("--out", out_dir, "output directory")->capture_default_str();
  common(sim);

  std::string trace_path, db_path, out_path = "poses.csv";
  auto* run_cmd = app.add_subcommand("run", "estimate one pose per slot from a trace");
  run_cmd->add_option("--trace", trace_path, "trace JSON lines")->required();
  run_cmd->add_option("--db", db_path, "landmark database; without it calibration is off");
  run_cmd->add_option("--out", out_path, "pose CSV")->capture_default_str();
  common(run_cmd);

  std::string poses_path, truth_path, report_dir = "report";
  auto* eval_cmd = app.add_subcommand("eval", "score poses against truth and print the summary JSON");
  eval_cmd->add_option("--poses", poses_path, "pose CSV")->required();
  eval_cmd->add_option("--truth", truth_path, "truth CSV")->required();
  eval_cmd->add_option("--out", report_dir, "report directory")->capture_default_str();
  common(eval_cmd);

  std::string detect_trace, patterns_path = "patterns.csv";
  auto* detect_cmd = app.add_subcommand("detect", "run landmark pattern detection only");
  detect_cmd->add_option("--trace", detect_trace, "trace JSON lines")->required();
  detect_cmd->add_option("--out", patterns_path, "pattern CSV")->capture_default_str();
  common(detect_cmd);

  std::string scenario_name, scenario_out;
  auto* scen_cmd = app.add_subcommand("scenario", "write a builtin scenario as JSON");
  scen_cmd->add_option("name", scenario_name, "builtin scenario")
      ->required()
      ->check(CLI::IsMember(builtin_scenario_names()));
  scen_cmd->add_option("--out", scenario_out, "output file, default standard output");

  auto* cfg_cmd = app.add_subcommand("config", "print the effective config as JSON");
  common(cfg_cmd);

  std::vector<const char*> argv;
  argv.push_back("drnav");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (*scen_cmd) {
    return guarded(err, [&] {
      const auto j = to_json(builtin_scenario(scenario_name));
      if (scenario_out.empty()) {
        out << j.dump(2) << '\n';
      } else {
        save_scenario(scenario_out, builtin_scenario(scenario_name));
      }
    });
  }

  GlobalConfig cfg;
  if (guarded(err, [&] {
        if (seed) overrides.push_back(fmt::format("noise.seed={}", *seed));
        cfg = load_config(config_path, overrides);
      }) != 0) {
    return 1;
  }

  if (*sim) {
    if (builtin.empty() && scenario_path.empty()) {
      err << "error: simulate needs --scenario or --builtin\n";
      return 1;
    }
    return builtin.empty() ? cmd_simulate(scenario_path, cfg, out_dir, err)
                           : cmd_simulate_builtin(builtin, cfg, out_dir, err);
  }
  if (*run_cmd) return cmd_run(trace_path, db_path, cfg, out_path, err);
  if (*eval_cmd) return cmd_eval(poses_path, truth_path, cfg, report_dir, out, err);
  if (*detect_cmd) return cmd_detect(detect_trace, cfg, patterns_path, err);
  out << to_json(cfg).dump(2) << '\n';
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace drnav
