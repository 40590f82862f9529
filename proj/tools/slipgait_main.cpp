// Command line front end: simulate / optimize / analyze / sweep.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slipgait/errors.hpp"
#include "slipgait/scenario.hpp"

using namespace slipgait;

int main(int argc, char** argv) {
  CLI::App app{"Planar biped stick-slip walking: simulation, gait synthesis "
               "and energy analysis"};
  app.require_subcommand(1);

  std::string config_path;
  double mu = -1.0;
  int steps = -1;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = -1;
  std::string gait_path, robot_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Scenario config (JSON)");
    sub->add_option("--robot", robot_path, "Robot parameter file");
    sub->add_option("--gait", gait_path, "Gait file");
    sub->add_option("--mu", mu, "Friction coefficient override");
    sub->add_option("--steps", steps, "Number of steps to simulate");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Deterministic seed")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--workers", workers, "Parallel sweep workers");
  };

  CLI::App* sim = app.add_subcommand("simulate", "Run a gait file");
  CLI::App* opt = app.add_subcommand("optimize", "Synthesize a gait");
  CLI::App* ana = app.add_subcommand("analyze",
                                     "Recompute the report from a CSV");
  CLI::App* swp = app.add_subcommand("sweep", "Run a parameter sweep");
  add_common(sim);
  add_common(opt);
  add_common(ana);
  add_common(swp);

  std::string sweep_parameter = "mu";
  std::vector<double> sweep_values;
  swp->add_option("--parameter", sweep_parameter, "mu or step_length");
  swp->add_option("--values", sweep_values, "Sweep values")->delimiter(',');

  // Optimizer knobs (optimize subcommand only).
  int intervals = -1;
  std::string cycle, guess, warm_start;
  double step_length = -1.0;
  opt->add_option("--intervals", intervals, "Collocation intervals per phase");
  opt->add_option("--cycle", cycle, "slip_stick or stick");
  opt->add_option("--guess", guess, "kinematic or standing");
  opt->add_option("--warm-start", warm_start, "decision.json to start from");
  opt->add_option("--step-length", step_length, "Target hip travel per step");

  CLI11_PARSE(app, argc, argv);

  try {
    ScenarioConfig cfg;
    if (!config_path.empty()) cfg = ScenarioConfig::load(config_path);
    if (!robot_path.empty()) cfg.robot_file = robot_path;
    if (!gait_path.empty()) cfg.gait_file = gait_path;
    if (mu >= 0.0) cfg.mu_override = mu;
    if (steps >= 0) cfg.steps = steps;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_set) cfg.seed = seed;
    if (workers > 0) cfg.workers = workers;
    if (intervals > 0) cfg.optimizer.intervals = intervals;
    if (!cycle.empty()) cfg.optimizer.cycle = cycle;
    if (!guess.empty()) cfg.optimizer.guess = guess;
    if (!warm_start.empty()) cfg.optimizer.warm_start = warm_start;
    if (step_length > 0.0) cfg.optimizer.step_length = step_length;

    if (sim->parsed()) return cmd_simulate(cfg);
    if (opt->parsed()) return cmd_optimize(cfg);
    if (ana->parsed()) return cmd_analyze(cfg);
    if (swp->parsed()) return cmd_sweep(cfg, sweep_parameter, sweep_values);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
