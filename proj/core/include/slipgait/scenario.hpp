#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slipgait/collocation.hpp"
#include "slipgait/metrics.hpp"

namespace slipgait {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,     // unexpected error
  kExitConfig = 2,       // missing/invalid config or input file
  kExitFell = 3,         // walker fell (or validation walk failed)
  kExitIntegration = 4,  // integrator or contact-solver error
  kExitInfeasible = 5,   // optimizer: infeasible
  kExitSolver = 6,       // optimizer: other failure
  kExitStalled = 7,      // no progress (stalled walk)
};

struct OptimizerConfig {
  int intervals = 3;                // Hermite-Simpson intervals per phase
  std::string cycle = "slip_stick"; // or "stick"
  double step_length = 0.25;        // m
  double epsilon = 10.0;
  int max_iter = 400;
  double tol_feas = 1e-6;
  std::string guess = "kinematic";  // "kinematic", "standing"
  std::string warm_start;           // path to a previous decision.json
  bool validate_walk = true;
  int validate_steps = 30;
};

struct ScenarioConfig {
  std::string robot_file;           // empty -> built-in default parameters
  std::string gait_file;            // required by simulate
  std::optional<double> mu_override;
  int steps = 30;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int workers = 1;
  OptimizerConfig optimizer;
  SimOptions sim;

  static ScenarioConfig load(const std::string& path);
  void save(const std::string& path) const;

  RobotParams load_robot() const;  // applies the mu override
};

/// Runs the gait of `gait_file` for `steps` steps; writes trajectory.csv,
/// events.log and report.txt under out_dir.
int cmd_simulate(const ScenarioConfig& cfg);

/// Synthesizes a gait; writes gait.json (with the initial state),
/// reference.csv, decision.json and solve_report.txt; validates the result
/// by forward simulation before reporting success.
int cmd_optimize(const ScenarioConfig& cfg);

/// Recomputes report.txt from out_dir/trajectory.csv.
int cmd_analyze(const ScenarioConfig& cfg);

/// Runs one scenario per value of `parameter` ("mu" simulates the given gait
/// under each friction value; "step_length" re-optimizes per value), in
/// parallel up to cfg.workers, and aggregates sweep.csv.  Per-cell failures
/// are recorded and do not abort the sweep.
int cmd_sweep(const ScenarioConfig& cfg, const std::string& parameter,
              const std::vector<double>& values);

}  // namespace slipgait
