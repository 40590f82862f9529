#include "slipgait/scenario.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "slipgait/errors.hpp"

namespace slipgait {

namespace fs = std::filesystem;
using nlohmann::json;

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario config parse error: " + std::string(e.what()));
  }
  ScenarioConfig c;
  c.robot_file = j.value("robot", "");
  c.gait_file = j.value("gait", "");
  if (j.contains("mu")) c.mu_override = j.at("mu").get<double>();
  c.steps = j.value("steps", 30);
  c.out_dir = j.value("out", "out");
  c.seed = j.value("seed", std::uint64_t{0});
  c.workers = j.value("workers", 1);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.optimizer.intervals = o.value("intervals", 3);
    c.optimizer.cycle = o.value("cycle", "slip_stick");
    c.optimizer.step_length = o.value("step_length", 0.25);
    c.optimizer.epsilon = o.value("epsilon", 10.0);
    c.optimizer.max_iter = o.value("max_iter", 400);
    c.optimizer.tol_feas = o.value("tol_feas", 1e-6);
    c.optimizer.guess = o.value("guess", "kinematic");
    c.optimizer.warm_start = o.value("warm_start", "");
    c.optimizer.validate_walk = o.value("validate_walk", true);
    c.optimizer.validate_steps = o.value("validate_steps", 30);
  }
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    c.sim.abs_tol = s.value("abs_tol", c.sim.abs_tol);
    c.sim.rel_tol = s.value("rel_tol", c.sim.rel_tol);
    c.sim.sample_period = s.value("sample_period", c.sim.sample_period);
    c.sim.max_segment_time = s.value("max_segment_time",
                                     c.sim.max_segment_time);
  }
  if (c.mu_override && *c.mu_override < 0.0) {
    throw ConfigError("mu override must be >= 0");
  }
  return c;
}

void ScenarioConfig::save(const std::string& path) const {
  json j;
  j["robot"] = robot_file;
  j["gait"] = gait_file;
  if (mu_override) j["mu"] = *mu_override;
  j["steps"] = steps;
  j["out"] = out_dir;
  j["seed"] = seed;
  j["workers"] = workers;
  j["optimizer"] = {{"intervals", optimizer.intervals},
                    {"cycle", optimizer.cycle},
                    {"step_length", optimizer.step_length},
                    {"epsilon", optimizer.epsilon},
                    {"max_iter", optimizer.max_iter},
                    {"tol_feas", optimizer.tol_feas},
                    {"guess", optimizer.guess},
                    {"warm_start", optimizer.warm_start},
                    {"validate_walk", optimizer.validate_walk},
                    {"validate_steps", optimizer.validate_steps}};
  j["sim"] = {{"abs_tol", sim.abs_tol},
              {"rel_tol", sim.rel_tol},
              {"sample_period", sim.sample_period},
              {"max_segment_time", sim.max_segment_time}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario config: " + path);
  out << j.dump(2) << "\n";
}

RobotParams ScenarioConfig::load_robot() const {
  RobotParams p = robot_file.empty() ? RobotParams::default_biped()
                                     : RobotParams::load(robot_file);
  if (mu_override) p.mu = *mu_override;
  p.validate();
  return p;
}

namespace {

int outcome_exit(const WalkResult& r) {
  switch (r.outcome) {
    case WalkResult::Outcome::Completed: return kExitOk;
    case WalkResult::Outcome::Fell: return kExitFell;
    case WalkResult::Outcome::Stalled: return kExitStalled;
    case WalkResult::Outcome::Error: return kExitIntegration;
  }
  return kExitInternal;
}

void write_run_outputs(const fs::path& dir, const RobotParams& params,
                       const WalkResult& run) {
  run.traj.write_csv((dir / "trajectory.csv").string());
  write_event_log((dir / "events.log").string(), params, run.traj.events);
  try {
    const GaitReport rep = mcot_plus(run.traj, params);
    rep.write((dir / "report.txt").string());
  } catch (const Error&) {
    // too little data for a report (e.g. immediate fall); traj still written
  }
}

void save_decision_vector(const std::string& path, const Eigen::VectorXd& x,
                          const std::string& cycle, int intervals) {
  json j;
  j["cycle"] = cycle;
  j["intervals"] = intervals;
  j["x"] = std::vector<double>(x.data(), x.data() + x.size());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write decision vector: " + path);
  out << j.dump() << "\n";
}

Eigen::VectorXd load_decision_vector(const std::string& path,
                                     const std::string& expect_cycle,
                                     int expect_intervals) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open warm start: " + path);
  json j;
  in >> j;
  if (j.value("cycle", "") != expect_cycle ||
      j.value("intervals", -1) != expect_intervals) {
    throw ConfigError("warm start layout does not match optimizer config");
  }
  const auto& v = j.at("x");
  Eigen::VectorXd x(v.size());
  for (size_t i = 0; i < v.size(); ++i) x[i] = v[i].get<double>();
  return x;
}

}  // namespace

int cmd_simulate(const ScenarioConfig& cfg) {
  RobotParams params;
  GaitFile gf;
  try {
    params = cfg.load_robot();
    if (cfg.gait_file.empty()) throw ConfigError("simulate needs a gait file");
    gf = GaitFile::load(cfg.gait_file);
    if (!gf.initial_state) {
      throw ConfigError("gait file has no initial_state");
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;  // nothing has been written
  }

  fs::create_directories(cfg.out_dir);
  HybridState x0;
  x0.c = gf.initial_state->c;
  x0.domain = gf.initial_state->domain;
  const WalkResult run =
      walk(params, x0, make_fl_controller(params, gf.gait), cfg.steps,
           cfg.sim);
  write_run_outputs(cfg.out_dir, params, run);

  std::cout << "steps=" << run.steps_completed << "/" << cfg.steps
            << " outcome=" << static_cast<int>(run.outcome);
  if (!run.message.empty()) std::cout << " (" << run.message << ")";
  std::cout << "\n";
  return outcome_exit(run);
}

int cmd_optimize(const ScenarioConfig& cfg) {
  RobotParams params;
  try {
    params = cfg.load_robot();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  CycleSpec cycle;
  if (cfg.optimizer.cycle == "slip_stick") {
    cycle = CycleSpec::slip_stick_cycle(cfg.optimizer.intervals);
  } else if (cfg.optimizer.cycle == "stick") {
    cycle = CycleSpec::stick_cycle(cfg.optimizer.intervals);
  } else {
    std::cerr << "config error: unknown cycle '" << cfg.optimizer.cycle
              << "'\n";
    return kExitConfig;
  }

  CollocationOptions copts;
  copts.epsilon = cfg.optimizer.epsilon;
  copts.step_length = cfg.optimizer.step_length;
  copts.u_max = 40.0;
  NlpOptions nopts;
  nopts.max_iter = cfg.optimizer.max_iter;
  nopts.tol_feas = cfg.optimizer.tol_feas;

  fs::create_directories(cfg.out_dir);
  CollocationProblem problem(params, cycle, copts);
  Eigen::VectorXd guess;
  try {
    if (!cfg.optimizer.warm_start.empty()) {
      guess = load_decision_vector(cfg.optimizer.warm_start,
                                   cfg.optimizer.cycle,
                                   cfg.optimizer.intervals);
    } else if (cfg.optimizer.guess == "standing") {
      guess = initial_guess(problem, GuessStrategy::Standing, cfg.seed);
    } else {
      guess = initial_guess(problem, GuessStrategy::Kinematic, cfg.seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  SqpSolver solver;
  const NlpResult result = solver.solve(problem, guess, nopts);
  GaitSynthesis syn = extract_solution(problem, result);

  // Best iterate and reports are always written.
  GaitFile gf;
  gf.gait = syn.gait;
  gf.initial_state = syn.initial_state;
  gf.save((fs::path(cfg.out_dir) / "gait.json").string());
  syn.reference.write_csv((fs::path(cfg.out_dir) / "reference.csv").string());
  save_decision_vector((fs::path(cfg.out_dir) / "decision.json").string(),
                       result.x, cfg.optimizer.cycle, cfg.optimizer.intervals);

  std::ofstream rep(fs::path(cfg.out_dir) / "solve_report.txt");
  rep.precision(12);
  rep << "status = " << status_name(result.status) << "\n"
      << "objective = " << result.objective << "\n"
      << "max_violation = " << result.max_violation << "\n"
      << "iterations = " << result.iterations << "\n"
      << "message = " << result.message << "\n";

  std::cout << "solve: " << status_name(result.status)
            << " objective=" << result.objective
            << " violation=" << result.max_violation
            << " iters=" << result.iterations << "\n";

  if (result.status == SolveStatus::Infeasible) return kExitInfeasible;
  if (result.status != SolveStatus::Optimal) return kExitSolver;

  if (cfg.optimizer.validate_walk) {
    HybridState x0;
    x0.c = syn.initial_state.c;
    x0.domain = syn.initial_state.domain;
    const WalkResult run = walk(params, x0, syn.gait,
                                cfg.optimizer.validate_steps, cfg.sim);
    rep << "validation_steps = " << run.steps_completed << "\n";
    std::cout << "validation walk: " << run.steps_completed << "/"
              << cfg.optimizer.validate_steps << " steps\n";
    if (run.outcome != WalkResult::Outcome::Completed) {
      std::cerr << "validation walk failed: " << run.message << "\n";
      return kExitFell;
    }
  }
  return kExitOk;
}

int cmd_analyze(const ScenarioConfig& cfg) {
  try {
    const RobotParams params = cfg.load_robot();
    const fs::path dir(cfg.out_dir);
    const Trajectory traj =
        Trajectory::read_csv((dir / "trajectory.csv").string());
    const GaitReport rep = mcot_plus(traj, params);
    rep.write((dir / "report.txt").string());
    std::cout << "mcot_plus=" << rep.mcot_plus << " speed=" << rep.avg_speed
              << " mean_step_slip=" << rep.mean_step_slip << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "analyze error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int cmd_sweep(const ScenarioConfig& cfg, const std::string& parameter,
              const std::vector<double>& values) {
  if (parameter != "mu" && parameter != "step_length") {
    std::cerr << "config error: sweep parameter must be mu or step_length\n";
    return kExitConfig;
  }
  fs::create_directories(cfg.out_dir);

  struct Cell {
    double value;
    int exit_code = kExitInternal;
    GaitReport report;
    bool has_report = false;
  };
  std::vector<Cell> cells(values.size());
  for (size_t i = 0; i < values.size(); ++i) cells[i].value = values[i];

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      Cell& cell = cells[i];
      ScenarioConfig sub = cfg;
      std::ostringstream name;
      name << parameter << "_" << cell.value;
      sub.out_dir = (fs::path(cfg.out_dir) / name.str()).string();
      sub.workers = 1;
      if (parameter == "mu") {
        sub.mu_override = cell.value;
      } else {
        sub.optimizer.step_length = cell.value;
      }
      try {
        cell.exit_code = parameter == "mu" ? cmd_simulate(sub)
                                           : cmd_optimize(sub);
        const fs::path rep = fs::path(sub.out_dir) / "report.txt";
        if (fs::exists(rep)) {
          cell.report = GaitReport::read(rep.string());
          cell.has_report = true;
        }
      } catch (const std::exception& e) {
        cell.exit_code = kExitInternal;
      }
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(cfg.workers, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::ofstream table(fs::path(cfg.out_dir) / "sweep.csv");
  table.precision(12);
  table << parameter << ",exit,mcot_plus,avg_speed,mean_step_slip,steps\n";
  for (const auto& cell : cells) {
    table << cell.value << "," << cell.exit_code << ",";
    if (cell.has_report) {
      table << cell.report.mcot_plus << "," << cell.report.avg_speed << ","
            << cell.report.mean_step_slip << ","
            << cell.report.per_step_slip.size();
    } else {
      table << ",,,";
    }
    table << "\n";
  }
  return kExitOk;
}

}  // namespace slipgait
