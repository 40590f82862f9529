#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "slipgait/contact.hpp"
#include "slipgait/control.hpp"
#include "slipgait/nlp.hpp"
#include "slipgait/sim.hpp"

namespace slipgait {

/// Hermite-Simpson conditions for one interval [a, b] with midpoint m,
/// given the state-derivative samples f at the three points:
///   midpoint: x_m - (x_a + x_b)/2 - h (f_a - f_b)/8
///   simpson:  x_b - x_a - h (f_a + 4 f_m + f_b)/6
struct HsDefects {
  Eigen::VectorXd midpoint;
  Eigen::VectorXd simpson;
};
HsDefects hermite_simpson_defects(const Eigen::VectorXd& x_a,
                                  const Eigen::VectorXd& x_m,
                                  const Eigen::VectorXd& x_b,
                                  const Eigen::VectorXd& f_a,
                                  const Eigen::VectorXd& f_m,
                                  const Eigen::VectorXd& f_b, double h);

/// One continuous phase of the cycle, transcribed over `intervals`
/// Hermite-Simpson intervals (2*intervals + 1 nodes).
struct PhaseSpec {
  DomainId domain;
  int intervals = 3;
};

/// Ordered cycle through the transition graph.  edges[i] connects phase i to
/// phase (i+1) % n; the last edge wraps and is subject to the periodicity
/// (relabel) condition.
struct CycleSpec {
  std::vector<PhaseSpec> phases;
  std::vector<EdgeId> edges;

  /// Throws InvalidSequence if an edge's endpoints do not match the adjacent
  /// phase domains or the wrap edge is not an impact.
  void validate() const;

  /// The default synthesis cycle: slipping touchdown -> slip -> stick ->
  /// slipping touchdown, forward slip sign.
  static CycleSpec slip_stick_cycle(int intervals_per_phase = 3);
  /// All-stick walking cycle: stick -> sticking touchdown.
  static CycleSpec stick_cycle(int intervals_per_phase = 3);
};

struct CollocationOptions {
  double epsilon = 10.0;        // output dynamics rate used in synthesis
  double v_slip_min = 1e-3;     // slip-node tangential speed floor, m/s
  double cone_margin = 1e-4;    // stick-node friction-cone strictness, N
  double impulse_margin = 1e-3; // impact cone-violation margin, N s
  double lambda_z_min = 1.0;    // normal-force floor at nodes, N
  double impulse_z_min = 0.1;   // normal-impulse floor at impacts, N s
  double slip_denom_min = 5e-3; // solvability floor for the slip denominator
  double touchdown_speed_min = 0.05;  // m/s downward at touchdown
  double step_length = 0.25;    // hip travel per cycle, m
  double swing_clearance = 0.03;  // m, at phase-middle nodes
  double u_max = 40.0;          // N m
  double qd_max = 4.0;          // rad/s, actuated joints
  double duration_min = 0.15;   // s per phase
  double duration_max = 1.2;
  double pitch_max = 0.6;       // rad
  double knee_min = -2.4, knee_max = -0.05;  // rad (flexion negative)
  double hip_min = -1.2, hip_max = 1.2;
  double height_min = 0.4, height_max = 1.02;  // of leg length, absolute m set below
  bool simpson_weights = false;  // integral-weighted objective
  bool monotone_phase = true;    // require pdot >= 0 at nodes
};

/// Direct-collocation transcription of the periodic gait problem over a
/// prescribed cycle.  Decision vector:
///   [ alpha (20) | p0 | p1 | per phase: T_d, then per node x(14) xdot(14)
///     u(4) ].
/// Constraint classes: node dynamics + output dynamics, Hermite-Simpson
/// defects, boundary/periodicity chains through the reset maps, bounds, and
/// per-node domain-membership (cone, normal force, swing clearance).
class CollocationProblem : public NlpProblem {
 public:
  CollocationProblem(const RobotParams& params, const CycleSpec& cycle,
                     const CollocationOptions& opts);

  int num_vars() const override { return num_vars_; }
  int num_eq() const override { return num_eq_; }
  int num_ineq() const override { return num_ineq_; }
  Eigen::VectorXd lower_bounds() const override { return lb_; }
  Eigen::VectorXd upper_bounds() const override { return ub_; }
  double objective(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const override;
  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& eq,
                   Eigen::VectorXd& ineq) const override;
  void constraint_jacobians(const Eigen::VectorXd& x, Eigen::MatrixXd& jac_eq,
                            Eigen::MatrixXd& jac_ineq) const override;

  // Layout accessors.
  int idx_alpha() const { return 0; }
  int idx_p0() const { return 20; }
  int idx_p1() const { return 21; }
  int idx_duration(int phase) const { return phase_base_[phase]; }
  int idx_state(int phase, int node) const {
    return phase_base_[phase] + 1 + node * 32;
  }
  int idx_xdot(int phase, int node) const {
    return idx_state(phase, node) + 14;
  }
  int idx_input(int phase, int node) const {
    return idx_state(phase, node) + 28;
  }
  int nodes_in_phase(int phase) const {
    return 2 * cycle_.phases[phase].intervals + 1;
  }
  int num_phases() const { return static_cast<int>(cycle_.phases.size()); }
  const CycleSpec& cycle() const { return cycle_; }
  const CollocationOptions& options() const { return opts_; }
  const RobotParams& robot() const { return params_; }

  struct BlockInfo {
    std::string name;
    int eq_dim;
    int ineq_dim;
    bool analytic_jacobian;
  };
  std::vector<BlockInfo> block_info() const;

 private:
  struct Block {
    std::string name;
    int eq_dim = 0;
    int ineq_dim = 0;
    int eq_offset = 0;
    int ineq_offset = 0;
    std::vector<int> footprint;
    std::function<void(const Eigen::VectorXd&, Eigen::Ref<Eigen::VectorXd>,
                       Eigen::Ref<Eigen::VectorXd>)>
        eval;
    // Analytic Jacobian over footprint columns (optional).
    std::function<void(const Eigen::VectorXd&, Eigen::Ref<Eigen::MatrixXd>,
                       Eigen::Ref<Eigen::MatrixXd>)>
        jac;
  };

  void build_layout();
  void build_bounds();
  void build_blocks();
  void add_block(Block b);

  RobotParams params_;
  CycleSpec cycle_;
  CollocationOptions opts_;
  int num_vars_ = 0;
  int num_eq_ = 0;
  int num_ineq_ = 0;
  std::vector<int> phase_base_;
  Eigen::VectorXd lb_, ub_;
  std::vector<Block> blocks_;
};

enum class GuessStrategy { Standing, Kinematic, WarmPerturb };

/// Deterministic initial guesses.  Kinematic interpolates between mirrored
/// touchdown poses with constant hip speed and fits alpha by least squares;
/// WarmPerturb jitters `base` with the seeded RNG.
Eigen::VectorXd initial_guess(const CollocationProblem& problem,
                              GuessStrategy strategy, std::uint64_t seed = 0,
                              const Eigen::VectorXd* base = nullptr);

struct GaitSynthesis {
  NlpResult nlp;
  GaitParams gait;
  GaitInitialState initial_state;
  Trajectory reference;  // node-sampled reference trajectory
};

/// Extracts the controller parameters and reference data from a solution
/// vector.
GaitSynthesis extract_solution(const CollocationProblem& problem,
                               const NlpResult& result);

/// Assemble + solve + extract, with the built-in SQP solver unless another
/// NlpSolver is supplied.
GaitSynthesis solve_gait(const RobotParams& params, const CycleSpec& cycle,
                         const CollocationOptions& copts,
                         const NlpOptions& nopts,
                         const Eigen::VectorXd& guess,
                         NlpSolver* solver = nullptr);

}  // namespace slipgait
