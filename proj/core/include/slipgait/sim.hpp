#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slipgait/control.hpp"
#include "slipgait/hybrid.hpp"

namespace slipgait {

/// Full simulator state: continuous state, active domain, step bookkeeping.
struct HybridState {
  Configuration c;
  DomainId domain = DomainId::stick();
  int step_index = 0;
  enum class Leg { Left, Right } stance_leg = Leg::Left;
  double cumulative_slip = 0.0;  // world-frame stance-foot slip, m
};

struct TrajectorySample {
  double t = 0.0;
  Vec7 q = Vec7::Zero();
  Vec7 qd = Vec7::Zero();
  Vec4 u = Vec4::Zero();
  double lambda_x = 0.0;
  double lambda_z = 0.0;
  DomainId domain;
  int step = 0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<GuardEvent> events;

  // CSV column order: t, q[7], qd[7], u[4], lambda_x, lambda_z, domain, step.
  // domain is 0 for stick, +1/-1 for slip with that sign.
  void write_csv(const std::string& path) const;
  static Trajectory read_csv(const std::string& path);
};

/// State-feedback controller: torque from time, state and active domain.
using Controller = std::function<Vec4(double t, const Configuration& c,
                                      const DynamicsTerms& terms,
                                      const DomainId& domain)>;

Controller make_fl_controller(const RobotParams& params,
                              const GaitParams& gait);
Controller make_pd_controller(const GaitParams& gait);
Controller make_zero_controller();

struct SimOptions {
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double init_dt = 1e-4;
  double max_dt = 0.01;           // keeps guard scanning dense
  double min_dt = 1e-14;          // below this the step size has collapsed
  double sample_period = 0.003;   // trajectory output period, s
  double event_time_tol = 1e-12;  // bisection window, s
  double event_value_tol = 1e-10; // |guard| at the reported event time
  double guard_arm_threshold = 1e-9;
  int guard_subsamples = 6;       // guard scans per accepted step
  double max_segment_time = 5.0;  // no event within -> stalled
  GuardOptions guards;
  double fall_height_frac = 0.6;  // of leg length
  double fall_pitch_limit = 1.0;  // rad
  double domain_check_tol = 1e-6; // tolerated transient lambda_z undershoot
};

struct SegmentResult {
  std::optional<GuardEvent> event;
  Configuration end;    // state at the event (pre-reset) or at t_end
  double end_time = 0.0;
};

/// Integrates one continuous domain with adaptive Runge-Kutta (dense output)
/// until the first guard crossing or t_end.  Samples are appended to `traj`
/// on the global grid driven by `next_sample_time`.  Throws
/// IntegrationFailure / PainleveSingularity / DomainViolation.
SegmentResult integrate_domain(const RobotParams& params,
                               const HybridState& state,
                               const Controller& controller, double t0,
                               double t_end, const SimOptions& opts,
                               Trajectory& traj, double& next_sample_time);

struct WalkResult {
  Trajectory traj;
  HybridState final_state;
  enum class Outcome { Completed, Fell, Stalled, Error } outcome;
  std::string message;
  int steps_completed = 0;
  std::vector<double> per_step_slip;  // m, one entry per completed step
};

/// Runs the hybrid automaton for n_steps touchdowns (or until failure),
/// applying identity resets on smooth switches and relabel + impact laws at
/// touchdowns.
WalkResult walk(const RobotParams& params, const HybridState& x0,
                const Controller& controller, int n_steps,
                const SimOptions& opts = {});

/// Convenience: walk with the feedback-linearizing controller of `gait`.
WalkResult walk(const RobotParams& params, const HybridState& x0,
                const GaitParams& gait, int n_steps,
                const SimOptions& opts = {});

// ---- step-to-step analysis ------------------------------------------------

/// A point on the Poincare section (post-impact states), world-x normalized
/// to zero.
struct SectionState {
  Configuration c;
  DomainId domain;
};

using ReducedState = Eigen::Matrix<double, 13, 1>;

/// Drops p_x: reduced = (q[1..6], qd[0..6]).
ReducedState to_reduced(const SectionState& s);
SectionState from_reduced(const ReducedState& r, const DomainId& domain);

/// One full step starting at a post-impact state; returns the next
/// post-impact state with p_x re-normalized.  Throws Error if the step does
/// not complete (fall, stall, integration failure).
SectionState poincare_map(const RobotParams& params, const SectionState& x,
                          const GaitParams& gait, const SimOptions& opts = {});

struct FixedPointResult {
  SectionState state;
  double residual = 0.0;  // ||P(x) - x|| in reduced coordinates
  int steps_used = 0;
};

/// Relaxation (repeated stepping) toward a fixed point of the Poincare map,
/// starting from the first post-impact state reached from x0.
FixedPointResult find_fixed_point(const RobotParams& params,
                                  const HybridState& x0,
                                  const GaitParams& gait, int max_steps = 200,
                                  double tol = 1e-7,
                                  const SimOptions& opts = {});

/// Newton polish on the reduced fixed-point equation using a finite
/// difference map Jacobian.
FixedPointResult polish_fixed_point(const RobotParams& params,
                                    const SectionState& x,
                                    const GaitParams& gait, int iters = 4,
                                    double fd_step = 1e-6,
                                    const SimOptions& opts = {});

/// Magnitudes of the eigenvalues of the numerical (central-difference)
/// Jacobian of the reduced Poincare map, sorted descending.
std::vector<double> orbital_stability(const RobotParams& params,
                                      const SectionState& fixed_point,
                                      const GaitParams& gait,
                                      double fd_step = 1e-6,
                                      const SimOptions& opts = {});

}  // namespace slipgait
