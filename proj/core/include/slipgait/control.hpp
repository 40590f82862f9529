#pragma once

#include <optional>
#include <string>

#include "slipgait/contact.hpp"
#include "slipgait/domain.hpp"
#include "slipgait/model.hpp"

namespace slipgait {

/// Virtual-constraint gait description: one degree-4 Bezier polynomial per
/// actuated joint over the phase variable, shared across domains, plus
/// controller gains and limits.
struct GaitParams {
  Mat45 alpha = Mat45::Zero();  // Bezier control values, one row per joint
  double epsilon = 10.0;        // output convergence rate, 1/s
  double kp = 40.0;             // PD position gain
  double kd = 2.0;              // PD velocity gain
  double p0 = 0.0;              // phase-variable start value, m
  double p1 = 0.1;              // phase-variable end value, m
  double u_max = 40.0;          // torque saturation, N m
  double qd_max = 4.0;          // actuated joint velocity bound, rad/s
  double mu_design = 0.6;       // friction the gait was synthesized for

  void validate() const;  // throws ConfigError
};

/// Initial condition bundled with a gait file so a simulation run is
/// self-contained.
struct GaitInitialState {
  Configuration c;
  DomainId domain;
};

struct GaitFile {
  GaitParams gait;
  std::optional<GaitInitialState> initial_state;

  static GaitFile load(const std::string& path);
  void save(const std::string& path) const;
};

/// Phase variable: hip x-position relative to the stance foot, normalized by
/// the endpoints, tau = (p - p0)/(p1 - p0).  Using the relative distance
/// keeps the phase unaffected by where the stance foot has slid to.
struct PhaseInfo {
  double p = 0.0;        // raw hip-minus-foot distance, m
  double tau_raw = 0.0;  // unclamped
  double tau = 0.0;      // clamped to [0, 1]
  double taud = 0.0;     // d tau_raw / dt
  RowVec7 dtau_dq = RowVec7::Zero();
  double dtau_bias = 0.0;  // (d/dt dtau_dq) . qd
};

PhaseInfo phase(const DynamicsTerms& t, const Configuration& c,
                const GaitParams& gp);
PhaseInfo phase(const RobotParams& params, const Configuration& c,
                const GaitParams& gp);

/// Degree-4 Bezier with analytic first and second derivatives in tau.
struct BezierEval {
  Vec4 y = Vec4::Zero();
  Vec4 yp = Vec4::Zero();
  Vec4 ypp = Vec4::Zero();
};

/// Plain polynomial evaluation, valid for any tau (used by the optimizer,
/// which needs smoothness at the endpoints).
BezierEval bezier_eval(double tau, const Mat45& alpha);

/// Runtime variant: outside [0, 1] the endpoint value is held and the
/// derivatives are zeroed, which keeps torque bounded at early or late
/// touchdowns.
BezierEval desired_outputs(double tau, const Mat45& alpha);

/// Virtual-constraint outputs y = y_d(tau(q)) - y_a(q) and their time
/// derivative through the chain rule.
struct Outputs {
  Vec4 y = Vec4::Zero();
  Vec4 yd = Vec4::Zero();
  PhaseInfo ph;
  BezierEval des;
};

Outputs outputs(const DynamicsTerms& t, const Configuration& c,
                const GaitParams& gp);
Outputs outputs(const RobotParams& params, const Configuration& c,
                const GaitParams& gp);

/// Input-output linearizing torque: picks u so the closed loop obeys
/// ydd = -2*eps*yd - eps^2*y under the given domain's contact model.
/// Throws SingularDecoupling when the 4x4 decoupling matrix degenerates.
Vec4 fl_torque(const DynamicsTerms& t, const Configuration& c,
               const GaitParams& gp, const DomainId& domain, double mu,
               const ContactSolverOptions& opts = {});

/// Joint-space PD on the tracking error, saturated at +-u_max:
/// u = kp (y_a - y_d) + kd (yd_a - yd_d).
Vec4 pd_torque(const DynamicsTerms& t, const Configuration& c,
               const GaitParams& gp);
Vec4 pd_torque(const RobotParams& params, const Configuration& c,
               const GaitParams& gp);

inline Vec4 saturate(const Vec4& u, double u_max) {
  return u.cwiseMax(-u_max).cwiseMin(u_max);
}

}  // namespace slipgait
