#pragma once

#include "slipgait/robot_params.hpp"
#include "slipgait/types.hpp"

namespace slipgait {

/// Everything the contact solvers and controllers need at one state:
/// manipulator equation terms D qdd + H = B u + Jx^T lambda_x + Jz^T lambda_z
/// plus point-foot kinematics for both feet.
struct DynamicsTerms {
  Mat77 D = Mat77::Zero();  // inertia matrix, symmetric positive definite
  Vec7 H = Vec7::Zero();    // Coriolis/centrifugal + gravity bias
  Mat74 B = Mat74::Zero();  // actuation selector (zero rows for base coords)

  // Stance foot
  double x_st = 0.0, z_st = 0.0;
  RowVec7 Jx = RowVec7::Zero();  // d x_st / dq
  RowVec7 Jz = RowVec7::Zero();  // d z_st / dq
  double dJx_qd = 0.0;           // (d/dt Jx) qd
  double dJz_qd = 0.0;

  // Swing (non-stance) foot
  double x_sw = 0.0, z_sw = 0.0;
  RowVec7 Jx_sw = RowVec7::Zero();
  RowVec7 Jz_sw = RowVec7::Zero();
  double dJx_sw_qd = 0.0;
  double dJz_sw_qd = 0.0;

  double cond_estimate = 0.0;  // cheap condition estimate of D

  Mat27 stance_jacobian() const {
    Mat27 j;
    j.row(0) = Jx;
    j.row(1) = Jz;
    return j;
  }
  Vec2 stance_bias() const { return Vec2(dJx_qd, dJz_qd); }
  Vec2 stance_velocity(const Vec7& qd) const {
    return Vec2(Jx * qd, Jz * qd);
  }
  Vec2 swing_velocity(const Vec7& qd) const {
    return Vec2(Jx_sw * qd, Jz_sw * qd);
  }
};

struct FootPositions {
  Vec2 stance;  // (x, z) of the stance point foot
  Vec2 swing;
};

/// Assembles all manipulator-equation terms at (q, qd) by closed-form
/// Lagrangian mechanics over the five links.  Throws SingularConfiguration
/// if the condition estimate of D exceeds cond_limit.
DynamicsTerms dynamics_terms(const RobotParams& params, const Configuration& c,
                             double cond_limit = 1e14);

FootPositions foot_positions(const RobotParams& params, const Vec7& q);

/// 0.5 qd^T D qd.
double kinetic_energy(const RobotParams& params, const Configuration& c);

/// Gravitational potential, zero level at z = 0.
double potential_energy(const RobotParams& params, const Vec7& q);

double total_energy(const RobotParams& params, const Configuration& c);

}  // namespace slipgait
