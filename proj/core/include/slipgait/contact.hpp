#pragma once

#include "slipgait/domain.hpp"
#include "slipgait/model.hpp"

namespace slipgait {

/// Ground reaction force at the stance point foot.
struct ContactForces {
  double lambda_x = 0.0;  // tangential, N
  double lambda_z = 0.0;  // normal, N
  ContactMode mode = ContactMode::Stick;
  int slip_sign = 0;  // valid in Slip mode

  /// Friction-cone margin mu*lambda_z - |lambda_x| (>= 0 inside the cone).
  double cone_margin(double mu) const {
    return mu * lambda_z - std::abs(lambda_x);
  }
};

struct ContactSolverOptions {
  double painleve_eps = 1e-8;   // slip denominator positivity threshold
  double singular_eps = 1e-12;  // stick 2x2 determinant threshold (relative)
};

/// Constraint forces keeping the stance foot fully stationary.  Solves
/// lambda = (J D^-1 J^T)^-1 (J D^-1 (H - B u) - Jdot qd).
/// Throws SingularContactMatrix if J D^-1 J^T is singular beyond tolerance.
ContactForces stick_forces(const DynamicsTerms& t, const Vec4& u,
                           const ContactSolverOptions& opts = {});

/// Constraint forces during tangential sliding with sign slip_sign:
/// lambda_x = -slip_sign * mu * lambda_z, normal velocity held at zero.
/// Throws PainleveSingularity when the denominator
/// J_z D^-1 (J_z - slip_sign*mu*J_x)^T is not positive.
ContactForces slip_forces(const DynamicsTerms& t, const Vec4& u, int slip_sign,
                          double mu, const ContactSolverOptions& opts = {});

struct ContactAccel {
  Vec7 qdd = Vec7::Zero();
  ContactForces forces;
};

/// Generalized acceleration and contact force inside the given domain.
ContactAccel continuous_accel(const DynamicsTerms& t, const Vec4& u,
                              const DomainId& domain, double mu,
                              const ContactSolverOptions& opts = {});

/// qdd(u) = a0 + A1 u for the given domain; the constrained dynamics are
/// affine in the input.
struct AffineAccel {
  Vec7 a0 = Vec7::Zero();
  Mat74 A1 = Mat74::Zero();
  // lambda_z(u) = lz0 + lz1 . u (and lambda_x analogously); handy for
  // force-level constraints in the gait optimizer.
  double lx0 = 0.0, lz0 = 0.0;
  Vec4 lx1 = Vec4::Zero(), lz1 = Vec4::Zero();
  // Slip-mode force denominator Jz D^-1 (Jz - sigma*mu*Jx)^T; zero in stick.
  double slip_denom = 0.0;
};

AffineAccel affine_accel(const DynamicsTerms& t, const DomainId& domain,
                         double mu, const ContactSolverOptions& opts = {});

}  // namespace slipgait
