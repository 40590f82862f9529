#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slipgait/contact.hpp"
#include "slipgait/domain.hpp"

namespace slipgait {

/// Swaps stance and non-stance joint coordinates (and velocities).  The hip
/// base point and torso pitch are untouched, so both feet keep their world
/// positions; applying it twice is the identity.
Configuration relabel(const Configuration& c);

struct ImpactResult {
  Vec7 qd_post = Vec7::Zero();
  double impulse_x = 0.0;
  double impulse_z = 0.0;
  int slip_sign = 0;  // 0 for the sticking law
};

/// Perfectly inelastic sticking impact at the (already relabeled) collision
/// configuration: impulse = -(J D^-1 J^T)^-1 J qd_minus, both post-impact
/// foot velocity components zero.
ImpactResult stick_impact(const RobotParams& params, const Vec7& q_c,
                          const Vec7& qd_minus,
                          const ContactSolverOptions& opts = {});

/// Slipping impact: normal velocity zeroed, tangential impulse pinned to the
/// friction-cone boundary.  Tries the continuation sign sgn(Jx qd_minus)
/// first, then the opposite; requires sgn(Jx qd_post) == sign and
/// impulse_z >= 0.  Throws InconsistentSlipSign if neither sign works.
ImpactResult slip_impact(const RobotParams& params, const Vec7& q_c,
                         const Vec7& qd_minus, double mu,
                         const ContactSolverOptions& opts = {});

struct ImpactOutcome {
  ImpactResult result;
  bool sticking = false;  // which law was selected
  DomainId post_domain;
};

/// Applies the impulse-cone dispatch at a touchdown: sticking law if its
/// impulse satisfies |Lx| <= mu*Lz, otherwise the slipping law.  q_c must
/// already be relabeled so the Jacobians refer to the colliding foot.
ImpactOutcome resolve_impact(const RobotParams& params, const Vec7& q_c,
                             const Vec7& qd_minus, double mu,
                             const ContactSolverOptions& opts = {});

struct GuardOptions {
  double v_eps = 1e-4;          // stance-velocity dead band (m/s)
  bool impact_priority = true;  // touchdown beats smooth guards in a window
  ContactSolverOptions contact;
};

/// Signed guard functions for event localization.  Each value is positive
/// strictly inside the domain and crosses zero at the transition surface.
struct GuardValues {
  double touchdown = 0.0;  // z_sw; falls through zero at touchdown
  double smooth = 0.0;     // stick: cone margin; slip: sigma * xdot_st
};

GuardValues guard_values(const RobotParams& params, const Configuration& c,
                         const Vec4& u, const DomainId& domain,
                         const GuardOptions& opts = {});

/// Classifies which edge (if any) fires at the given state.  Touchdown needs
/// z_sw <= 0 with zdot_sw < 0; the stick domain's smooth guard is friction
/// cone saturation; the slip domain's smooth guard is a tangential stop,
/// routed to SlipToStick or SlipReversal by the cone test on the
/// instantaneous stick solution.  Throws AmbiguousGuard when both guards are
/// active and priority resolution is disabled.
std::optional<EdgeId> evaluate_guards(const RobotParams& params,
                                      const Configuration& c, const Vec4& u,
                                      const DomainId& domain,
                                      const GuardOptions& opts = {});

/// Full transition at a localized event: builds the GuardEvent including the
/// reset (identity or relabel + impact law) and the post domain.  For smooth
/// slip starts/reversals the new sign is -sgn(lambda_x of the stick
/// solution), the direction in which friction is deficient.
GuardEvent apply_edge(const RobotParams& params, double time,
                      const Configuration& c, const Vec4& u, EdgeId edge,
                      const DomainId& from_domain,
                      const GuardOptions& opts = {});

// ---- event log ----------------------------------------------------------
// One line per event:
//   t=<s> edge=<name> Lx=<Ns> Lz=<Ns> pre_vx=<m/s> pre_vz=<m/s> \
//   post_vx=<m/s> post_vz=<m/s>
// where the velocities are those of the colliding/stance foot.

std::string format_event_line(const RobotParams& params, const GuardEvent& e);
void write_event_log(const std::string& path, const RobotParams& params,
                     const std::vector<GuardEvent>& events);

struct EventLogEntry {
  double time;
  EdgeId edge;
  double impulse_x, impulse_z;
  Vec2 pre_foot_velocity, post_foot_velocity;
};
std::vector<EventLogEntry> read_event_log(const std::string& path);

}  // namespace slipgait
