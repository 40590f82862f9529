#pragma once

#include <string>

#include "slipgait/types.hpp"

namespace slipgait {

enum class ContactMode { Stick, Slip };

/// Label of a continuous domain.  Slip carries the sign of the stance-foot
/// tangential velocity.
struct DomainId {
  ContactMode mode = ContactMode::Stick;
  int slip_sign = 0;  // -1 or +1 in Slip mode, 0 in Stick mode

  static DomainId stick() { return {ContactMode::Stick, 0}; }
  static DomainId slip(int sign) { return {ContactMode::Slip, sign}; }

  bool is_stick() const { return mode == ContactMode::Stick; }
  bool is_slip() const { return mode == ContactMode::Slip; }

  bool operator==(const DomainId& o) const {
    return mode == o.mode && slip_sign == o.slip_sign;
  }
};

std::string domain_name(const DomainId& d);

/// The seven edges of the transition graph.  "Impact" edges carry the
/// inelastic touchdown of the swing foot; the others are smooth switches.
enum class EdgeId {
  StickToSlip,      // friction cone saturates, stance foot starts sliding
  SlipToStick,      // sliding stops and the cone admits sticking
  SlipReversal,     // sliding stops but the cone is violated: sign flip
  StickImpactStick, // touchdown from stick, impulse inside the cone
  StickImpactSlip,  // touchdown from stick, impulse outside the cone
  SlipImpactStick,  // touchdown from slip, impulse inside the cone
  SlipImpactSlip,   // touchdown from slip, impulse outside the cone
};

bool edge_is_impact(EdgeId e);
const char* edge_name(EdgeId e);
EdgeId edge_from_name(const std::string& name);

/// A localized transition.  For impact edges q_post = relabel(q_pre) and
/// qd_post comes from the impact law; for smooth edges the reset is the
/// identity and the impulse is zero.
struct GuardEvent {
  EdgeId edge = EdgeId::StickToSlip;
  double time = 0.0;
  Vec7 q_pre = Vec7::Zero();
  Vec7 qd_pre = Vec7::Zero();
  Vec7 q_post = Vec7::Zero();
  Vec7 qd_post = Vec7::Zero();
  double impulse_x = 0.0;  // N s, zero for non-impact edges
  double impulse_z = 0.0;
  DomainId post_domain;

  bool is_impact() const { return edge_is_impact(edge); }
};

}  // namespace slipgait
