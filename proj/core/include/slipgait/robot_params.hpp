#pragma once

#include <string>

#include "slipgait/types.hpp"

namespace slipgait {

/// One rigid link: mass, length, center-of-mass offset measured from the
/// proximal joint along the link axis, and rotational inertia about the COM.
struct LinkParams {
  double mass = 0.0;       // kg
  double length = 0.0;     // m
  double com_offset = 0.0; // m, from proximal joint along the link
  double inertia = 0.0;    // kg m^2 about the COM
};

/// Physical description of the planar 5-link point-foot biped.  The two legs
/// are identical, so one thigh and one shank parameter set covers both.
struct RobotParams {
  LinkParams torso;
  LinkParams thigh;
  LinkParams shank;
  double mu = 0.6;       // ground friction coefficient (single value)
  double gravity = 9.81; // m/s^2

  double total_mass() const {
    return torso.mass + 2.0 * thigh.mass + 2.0 * shank.mass;
  }
  double leg_length() const { return thigh.length + shank.length; }

  /// Throws ConfigError on non-physical values (non-positive masses or
  /// lengths, negative inertias, mu < 0, g <= 0).
  void validate() const;

  /// Synthetic desk-scale parameter set totalling 21.6 kg with
  /// anthropomorphic mass/length ratios.  Not measured from hardware.
  static RobotParams default_biped();

  static RobotParams load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace slipgait
