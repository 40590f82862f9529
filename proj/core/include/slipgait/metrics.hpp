#pragma once

#include <string>
#include <utility>
#include <vector>

#include "slipgait/sim.hpp"

namespace slipgait {

/// Energy-economy and gait-quality summary of one walking run.
struct GaitReport {
  double mcot_plus = 0.0;            // positive-only mechanical cost of transport
  double mean_positive_power = 0.0;  // W
  double avg_speed = 0.0;            // m/s, hip displacement over duration
  double duration = 0.0;             // s
  int num_samples = 0;
  int steps = 0;
  std::vector<double> per_step_slip;      // m
  double mean_step_slip = 0.0;            // m
  std::vector<double> impact_ke_loss;     // J, one per impact event
  double mean_impact_ke_loss = 0.0;       // J
  double mean_impact_loss_fraction = 0.0; // relative to pre-impact KE

  void write(const std::string& path) const;  // key = value lines
  static GaitReport read(const std::string& path);
};

/// Sum over joints of max(u_k * qd_k, 0).
double positive_power(const Vec4& u, const Vec4& qd_act);

/// Builds the report from a sampled trajectory: mean positive power over the
/// uniform samples, speed from net hip x-displacement, slip statistics from
/// stance-foot motion during slip samples, impact losses from the event log.
/// Throws ZeroSpeed if the hip does not advance.
GaitReport mcot_plus(const Trajectory& traj, const RobotParams& params);

/// Kinetic energy just before and just after an impact event.
/// Throws NotAnImpact for smooth-switch events.
std::pair<double, double> impact_energy_loss(const GuardEvent& event,
                                             const RobotParams& params);

}  // namespace slipgait
