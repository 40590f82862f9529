#include "slipgait/metrics.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "slipgait/errors.hpp"
#include "slipgait/model.hpp"

namespace slipgait {

double positive_power(const Vec4& u, const Vec4& qd_act) {
  double p = 0.0;
  for (int k = 0; k < kNumActuated; ++k) {
    p += std::max(u[k] * qd_act[k], 0.0);
  }
  return p;
}

GaitReport mcot_plus(const Trajectory& traj, const RobotParams& params) {
  if (traj.samples.size() < 2) {
    throw Error("mcot_plus: trajectory needs at least two samples");
  }
  GaitReport rep;
  rep.num_samples = static_cast<int>(traj.samples.size());

  double power_sum = 0.0;
  for (const auto& s : traj.samples) {
    power_sum += positive_power(s.u, actuated_angles(s.qd));
  }
  rep.mean_positive_power = power_sum / rep.num_samples;

  const auto& first = traj.samples.front();
  const auto& last = traj.samples.back();
  rep.duration = last.t - first.t;
  const double hip_travel = last.q[kBaseX] - first.q[kBaseX];
  if (rep.duration <= 0.0 || hip_travel <= 0.0) {
    throw ZeroSpeed("mcot_plus: no forward hip displacement");
  }
  rep.avg_speed = hip_travel / rep.duration;
  rep.mcot_plus = rep.mean_positive_power /
                  (params.total_mass() * params.gravity * rep.avg_speed);

  // Per-step slip: stance-foot x-motion between consecutive samples inside
  // slip domains, keyed by step index.  Recomputable from the CSV alone.
  std::map<int, double> slip_by_step;
  for (size_t i = 0; i + 1 < traj.samples.size(); ++i) {
    const auto& a = traj.samples[i];
    const auto& b = traj.samples[i + 1];
    if (a.domain.is_slip() && b.domain.is_slip() && a.step == b.step) {
      const double xa = foot_positions(params, a.q).stance[0];
      const double xb = foot_positions(params, b.q).stance[0];
      slip_by_step[a.step] += std::abs(xb - xa);
    } else {
      slip_by_step[a.step] += 0.0;
    }
  }
  for (const auto& [step, slip] : slip_by_step) {
    rep.per_step_slip.push_back(slip);
  }
  if (!rep.per_step_slip.empty()) {
    double s = 0.0;
    for (double v : rep.per_step_slip) s += v;
    rep.mean_step_slip = s / rep.per_step_slip.size();
  }

  // Impact losses from the kinetic-energy drop across step boundaries.
  // Uses samples only, so an exported CSV reproduces the report exactly;
  // exact per-event losses are available via impact_energy_loss().
  double loss_sum = 0.0, frac_sum = 0.0;
  for (size_t i = 0; i + 1 < traj.samples.size(); ++i) {
    const auto& a = traj.samples[i];
    const auto& b = traj.samples[i + 1];
    if (b.step != a.step) {
      const double ke_pre = kinetic_energy(params, {a.q, a.qd});
      const double ke_post = kinetic_energy(params, {b.q, b.qd});
      rep.impact_ke_loss.push_back(ke_pre - ke_post);
      loss_sum += ke_pre - ke_post;
      if (ke_pre > 0.0) frac_sum += (ke_pre - ke_post) / ke_pre;
      ++rep.steps;
    }
  }
  if (rep.steps > 0) {
    rep.mean_impact_ke_loss = loss_sum / rep.steps;
    rep.mean_impact_loss_fraction = frac_sum / rep.steps;
  }
  return rep;
}

std::pair<double, double> impact_energy_loss(const GuardEvent& event,
                                             const RobotParams& params) {
  if (!event.is_impact()) {
    throw NotAnImpact("impact_energy_loss on a smooth-switch event");
  }
  const double ke_pre = kinetic_energy(params, {event.q_pre, event.qd_pre});
  const double ke_post = kinetic_energy(params, {event.q_post, event.qd_post});
  return {ke_pre, ke_post};
}

void GaitReport::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report: " + path);
  out.precision(17);
  out << "mcot_plus = " << mcot_plus << "\n";
  out << "mean_positive_power = " << mean_positive_power << "\n";
  out << "avg_speed = " << avg_speed << "\n";
  out << "duration = " << duration << "\n";
  out << "num_samples = " << num_samples << "\n";
  out << "steps = " << steps << "\n";
  out << "mean_step_slip = " << mean_step_slip << "\n";
  out << "mean_impact_ke_loss = " << mean_impact_ke_loss << "\n";
  out << "mean_impact_loss_fraction = " << mean_impact_loss_fraction << "\n";
  out << "per_step_slip =";
  for (double v : per_step_slip) out << " " << v;
  out << "\n";
  out << "impact_ke_loss =";
  for (double v : impact_ke_loss) out << " " << v;
  out << "\n";
}

GaitReport GaitReport::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report: " + path);
  GaitReport rep;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(' ') + 1);
    std::istringstream vals(line.substr(eq + 1));
    if (key == "mcot_plus") vals >> rep.mcot_plus;
    else if (key == "mean_positive_power") vals >> rep.mean_positive_power;
    else if (key == "avg_speed") vals >> rep.avg_speed;
    else if (key == "duration") vals >> rep.duration;
    else if (key == "num_samples") vals >> rep.num_samples;
    else if (key == "steps") vals >> rep.steps;
    else if (key == "mean_step_slip") vals >> rep.mean_step_slip;
    else if (key == "mean_impact_ke_loss") vals >> rep.mean_impact_ke_loss;
    else if (key == "mean_impact_loss_fraction")
      vals >> rep.mean_impact_loss_fraction;
    else if (key == "per_step_slip") {
      double v;
      while (vals >> v) rep.per_step_slip.push_back(v);
    } else if (key == "impact_ke_loss") {
      double v;
      while (vals >> v) rep.impact_ke_loss.push_back(v);
    }
  }
  return rep;
}

}  // namespace slipgait
