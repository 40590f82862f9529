#include "slipgait/hybrid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "slipgait/errors.hpp"

namespace slipgait {

std::string domain_name(const DomainId& d) {
  if (d.is_stick()) return "stick";
  return d.slip_sign > 0 ? "slip+" : "slip-";
}

bool edge_is_impact(EdgeId e) {
  switch (e) {
    case EdgeId::StickImpactStick:
    case EdgeId::StickImpactSlip:
    case EdgeId::SlipImpactStick:
    case EdgeId::SlipImpactSlip:
      return true;
    default:
      return false;
  }
}

const char* edge_name(EdgeId e) {
  switch (e) {
    case EdgeId::StickToSlip: return "slip_start";
    case EdgeId::SlipToStick: return "slip_stop";
    case EdgeId::SlipReversal: return "slip_reversal";
    case EdgeId::StickImpactStick: return "impact_stick_from_stick";
    case EdgeId::StickImpactSlip: return "impact_slip_from_stick";
    case EdgeId::SlipImpactStick: return "impact_stick_from_slip";
    case EdgeId::SlipImpactSlip: return "impact_slip_from_slip";
  }
  return "?";
}

EdgeId edge_from_name(const std::string& name) {
  for (EdgeId e : {EdgeId::StickToSlip, EdgeId::SlipToStick,
                   EdgeId::SlipReversal, EdgeId::StickImpactStick,
                   EdgeId::StickImpactSlip, EdgeId::SlipImpactStick,
                   EdgeId::SlipImpactSlip}) {
    if (name == edge_name(e)) return e;
  }
  throw ConfigError("unknown edge name: " + name);
}

Configuration relabel(const Configuration& c) {
  Configuration out = c;
  std::swap(out.q[kStanceKnee], out.q[kSwingKnee]);
  std::swap(out.q[kStanceHip], out.q[kSwingHip]);
  std::swap(out.qd[kStanceKnee], out.qd[kSwingKnee]);
  std::swap(out.qd[kStanceHip], out.qd[kSwingHip]);
  return out;
}

ImpactResult stick_impact(const RobotParams& params, const Vec7& q_c,
                          const Vec7& qd_minus,
                          const ContactSolverOptions& opts) {
  const DynamicsTerms t = dynamics_terms(params, {q_c, qd_minus});
  const Eigen::LLT<Mat77> llt(t.D);
  const Mat27 J = t.stance_jacobian();
  const Eigen::Matrix<double, 7, 2> DinvJt = llt.solve(J.transpose());
  const Mat2 A = J * DinvJt;
  if (std::abs(A.determinant()) <= opts.singular_eps * A.norm() * A.norm()) {
    throw SingularContactMatrix("J D^-1 J^T singular at impact");
  }
  const Vec2 impulse = -A.inverse() * (J * qd_minus);
  ImpactResult r;
  r.impulse_x = impulse[0];
  r.impulse_z = impulse[1];
  r.qd_post = qd_minus + DinvJt * impulse;
  r.slip_sign = 0;
  return r;
}

ImpactResult slip_impact(const RobotParams& params, const Vec7& q_c,
                         const Vec7& qd_minus, double mu,
                         const ContactSolverOptions& opts) {
  const DynamicsTerms t = dynamics_terms(params, {q_c, qd_minus});
  const Eigen::LLT<Mat77> llt(t.D);
  const double pre_tangential = t.Jx * qd_minus;

  const int first = pre_tangential >= 0.0 ? 1 : -1;
  int painleve_count = 0;
  std::string detail;
  for (int sigma : {first, -first}) {
    const RowVec7 Jt = t.Jz - sigma * mu * t.Jx;
    const double denom = t.Jz * llt.solve(Jt.transpose());
    if (denom <= opts.painleve_eps) {
      ++painleve_count;
      detail += " sigma=" + std::to_string(sigma) + ": denom<=0;";
      continue;
    }
    const double impulse_z = -(t.Jz * qd_minus) / denom;
    const Vec7 qd_post = qd_minus + llt.solve(Jt.transpose()) * impulse_z;
    const double post_tangential = t.Jx * qd_post;
    if (impulse_z >= 0.0 && sigma * post_tangential > 0.0) {
      ImpactResult r;
      r.impulse_z = impulse_z;
      r.impulse_x = -sigma * mu * impulse_z;
      r.qd_post = qd_post;
      r.slip_sign = sigma;
      return r;
    }
    detail += " sigma=" + std::to_string(sigma) +
              ": Lz=" + std::to_string(impulse_z) +
              " post_vx=" + std::to_string(post_tangential) + ";";
  }
  if (painleve_count == 2) {
    throw PainleveSingularity("slipping impact denominator non-positive for "
                              "both signs");
  }
  throw InconsistentSlipSign("no self-consistent slipping impact:" + detail);
}

ImpactOutcome resolve_impact(const RobotParams& params, const Vec7& q_c,
                             const Vec7& qd_minus, double mu,
                             const ContactSolverOptions& opts) {
  ImpactOutcome out;
  const ImpactResult stick = stick_impact(params, q_c, qd_minus, opts);
  if (std::abs(stick.impulse_x) <= mu * stick.impulse_z) {
    out.result = stick;
    out.sticking = true;
    out.post_domain = DomainId::stick();
  } else {
    out.result = slip_impact(params, q_c, qd_minus, mu, opts);
    out.sticking = false;
    out.post_domain = DomainId::slip(out.result.slip_sign);
  }
  return out;
}

GuardValues guard_values(const RobotParams& params, const Configuration& c,
                         const Vec4& u, const DomainId& domain,
                         const GuardOptions& opts) {
  const DynamicsTerms t = dynamics_terms(params, c);
  GuardValues g;
  g.touchdown = t.z_sw;
  if (domain.is_stick()) {
    const ContactForces f = stick_forces(t, u, opts.contact);
    g.smooth = f.cone_margin(params.mu);
  } else {
    g.smooth = domain.slip_sign * (t.Jx * c.qd);
  }
  return g;
}

std::optional<EdgeId> evaluate_guards(const RobotParams& params,
                                      const Configuration& c, const Vec4& u,
                                      const DomainId& domain,
                                      const GuardOptions& opts) {
  const DynamicsTerms t = dynamics_terms(params, c);
  const double zdot_sw = t.Jz_sw * c.qd;
  const bool touchdown = t.z_sw <= 0.0 && zdot_sw < 0.0;

  bool smooth = false;
  if (domain.is_stick()) {
    const ContactForces f = stick_forces(t, u, opts.contact);
    smooth = f.cone_margin(params.mu) <= 0.0;
  } else {
    const double vx = t.Jx * c.qd;
    smooth = domain.slip_sign * vx <= 0.0 || std::abs(vx) < opts.v_eps;
  }

  if (touchdown && smooth && !opts.impact_priority) {
    throw AmbiguousGuard(
        std::string("touchdown and ") +
        (domain.is_stick() ? "cone-saturation" : "slip-stop") +
        " guards active in the same window");
  }

  if (touchdown) {
    const Configuration rc = relabel(c);
    const ImpactResult stick = stick_impact(params, rc.q, rc.qd, opts.contact);
    const bool cone_ok =
        std::abs(stick.impulse_x) <= params.mu * stick.impulse_z;
    if (domain.is_stick()) {
      return cone_ok ? EdgeId::StickImpactStick : EdgeId::StickImpactSlip;
    }
    return cone_ok ? EdgeId::SlipImpactStick : EdgeId::SlipImpactSlip;
  }

  if (smooth) {
    if (domain.is_stick()) return EdgeId::StickToSlip;
    // Tangential stop: route by the cone test on the instantaneous stick
    // solution.
    const ContactForces f = stick_forces(t, u, opts.contact);
    return f.cone_margin(params.mu) >= 0.0 ? EdgeId::SlipToStick
                                           : EdgeId::SlipReversal;
  }
  return std::nullopt;
}

GuardEvent apply_edge(const RobotParams& params, double time,
                      const Configuration& c, const Vec4& u, EdgeId edge,
                      const DomainId& from_domain, const GuardOptions& opts) {
  GuardEvent e;
  e.edge = edge;
  e.time = time;
  e.q_pre = c.q;
  e.qd_pre = c.qd;

  if (edge_is_impact(edge)) {
    const Configuration rc = relabel(c);
    const ImpactOutcome out =
        resolve_impact(params, rc.q, rc.qd, params.mu, opts.contact);
    e.q_post = rc.q;
    e.qd_post = out.result.qd_post;
    e.impulse_x = out.result.impulse_x;
    e.impulse_z = out.result.impulse_z;
    e.post_domain = out.post_domain;
    // Keep the edge id consistent with the cone outcome.
    if (from_domain.is_stick()) {
      e.edge = out.sticking ? EdgeId::StickImpactStick
                            : EdgeId::StickImpactSlip;
    } else {
      e.edge = out.sticking ? EdgeId::SlipImpactStick
                            : EdgeId::SlipImpactSlip;
    }
    return e;
  }

  // Smooth switches: identity reset.
  e.q_post = c.q;
  e.qd_post = c.qd;
  const DynamicsTerms t = dynamics_terms(params, c);
  const ContactForces f = stick_forces(t, u, opts.contact);
  switch (edge) {
    case EdgeId::StickToSlip:
    case EdgeId::SlipReversal: {
      // Friction is deficient in the direction of the required tangential
      // force; sliding starts opposite to it.
      const int sigma = f.lambda_x >= 0.0 ? -1 : 1;
      e.post_domain = DomainId::slip(sigma);
      break;
    }
    case EdgeId::SlipToStick:
      e.post_domain = DomainId::stick();
      break;
    default:
      throw Error("apply_edge: unreachable edge");
  }
  return e;
}

std::string format_event_line(const RobotParams& params, const GuardEvent& e) {
  // Velocities of the colliding foot for impacts (swing pre, stance post);
  // of the stance foot for smooth switches.
  const DynamicsTerms pre = dynamics_terms(params, {e.q_pre, e.qd_pre});
  const DynamicsTerms post = dynamics_terms(params, {e.q_post, e.qd_post});
  const Vec2 pre_v = e.is_impact() ? pre.swing_velocity(e.qd_pre)
                                   : pre.stance_velocity(e.qd_pre);
  const Vec2 post_v = post.stance_velocity(e.qd_post);
  std::ostringstream os;
  os.precision(17);
  os << "t=" << e.time << " edge=" << edge_name(e.edge)
     << " Lx=" << e.impulse_x << " Lz=" << e.impulse_z
     << " pre_vx=" << pre_v[0] << " pre_vz=" << pre_v[1]
     << " post_vx=" << post_v[0] << " post_vz=" << post_v[1];
  return os.str();
}

void write_event_log(const std::string& path, const RobotParams& params,
                     const std::vector<GuardEvent>& events) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write event log: " + path);
  for (const auto& e : events) out << format_event_line(params, e) << "\n";
}

std::vector<EventLogEntry> read_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open event log: " + path);
  std::vector<EventLogEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    EventLogEntry e{};
    std::string tok;
    while (is >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw ConfigError("bad event log token");
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "edge") {
        e.edge = edge_from_name(val);
        continue;
      }
      const double x = std::stod(val);
      if (key == "t") e.time = x;
      else if (key == "Lx") e.impulse_x = x;
      else if (key == "Lz") e.impulse_z = x;
      else if (key == "pre_vx") e.pre_foot_velocity[0] = x;
      else if (key == "pre_vz") e.pre_foot_velocity[1] = x;
      else if (key == "post_vx") e.post_foot_velocity[0] = x;
      else if (key == "post_vz") e.post_foot_velocity[1] = x;
      else throw ConfigError("unknown event log key: " + key);
    }
    entries.push_back(e);
  }
  return entries;
}

}  // namespace slipgait
