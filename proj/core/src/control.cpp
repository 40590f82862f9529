#include "slipgait/control.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "slipgait/errors.hpp"

namespace slipgait {

using nlohmann::json;

void GaitParams::validate() const {
  if (p0 == p1) throw ConfigError("gait: p0 and p1 must differ");
  if (!(epsilon > 0.0)) throw ConfigError("gait: epsilon must be positive");
  if (kp < 0.0 || kd < 0.0) throw ConfigError("gait: gains must be >= 0");
  if (!(u_max > 0.0)) throw ConfigError("gait: u_max must be positive");
  if (!(qd_max > 0.0)) throw ConfigError("gait: qd_max must be positive");
}

GaitFile GaitFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open gait file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("gait file parse error in " + path + ": " + e.what());
  }
  GaitFile f;
  if (!j.contains("alpha")) throw ConfigError("gait file missing 'alpha'");
  const auto& rows = j.at("alpha");
  if (rows.size() != 4) throw ConfigError("gait alpha must have 4 rows");
  for (int r = 0; r < 4; ++r) {
    if (rows[r].size() != 5) throw ConfigError("gait alpha rows need 5 cols");
    for (int c = 0; c < 5; ++c) f.gait.alpha(r, c) = rows[r][c].get<double>();
  }
  f.gait.epsilon = j.value("epsilon", 10.0);
  f.gait.kp = j.value("kp", 40.0);
  f.gait.kd = j.value("kd", 2.0);
  f.gait.p0 = j.at("p0").get<double>();
  f.gait.p1 = j.at("p1").get<double>();
  f.gait.u_max = j.value("u_max", 40.0);
  f.gait.qd_max = j.value("qd_max", 4.0);
  f.gait.mu_design = j.value("mu_design", 0.6);
  f.gait.validate();

  if (j.contains("initial_state")) {
    const auto& s = j.at("initial_state");
    GaitInitialState init;
    for (int i = 0; i < kNumDof; ++i) {
      init.c.q[i] = s.at("q")[i].get<double>();
      init.c.qd[i] = s.at("qd")[i].get<double>();
    }
    const std::string d = s.value("domain", "stick");
    if (d == "stick") init.domain = DomainId::stick();
    else if (d == "slip+") init.domain = DomainId::slip(1);
    else if (d == "slip-") init.domain = DomainId::slip(-1);
    else throw ConfigError("gait initial_state.domain must be stick/slip+/slip-");
    f.initial_state = init;
  }
  return f;
}

void GaitFile::save(const std::string& path) const {
  json j;
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 5; ++c) row.push_back(gait.alpha(r, c));
    rows.push_back(row);
  }
  j["alpha"] = rows;
  j["epsilon"] = gait.epsilon;
  j["kp"] = gait.kp;
  j["kd"] = gait.kd;
  j["p0"] = gait.p0;
  j["p1"] = gait.p1;
  j["u_max"] = gait.u_max;
  j["qd_max"] = gait.qd_max;
  j["mu_design"] = gait.mu_design;
  if (initial_state) {
    json s;
    s["q"] = std::vector<double>(initial_state->c.q.data(),
                                 initial_state->c.q.data() + kNumDof);
    s["qd"] = std::vector<double>(initial_state->c.qd.data(),
                                  initial_state->c.qd.data() + kNumDof);
    s["domain"] = domain_name(initial_state->domain);
    j["initial_state"] = s;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write gait file: " + path);
  out << j.dump(2) << "\n";
}

PhaseInfo phase(const DynamicsTerms& t, const Configuration& c,
                const GaitParams& gp) {
  PhaseInfo ph;
  const double scale = gp.p1 - gp.p0;
  ph.p = c.q[kBaseX] - t.x_st;
  ph.tau_raw = (ph.p - gp.p0) / scale;
  ph.tau = std::clamp(ph.tau_raw, 0.0, 1.0);
  RowVec7 dp_dq = -t.Jx;
  dp_dq[kBaseX] += 1.0;
  ph.dtau_dq = dp_dq / scale;
  ph.taud = ph.dtau_dq * c.qd;
  ph.dtau_bias = -t.dJx_qd / scale;  // hip row of the Jacobian is constant
  return ph;
}

PhaseInfo phase(const RobotParams& params, const Configuration& c,
                const GaitParams& gp) {
  return phase(dynamics_terms(params, c), c, gp);
}

BezierEval bezier_eval(double tau, const Mat45& alpha) {
  BezierEval e;
  const double s = 1.0 - tau;
  Eigen::Matrix<double, 5, 1> b4;
  b4 << s * s * s * s, 4 * s * s * s * tau, 6 * s * s * tau * tau,
      4 * s * tau * tau * tau, tau * tau * tau * tau;
  Eigen::Matrix<double, 4, 1> b3;
  b3 << s * s * s, 3 * s * s * tau, 3 * s * tau * tau, tau * tau * tau;
  Eigen::Matrix<double, 3, 1> b2;
  b2 << s * s, 2 * s * tau, tau * tau;

  e.y = alpha * b4;
  Mat44 d1;
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 4; ++k) d1(r, k) = alpha(r, k + 1) - alpha(r, k);
  e.yp = 4.0 * d1 * b3;
  Eigen::Matrix<double, 4, 3> d2;
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 3; ++k)
      d2(r, k) = alpha(r, k + 2) - 2.0 * alpha(r, k + 1) + alpha(r, k);
  e.ypp = 12.0 * d2 * b2;
  return e;
}

BezierEval desired_outputs(double tau, const Mat45& alpha) {
  if (tau <= 0.0 || tau >= 1.0) {
    BezierEval e;
    e.y = tau <= 0.0 ? alpha.col(0) : alpha.col(4);
    return e;  // hold endpoints, zero derivatives
  }
  return bezier_eval(tau, alpha);
}

Outputs outputs(const DynamicsTerms& t, const Configuration& c,
                const GaitParams& gp) {
  Outputs o;
  o.ph = phase(t, c, gp);
  o.des = desired_outputs(o.ph.tau_raw, gp.alpha);
  o.y = o.des.y - actuated_angles(c.q);
  o.yd = o.des.yp * o.ph.taud - actuated_angles(c.qd);
  return o;
}

Outputs outputs(const RobotParams& params, const Configuration& c,
                const GaitParams& gp) {
  return outputs(dynamics_terms(params, c), c, gp);
}

Vec4 fl_torque(const DynamicsTerms& t, const Configuration& c,
               const GaitParams& gp, const DomainId& domain, double mu,
               const ContactSolverOptions& opts) {
  const Outputs o = outputs(t, c, gp);
  const Mat47 S = actuated_selector();
  const Mat47 Yq = o.des.yp * o.ph.dtau_dq - S;
  const Vec4 bias =
      o.des.ypp * o.ph.taud * o.ph.taud + o.des.yp * o.ph.dtau_bias;

  const AffineAccel aff = affine_accel(t, domain, mu, opts);
  const Vec4 target = -2.0 * gp.epsilon * o.yd - gp.epsilon * gp.epsilon * o.y;
  const Mat44 dec = Yq * aff.A1;
  const Vec4 rhs = target - Yq * aff.a0 - bias;

  Eigen::FullPivLU<Mat44> lu(dec);
  if (!lu.isInvertible()) {
    throw SingularDecoupling("output decoupling matrix is singular");
  }
  return lu.solve(rhs);
}

Vec4 pd_torque(const DynamicsTerms& t, const Configuration& c,
               const GaitParams& gp) {
  const Outputs o = outputs(t, c, gp);
  // Errors of the actual joints against the desired: y_a - y_d = -y.
  const Vec4 u = gp.kp * (-o.y) + gp.kd * (-o.yd);
  return saturate(u, gp.u_max);
}

Vec4 pd_torque(const RobotParams& params, const Configuration& c,
               const GaitParams& gp) {
  return pd_torque(dynamics_terms(params, c), c, gp);
}

}  // namespace slipgait
