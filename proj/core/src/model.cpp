#include "slipgait/model.hpp"

#include <cmath>

#include "slipgait/errors.hpp"

namespace slipgait {
namespace {

// A point on the linkage: hip base plus a sum of r * (sin th, -cos th) terms,
// th = sel . q.  Covers every COM and both feet; all angles are plain sums of
// coordinates, so angular Jacobians are constant selector rows.
struct ChainTerm {
  double r;
  RowVec7 sel;
};

struct PointKin {
  Vec2 pos = Vec2::Zero();
  Mat27 J = Mat27::Zero();
  Vec2 Jdot_qd = Vec2::Zero();
};

PointKin chain_point(const Vec7& q, const Vec7& qd,
                     std::initializer_list<ChainTerm> terms) {
  PointKin p;
  p.pos = Vec2(q[kBaseX], q[kBaseZ]);
  p.J(0, kBaseX) = 1.0;
  p.J(1, kBaseZ) = 1.0;
  for (const auto& t : terms) {
    const double th = t.sel * q;
    const double thd = t.sel * qd;
    const double s = std::sin(th);
    const double c = std::cos(th);
    p.pos += t.r * Vec2(s, -c);
    p.J.row(0) += t.r * c * t.sel;
    p.J.row(1) += t.r * s * t.sel;
    p.Jdot_qd += t.r * thd * thd * Vec2(-s, c);
  }
  return p;
}

RowVec7 sel(std::initializer_list<int> idx) {
  RowVec7 s = RowVec7::Zero();
  for (int i : idx) s[i] = 1.0;
  return s;
}

struct LinkKin {
  double mass;
  double inertia;
  RowVec7 omega_sel;  // angular velocity = omega_sel . qd
  PointKin com;
};

// The five links: torso, stance thigh/shank, swing thigh/shank.
std::array<LinkKin, 5> link_kinematics(const RobotParams& p, const Vec7& q,
                                       const Vec7& qd) {
  const RowVec7 s_t = sel({kPitch});
  const RowVec7 s_st = sel({kPitch, kStanceHip});
  const RowVec7 s_ss = sel({kPitch, kStanceHip, kStanceKnee});
  const RowVec7 s_wt = sel({kPitch, kSwingHip});
  const RowVec7 s_ws = sel({kPitch, kSwingHip, kSwingKnee});

  std::array<LinkKin, 5> links;
  links[0] = {p.torso.mass, p.torso.inertia, s_t,
              chain_point(q, qd, {{-p.torso.com_offset, s_t}})};
  links[1] = {p.thigh.mass, p.thigh.inertia, s_st,
              chain_point(q, qd, {{p.thigh.com_offset, s_st}})};
  links[2] = {p.shank.mass, p.shank.inertia, s_ss,
              chain_point(q, qd, {{p.thigh.length, s_st},
                                  {p.shank.com_offset, s_ss}})};
  links[3] = {p.thigh.mass, p.thigh.inertia, s_wt,
              chain_point(q, qd, {{p.thigh.com_offset, s_wt}})};
  links[4] = {p.shank.mass, p.shank.inertia, s_ws,
              chain_point(q, qd, {{p.thigh.length, s_wt},
                                  {p.shank.com_offset, s_ws}})};
  return links;
}

PointKin foot_point(const RobotParams& p, const Vec7& q, const Vec7& qd,
                    bool stance) {
  const int hip = stance ? kStanceHip : kSwingHip;
  const int knee = stance ? kStanceKnee : kSwingKnee;
  const RowVec7 s_thigh = sel({kPitch, hip});
  const RowVec7 s_shank = sel({kPitch, hip, knee});
  return chain_point(q, qd,
                     {{p.thigh.length, s_thigh}, {p.shank.length, s_shank}});
}

}  // namespace

DynamicsTerms dynamics_terms(const RobotParams& params, const Configuration& c,
                             double cond_limit) {
  DynamicsTerms t;
  const auto links = link_kinematics(params, c.q, c.qd);

  for (const auto& l : links) {
    t.D.noalias() += l.mass * l.com.J.transpose() * l.com.J;
    t.D.noalias() += l.inertia * l.omega_sel.transpose() * l.omega_sel;
    // Velocity-product bias; the angular part vanishes (constant omega_sel).
    t.H.noalias() += l.mass * l.com.J.transpose() * l.com.Jdot_qd;
    // Gravity: +dV/dq on the left-hand side of the manipulator equation.
    t.H.noalias() +=
        l.mass * params.gravity * l.com.J.row(1).transpose();
  }

  for (int i = 0; i < kNumActuated; ++i) t.B(kStanceKnee + i, i) = 1.0;

  const PointKin st = foot_point(params, c.q, c.qd, true);
  t.x_st = st.pos[0];
  t.z_st = st.pos[1];
  t.Jx = st.J.row(0);
  t.Jz = st.J.row(1);
  t.dJx_qd = st.Jdot_qd[0];
  t.dJz_qd = st.Jdot_qd[1];

  const PointKin sw = foot_point(params, c.q, c.qd, false);
  t.x_sw = sw.pos[0];
  t.z_sw = sw.pos[1];
  t.Jx_sw = sw.J.row(0);
  t.Jz_sw = sw.J.row(1);
  t.dJx_sw_qd = sw.Jdot_qd[0];
  t.dJz_sw_qd = sw.Jdot_qd[1];

  Eigen::SelfAdjointEigenSolver<Mat77> es(t.D, Eigen::EigenvaluesOnly);
  const double ev_min = es.eigenvalues().minCoeff();
  const double ev_max = es.eigenvalues().maxCoeff();
  t.cond_estimate = (ev_min > 0.0) ? ev_max / ev_min
                                   : std::numeric_limits<double>::infinity();
  if (!(t.cond_estimate < cond_limit)) {
    throw SingularConfiguration("inertia matrix condition estimate " +
                                std::to_string(t.cond_estimate) +
                                " exceeds limit");
  }
  return t;
}

FootPositions foot_positions(const RobotParams& params, const Vec7& q) {
  const Vec7 qd = Vec7::Zero();
  return {foot_point(params, q, qd, true).pos,
          foot_point(params, q, qd, false).pos};
}

double kinetic_energy(const RobotParams& params, const Configuration& c) {
  double ke = 0.0;
  for (const auto& l : link_kinematics(params, c.q, c.qd)) {
    const Vec2 v = l.com.J * c.qd;
    const double w = l.omega_sel * c.qd;
    ke += 0.5 * l.mass * v.squaredNorm() + 0.5 * l.inertia * w * w;
  }
  return ke;
}

double potential_energy(const RobotParams& params, const Vec7& q) {
  const Vec7 qd = Vec7::Zero();
  double v = 0.0;
  for (const auto& l : link_kinematics(params, q, qd)) {
    v += l.mass * params.gravity * l.com.pos[1];
  }
  return v;
}

double total_energy(const RobotParams& params, const Configuration& c) {
  return kinetic_energy(params, c) + potential_energy(params, c.q);
}

}  // namespace slipgait
