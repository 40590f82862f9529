#include "slipgait/collocation.hpp"

#include <cmath>
#include <random>

#include "slipgait/errors.hpp"
#include "slipgait/hybrid.hpp"

namespace slipgait {

HsDefects hermite_simpson_defects(const Eigen::VectorXd& x_a,
                                  const Eigen::VectorXd& x_m,
                                  const Eigen::VectorXd& x_b,
                                  const Eigen::VectorXd& f_a,
                                  const Eigen::VectorXd& f_m,
                                  const Eigen::VectorXd& f_b, double h) {
  HsDefects d;
  d.midpoint = x_m - 0.5 * (x_a + x_b) - (h / 8.0) * (f_a - f_b);
  d.simpson = x_b - x_a - (h / 6.0) * (f_a + 4.0 * f_m + f_b);
  return d;
}

void CycleSpec::validate() const {
  if (phases.empty() || edges.size() != phases.size()) {
    throw InvalidSequence("cycle needs one edge per phase");
  }
  const int n = static_cast<int>(phases.size());
  for (const auto& ph : phases) {
    if (ph.intervals < 1) throw InvalidSequence("phase needs >= 1 interval");
    if (ph.domain.is_slip() && ph.domain.slip_sign == 0) {
      throw InvalidSequence("slip phase needs a slip sign");
    }
  }
  for (int i = 0; i < n; ++i) {
    const DomainId& cur = phases[i].domain;
    const DomainId& next = phases[(i + 1) % n].domain;
    auto need = [&](bool cur_stick, bool next_stick, bool flip = false) {
      if (cur.is_stick() != cur_stick || next.is_stick() != next_stick) {
        throw InvalidSequence(std::string("edge ") + edge_name(edges[i]) +
                              " does not match adjacent phase domains");
      }
      if (flip && cur.is_slip() && next.is_slip() &&
          cur.slip_sign != -next.slip_sign) {
        throw InvalidSequence("slip reversal must flip the slip sign");
      }
    };
    switch (edges[i]) {
      case EdgeId::StickToSlip: need(true, false); break;
      case EdgeId::SlipToStick: need(false, true); break;
      case EdgeId::SlipReversal: need(false, false, true); break;
      case EdgeId::StickImpactStick: need(true, true); break;
      case EdgeId::StickImpactSlip: need(true, false); break;
      case EdgeId::SlipImpactStick: need(false, true); break;
      case EdgeId::SlipImpactSlip: need(false, false); break;
    }
  }
  if (!edge_is_impact(edges.back())) {
    throw InvalidSequence("the wrap edge must be an impact (step boundary)");
  }
}

CycleSpec CycleSpec::slip_stick_cycle(int intervals_per_phase) {
  CycleSpec c;
  c.phases = {{DomainId::slip(+1), intervals_per_phase},
              {DomainId::stick(), intervals_per_phase}};
  c.edges = {EdgeId::SlipToStick, EdgeId::StickImpactSlip};
  return c;
}

CycleSpec CycleSpec::stick_cycle(int intervals_per_phase) {
  CycleSpec c;
  c.phases = {{DomainId::stick(), intervals_per_phase}};
  c.edges = {EdgeId::StickImpactStick};
  return c;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Contact solves inside the optimizer must never throw: solvability is kept
// by explicit denominator-floor constraints instead.
ContactSolverOptions no_throw_contact() {
  ContactSolverOptions o;
  o.painleve_eps = -kInf;
  o.singular_eps = 0.0;
  return o;
}

Configuration config_at(const Eigen::VectorXd& x, int base) {
  Configuration c;
  for (int i = 0; i < kNumDof; ++i) {
    c.q[i] = x[base + i];
    c.qd[i] = x[base + kNumDof + i];
  }
  return c;
}

struct OutputKit {
  Vec4 y, yd, ydd;
};

// Virtual-constraint output and derivatives at a node, using the raw
// (unclamped) Bezier so everything stays smooth for the NLP.
OutputKit output_kit(const DynamicsTerms& t, const Configuration& c,
                     const Eigen::VectorXd& x, int idx_alpha, int idx_p0,
                     int idx_p1, const Vec7& qdd) {
  Mat45 alpha;
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 5; ++k) alpha(r, k) = x[idx_alpha + r * 5 + k];
  const double p0 = x[idx_p0];
  const double p1 = x[idx_p1];
  const double scale = p1 - p0;

  const double p = c.q[kBaseX] - t.x_st;
  const double tau = (p - p0) / scale;
  RowVec7 dp_dq = -t.Jx;
  dp_dq[kBaseX] += 1.0;
  const RowVec7 dtau_dq = dp_dq / scale;
  const double taud = dtau_dq * c.qd;
  const double dtau_bias = -t.dJx_qd / scale;

  const BezierEval bez = bezier_eval(tau, alpha);
  OutputKit o;
  o.y = bez.y - actuated_angles(c.q);
  o.yd = bez.yp * taud - actuated_angles(c.qd);
  o.ydd = bez.ypp * (taud * taud) +
          bez.yp * (dtau_dq * qdd + dtau_bias) - actuated_angles(qdd);
  return o;
}

struct StickImpulseKit {
  Vec2 impulse;
  Vec7 qd_post;
};

StickImpulseKit stick_impulse_raw(const DynamicsTerms& t,
                                  const Vec7& qd_minus) {
  const Eigen::LLT<Mat77> llt(t.D);
  const Mat27 J = t.stance_jacobian();
  const Eigen::Matrix<double, 7, 2> DinvJt = llt.solve(J.transpose());
  const Mat2 A = J * DinvJt;
  StickImpulseKit k;
  k.impulse = -A.inverse() * (J * qd_minus);
  k.qd_post = qd_minus + DinvJt * k.impulse;
  return k;
}

struct SlipImpulseKit {
  double impulse_z = 0.0;
  double denom = 0.0;
  Vec7 qd_post;
};

SlipImpulseKit slip_impulse_raw(const DynamicsTerms& t, const Vec7& qd_minus,
                                int sigma, double mu) {
  const Eigen::LLT<Mat77> llt(t.D);
  const RowVec7 Jt = t.Jz - sigma * mu * t.Jx;
  SlipImpulseKit k;
  k.denom = t.Jz * llt.solve(Jt.transpose());
  k.impulse_z = -(t.Jz * qd_minus) / k.denom;
  k.qd_post = qd_minus + llt.solve(Jt.transpose()) * k.impulse_z;
  return k;
}

}  // namespace

CollocationProblem::CollocationProblem(const RobotParams& params,
                                       const CycleSpec& cycle,
                                       const CollocationOptions& opts)
    : params_(params), cycle_(cycle), opts_(opts) {
  cycle_.validate();
  build_layout();
  build_bounds();
  build_blocks();
}

void CollocationProblem::build_layout() {
  int at = 22;  // alpha (20) + p0 + p1
  phase_base_.clear();
  for (const auto& ph : cycle_.phases) {
    phase_base_.push_back(at);
    at += 1 + (2 * ph.intervals + 1) * 32;
  }
  num_vars_ = at;
}

void CollocationProblem::build_bounds() {
  lb_ = Eigen::VectorXd::Constant(num_vars_, -kInf);
  ub_ = Eigen::VectorXd::Constant(num_vars_, kInf);
  for (int i = 0; i < 20; ++i) {
    lb_[idx_alpha() + i] = -10.0;
    ub_[idx_alpha() + i] = 10.0;
  }
  lb_[idx_p0()] = -2.0;
  ub_[idx_p0()] = 2.0;
  lb_[idx_p1()] = -2.0;
  ub_[idx_p1()] = 2.0;

  const double leg = params_.leg_length();
  for (int d = 0; d < num_phases(); ++d) {
    lb_[idx_duration(d)] = opts_.duration_min;
    ub_[idx_duration(d)] = opts_.duration_max;
    for (int i = 0; i < nodes_in_phase(d); ++i) {
      const int xs = idx_state(d, i);
      // q
      lb_[xs + kBaseX] = -3.0;
      ub_[xs + kBaseX] = 3.0;
      lb_[xs + kBaseZ] = opts_.height_min * leg;
      ub_[xs + kBaseZ] = opts_.height_max * leg;
      lb_[xs + kPitch] = -opts_.pitch_max;
      ub_[xs + kPitch] = opts_.pitch_max;
      for (int j : {kStanceKnee, kSwingKnee}) {
        lb_[xs + j] = opts_.knee_min;
        ub_[xs + j] = opts_.knee_max;
      }
      for (int j : {kStanceHip, kSwingHip}) {
        lb_[xs + j] = opts_.hip_min;
        ub_[xs + j] = opts_.hip_max;
      }
      // qd
      lb_[xs + 7 + kBaseX] = -3.0;
      ub_[xs + 7 + kBaseX] = 3.0;
      lb_[xs + 7 + kBaseZ] = -3.0;
      ub_[xs + 7 + kBaseZ] = 3.0;
      lb_[xs + 7 + kPitch] = -8.0;
      ub_[xs + 7 + kPitch] = 8.0;
      for (int j = kStanceKnee; j <= kSwingKnee; ++j) {
        lb_[xs + 7 + j] = -opts_.qd_max;
        ub_[xs + 7 + j] = opts_.qd_max;
      }
      // xdot: first 7 mirror qd bounds, accelerations stay loose
      const int xd = idx_xdot(d, i);
      for (int j = 0; j < 7; ++j) {
        lb_[xd + j] = lb_[xs + 7 + j];
        ub_[xd + j] = ub_[xs + 7 + j];
        lb_[xd + 7 + j] = -400.0;
        ub_[xd + 7 + j] = 400.0;
      }
      const int ui = idx_input(d, i);
      for (int j = 0; j < kNumActuated; ++j) {
        lb_[ui + j] = -opts_.u_max;
        ub_[ui + j] = opts_.u_max;
      }
    }
  }
}

void CollocationProblem::add_block(Block b) {
  b.eq_offset = num_eq_;
  b.ineq_offset = num_ineq_;
  num_eq_ += b.eq_dim;
  num_ineq_ += b.ineq_dim;
  blocks_.push_back(std::move(b));
}

void CollocationProblem::build_blocks() {
  const RobotParams params = params_;
  const CollocationOptions opts = opts_;
  const int ia = idx_alpha(), ip0 = idx_p0(), ip1 = idx_p1();
  const double mu = params.mu;

  // ---- per-node dynamics, output dynamics and domain membership ----
  for (int d = 0; d < num_phases(); ++d) {
    const DomainId dom = cycle_.phases[d].domain;
    const int mid_node = cycle_.phases[d].intervals;  // middle mesh point
    for (int i = 0; i < nodes_in_phase(d); ++i) {
      Block b;
      b.name = "node[" + std::to_string(d) + "," + std::to_string(i) + "]";
      b.eq_dim = 18;
      const bool clearance = (i == mid_node);
      b.ineq_dim = (dom.is_stick() ? 3 : 3) + 1 + (opts.monotone_phase ? 1 : 0);
      const int xs = idx_state(d, i), xd = idx_xdot(d, i), ui = idx_input(d, i);
      for (int j = 0; j < 14; ++j) b.footprint.push_back(xs + j);
      for (int j = 0; j < 14; ++j) b.footprint.push_back(xd + j);
      for (int j = 0; j < 4; ++j) b.footprint.push_back(ui + j);
      for (int j = 0; j < 20; ++j) b.footprint.push_back(ia + j);
      b.footprint.push_back(ip0);
      b.footprint.push_back(ip1);

      b.eval = [params, opts, dom, xs, xd, ui, ia, ip0, ip1, mu, clearance](
                   const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> eq,
                   Eigen::Ref<Eigen::VectorXd> in) {
        const Configuration c = config_at(x, xs);
        const DynamicsTerms t = dynamics_terms(params, c, kInf);
        Vec7 qd_dot, qdd;
        for (int j = 0; j < 7; ++j) {
          qd_dot[j] = x[xd + j];
          qdd[j] = x[xd + 7 + j];
        }
        Vec4 u;
        for (int j = 0; j < 4; ++j) u[j] = x[ui + j];

        const AffineAccel aff = affine_accel(t, dom, mu, no_throw_contact());
        eq.segment<7>(0) = qd_dot - c.qd;
        eq.segment<7>(7) = qdd - (aff.a0 + aff.A1 * u);

        const OutputKit ok = output_kit(t, c, x, ia, ip0, ip1, qdd);
        eq.segment<4>(14) =
            ok.ydd + 2.0 * opts.epsilon * ok.yd +
            opts.epsilon * opts.epsilon * ok.y;

        const double lx = aff.lx0 + aff.lx1.dot(u);
        const double lz = aff.lz0 + aff.lz1.dot(u);
        int k = 0;
        if (dom.is_stick()) {
          in[k++] = mu * lz - lx - opts.cone_margin;
          in[k++] = mu * lz + lx - opts.cone_margin;
          in[k++] = lz - opts.lambda_z_min;
        } else {
          in[k++] = lz - opts.lambda_z_min;
          in[k++] = dom.slip_sign * (t.Jx * c.qd) - opts.v_slip_min;
          in[k++] = aff.slip_denom - opts.slip_denom_min;
        }
        in[k++] = t.z_sw - (clearance ? opts.swing_clearance : 0.0);
        if (opts.monotone_phase) {
          in[k++] = c.qd[kBaseX] - t.Jx * c.qd;
        }
      };
      add_block(std::move(b));
    }
  }

  // ---- Hermite-Simpson defects (analytic Jacobian) ----
  for (int d = 0; d < num_phases(); ++d) {
    const int M = cycle_.phases[d].intervals;
    for (int k = 0; k < M; ++k) {
      Block b;
      b.name = "hs[" + std::to_string(d) + "," + std::to_string(k) + "]";
      b.eq_dim = 28;
      b.ineq_dim = 0;
      const int xa = idx_state(d, 2 * k), xm = idx_state(d, 2 * k + 1),
                xb = idx_state(d, 2 * k + 2);
      const int fa = idx_xdot(d, 2 * k), fm = idx_xdot(d, 2 * k + 1),
                fb = idx_xdot(d, 2 * k + 2);
      const int iT = idx_duration(d);
      for (int j = 0; j < 14; ++j) b.footprint.push_back(xa + j);
      for (int j = 0; j < 14; ++j) b.footprint.push_back(xm + j);
      for (int j = 0; j < 14; ++j) b.footprint.push_back(xb + j);
      for (int j = 0; j < 14; ++j) b.footprint.push_back(fa + j);
      for (int j = 0; j < 14; ++j) b.footprint.push_back(fm + j);
      for (int j = 0; j < 14; ++j) b.footprint.push_back(fb + j);
      b.footprint.push_back(iT);

      b.eval = [xa, xm, xb, fa, fm, fb, iT, M](
                   const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> eq,
                   Eigen::Ref<Eigen::VectorXd>) {
        const double h = x[iT] / M;
        for (int j = 0; j < 14; ++j) {
          const double va = x[xa + j], vm = x[xm + j], vb = x[xb + j];
          const double da = x[fa + j], dm = x[fm + j], db = x[fb + j];
          eq[j] = vm - 0.5 * (va + vb) - (h / 8.0) * (da - db);
          eq[14 + j] = vb - va - (h / 6.0) * (da + 4.0 * dm + db);
        }
      };
      b.jac = [xa, xm, xb, fa, fm, fb, iT, M](
                  const Eigen::VectorXd& x, Eigen::Ref<Eigen::MatrixXd> je,
                  Eigen::Ref<Eigen::MatrixXd>) {
        const double h = x[iT] / M;
        je.setZero();
        // Footprint column order: xa, xm, xb (0..41), fa, fm, fb (42..83), T.
        for (int j = 0; j < 14; ++j) {
          je(j, 0 + j) = -0.5;
          je(j, 14 + j) = 1.0;
          je(j, 28 + j) = -0.5;
          je(j, 42 + j) = -h / 8.0;
          je(j, 70 + j) = h / 8.0;
          je(j, 84) = -(x[fa + j] - x[fb + j]) / (8.0 * M);
          je(14 + j, 0 + j) = -1.0;
          je(14 + j, 28 + j) = 1.0;
          je(14 + j, 42 + j) = -h / 6.0;
          je(14 + j, 56 + j) = -4.0 * h / 6.0;
          je(14 + j, 70 + j) = -h / 6.0;
          je(14 + j, 84) =
              -(x[fa + j] + 4.0 * x[fm + j] + x[fb + j]) / (6.0 * M);
        }
      };
      add_block(std::move(b));
    }
  }

  // ---- junctions: smooth switches and impacts ----
  const int P = num_phases();
  for (int d = 0; d < P; ++d) {
    const EdgeId edge = cycle_.edges[d];
    const int dn = (d + 1) % P;
    const bool wrap = (d == P - 1);
    const int x_pre = idx_state(d, nodes_in_phase(d) - 1);
    const int u_pre = idx_input(d, nodes_in_phase(d) - 1);
    const int x_post = idx_state(dn, 0);
    const DomainId next_dom = cycle_.phases[dn].domain;

    Block b;
    b.name = std::string("edge[") + edge_name(edge) + "]";
    for (int j = 0; j < 14; ++j) b.footprint.push_back(x_pre + j);
    for (int j = 0; j < 14; ++j) b.footprint.push_back(x_post + j);

    if (!edge_is_impact(edge)) {
      // Identity reset, plus the guard condition at the boundary.
      if (edge == EdgeId::SlipToStick) {
        b.eq_dim = 15;
        b.ineq_dim = 0;
        b.eval = [params, x_pre, x_post](const Eigen::VectorXd& x,
                                         Eigen::Ref<Eigen::VectorXd> eq,
                                         Eigen::Ref<Eigen::VectorXd>) {
          for (int j = 0; j < 14; ++j) eq[j] = x[x_post + j] - x[x_pre + j];
          const Configuration c = config_at(x, x_pre);
          const DynamicsTerms t = dynamics_terms(params, c, kInf);
          eq[14] = t.Jx * c.qd;  // tangential stop
        };
      } else {
        // StickToSlip / SlipReversal: cone saturation with the sign
        // committed by the next domain's slip direction.
        const int sigma_next = next_dom.slip_sign;
        for (int j = 0; j < 4; ++j) b.footprint.push_back(u_pre + j);
        b.eq_dim = 15;
        b.ineq_dim = 0;
        const bool reversal = (edge == EdgeId::SlipReversal);
        const DomainId pre_dom = cycle_.phases[d].domain;
        b.eval = [params, opts, mu, x_pre, x_post, u_pre, sigma_next,
                  reversal, pre_dom](const Eigen::VectorXd& x,
                                     Eigen::Ref<Eigen::VectorXd> eq,
                                     Eigen::Ref<Eigen::VectorXd>) {
          for (int j = 0; j < 14; ++j) eq[j] = x[x_post + j] - x[x_pre + j];
          const Configuration c = config_at(x, x_pre);
          const DynamicsTerms t = dynamics_terms(params, c, kInf);
          Vec4 u;
          for (int j = 0; j < 4; ++j) u[j] = x[u_pre + j];
          const ContactForces f = stick_forces(t, u, no_throw_contact());
          if (reversal) {
            (void)pre_dom;
            eq[14] = t.Jx * c.qd;  // stop, cone violation is left to C4
          } else {
            // |lambda_x| = mu lambda_z with sgn(lambda_x) = -sigma_next
            eq[14] = mu * f.lambda_z + sigma_next * f.lambda_x;
          }
        };
      }
      add_block(std::move(b));
      continue;
    }

    // Impact edge: touchdown guard, relabeled position chain, impact law,
    // impulse-cone side conditions.
    const bool sticking = (edge == EdgeId::StickImpactStick ||
                           edge == EdgeId::SlipImpactStick);
    const int sigma_post = sticking ? 0 : next_dom.slip_sign;
    b.eq_dim = 1 + (wrap ? 6 : 7) + 7;
    b.ineq_dim = 1 + (sticking ? 3 : 3);
    b.eval = [params, opts, mu, x_pre, x_post, wrap, sticking, sigma_post](
                 const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> eq,
                 Eigen::Ref<Eigen::VectorXd> in) {
      const Configuration pre = config_at(x, x_pre);
      const Configuration post = config_at(x, x_post);
      const DynamicsTerms t_pre = dynamics_terms(params, pre, kInf);
      const Configuration rc = relabel(pre);
      const DynamicsTerms t_c = dynamics_terms(params, {rc.q, rc.qd}, kInf);

      int k = 0;
      eq[k++] = t_pre.z_sw;  // touchdown
      for (int j = wrap ? 1 : 0; j < 7; ++j) {
        eq[k++] = post.q[j] - rc.q[j];
      }
      const StickImpulseKit stick = stick_impulse_raw(t_c, rc.qd);
      if (sticking) {
        eq.segment<7>(k) = post.qd - stick.qd_post;
      } else {
        const SlipImpulseKit slip =
            slip_impulse_raw(t_c, rc.qd, sigma_post, mu);
        eq.segment<7>(k) = post.qd - slip.qd_post;
      }
      k += 7;

      int m = 0;
      in[m++] = -(t_pre.Jz_sw * pre.qd) - opts.touchdown_speed_min;
      if (sticking) {
        in[m++] = mu * stick.impulse[1] - stick.impulse[0] -
                  opts.impulse_margin;
        in[m++] = mu * stick.impulse[1] + stick.impulse[0] -
                  opts.impulse_margin;
        in[m++] = stick.impulse[1] - opts.impulse_z_min;
      } else {
        const SlipImpulseKit slip =
            slip_impulse_raw(t_c, rc.qd, sigma_post, mu);
        // Stick impulse violates the cone on the committed side.
        in[m++] = (-sigma_post) * stick.impulse[0] - mu * stick.impulse[1] -
                  opts.impulse_margin;
        in[m++] = slip.impulse_z - opts.impulse_z_min;
        in[m++] = slip.denom - opts.slip_denom_min;
      }
    };
    add_block(std::move(b));
  }

  // ---- anchors, step length, phase endpoints, zero output at the start ----
  {
    Block b;
    b.name = "anchor_px";
    b.eq_dim = 1;
    b.ineq_dim = 0;
    const int x0 = idx_state(0, 0);
    b.footprint = {x0 + kBaseX};
    b.eval = [x0](const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> eq,
                  Eigen::Ref<Eigen::VectorXd>) { eq[0] = x[x0 + kBaseX]; };
    b.jac = [](const Eigen::VectorXd&, Eigen::Ref<Eigen::MatrixXd> je,
               Eigen::Ref<Eigen::MatrixXd>) { je(0, 0) = 1.0; };
    add_block(std::move(b));
  }
  {
    Block b;
    b.name = "step_length";
    b.eq_dim = 1;
    b.ineq_dim = 0;
    const int x0 = idx_state(0, 0);
    const int xe = idx_state(P - 1, nodes_in_phase(P - 1) - 1);
    const double L = opts.step_length;
    b.footprint = {x0 + kBaseX, xe + kBaseX};
    b.eval = [x0, xe, L](const Eigen::VectorXd& x,
                         Eigen::Ref<Eigen::VectorXd> eq,
                         Eigen::Ref<Eigen::VectorXd>) {
      eq[0] = x[xe + kBaseX] - x[x0 + kBaseX] - L;
    };
    b.jac = [](const Eigen::VectorXd&, Eigen::Ref<Eigen::MatrixXd> je,
               Eigen::Ref<Eigen::MatrixXd>) {
      je(0, 0) = -1.0;
      je(0, 1) = 1.0;
    };
    add_block(std::move(b));
  }
  {
    // p0 and p1 equal the phase variable at the cycle endpoints; p1 > p0.
    Block b;
    b.name = "phase_endpoints";
    b.eq_dim = 2;
    b.ineq_dim = 1;
    const int x0 = idx_state(0, 0);
    const int xe = idx_state(P - 1, nodes_in_phase(P - 1) - 1);
    for (int j = 0; j < 14; ++j) b.footprint.push_back(x0 + j);
    for (int j = 0; j < 14; ++j) b.footprint.push_back(xe + j);
    b.footprint.push_back(ip0);
    b.footprint.push_back(ip1);
    b.eval = [params, x0, xe, ip0, ip1](const Eigen::VectorXd& x,
                                        Eigen::Ref<Eigen::VectorXd> eq,
                                        Eigen::Ref<Eigen::VectorXd> in) {
      const Configuration c0 = config_at(x, x0);
      const Configuration ce = config_at(x, xe);
      const double pa = c0.q[kBaseX] - foot_positions(params, c0.q).stance[0];
      const double pb = ce.q[kBaseX] - foot_positions(params, ce.q).stance[0];
      eq[0] = x[ip0] - pa;
      eq[1] = x[ip1] - pb;
      in[0] = x[ip1] - x[ip0] - 0.02;
    };
    add_block(std::move(b));
  }
  {
    // Start exactly on the virtual-constraint manifold: y = 0, yd = 0 at the
    // first node; the node-wise output dynamics keep it there.
    Block b;
    b.name = "zero_output_start";
    b.eq_dim = 8;
    b.ineq_dim = 0;
    const int x0 = idx_state(0, 0);
    for (int j = 0; j < 14; ++j) b.footprint.push_back(x0 + j);
    for (int j = 0; j < 20; ++j) b.footprint.push_back(ia + j);
    b.footprint.push_back(ip0);
    b.footprint.push_back(ip1);
    b.eval = [params, x0, ia, ip0, ip1](const Eigen::VectorXd& x,
                                        Eigen::Ref<Eigen::VectorXd> eq,
                                        Eigen::Ref<Eigen::VectorXd>) {
      const Configuration c = config_at(x, x0);
      const DynamicsTerms t = dynamics_terms(params, c, kInf);
      const OutputKit ok =
          output_kit(t, c, x, ia, ip0, ip1, Vec7::Zero());
      eq.segment<4>(0) = ok.y;
      eq.segment<4>(4) = ok.yd;
    };
    add_block(std::move(b));
  }
}

double CollocationProblem::objective(const Eigen::VectorXd& x) const {
  double f = 0.0;
  for (int d = 0; d < num_phases(); ++d) {
    const int M = cycle_.phases[d].intervals;
    const double h = x[idx_duration(d)] / M;
    for (int i = 0; i < nodes_in_phase(d); ++i) {
      double w = 1.0;
      if (opts_.simpson_weights) {
        const bool mid = (i % 2 == 1);
        const bool end = (i == 0 || i == nodes_in_phase(d) - 1);
        w = mid ? 4.0 * h / 6.0 : (end ? h / 6.0 : 2.0 * h / 6.0);
      }
      for (int j = 0; j < 4; ++j) {
        const double u = x[idx_input(d, i) + j];
        f += w * u * u;
      }
    }
  }
  return f;
}

Eigen::VectorXd CollocationProblem::objective_gradient(
    const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(num_vars_);
  for (int d = 0; d < num_phases(); ++d) {
    const int M = cycle_.phases[d].intervals;
    const double T = x[idx_duration(d)];
    const double h = T / M;
    for (int i = 0; i < nodes_in_phase(d); ++i) {
      double w = 1.0;
      if (opts_.simpson_weights) {
        const bool mid = (i % 2 == 1);
        const bool end = (i == 0 || i == nodes_in_phase(d) - 1);
        w = mid ? 4.0 * h / 6.0 : (end ? h / 6.0 : 2.0 * h / 6.0);
      }
      for (int j = 0; j < 4; ++j) {
        const double u = x[idx_input(d, i) + j];
        g[idx_input(d, i) + j] += 2.0 * w * u;
        if (opts_.simpson_weights) {
          g[idx_duration(d)] += (w / T) * u * u;
        }
      }
    }
  }
  return g;
}

void CollocationProblem::constraints(const Eigen::VectorXd& x,
                                     Eigen::VectorXd& eq,
                                     Eigen::VectorXd& ineq) const {
  eq.resize(num_eq_);
  ineq.resize(num_ineq_);
  for (const auto& b : blocks_) {
    b.eval(x, eq.segment(b.eq_offset, b.eq_dim),
           ineq.segment(b.ineq_offset, b.ineq_dim));
  }
}

void CollocationProblem::constraint_jacobians(const Eigen::VectorXd& x,
                                              Eigen::MatrixXd& jac_eq,
                                              Eigen::MatrixXd& jac_ineq) const {
  jac_eq = Eigen::MatrixXd::Zero(num_eq_, num_vars_);
  jac_ineq = Eigen::MatrixXd::Zero(num_ineq_, num_vars_);
  Eigen::VectorXd xw = x;
  for (const auto& b : blocks_) {
    const int nf = static_cast<int>(b.footprint.size());
    if (b.jac) {
      Eigen::MatrixXd je = Eigen::MatrixXd::Zero(b.eq_dim, nf);
      Eigen::MatrixXd ji = Eigen::MatrixXd::Zero(b.ineq_dim, nf);
      b.jac(x, je, ji);
      for (int c = 0; c < nf; ++c) {
        jac_eq.block(b.eq_offset, b.footprint[c], b.eq_dim, 1) = je.col(c);
        jac_ineq.block(b.ineq_offset, b.footprint[c], b.ineq_dim, 1) =
            ji.col(c);
      }
      continue;
    }
    // Central differences over the block's footprint only.
    Eigen::VectorXd ep(b.eq_dim), em(b.eq_dim), ip(b.ineq_dim), im(b.ineq_dim);
    for (int c = 0; c < nf; ++c) {
      const int col = b.footprint[c];
      const double h = 1e-5 * std::max(1.0, std::abs(x[col]));
      xw[col] = x[col] + h;
      b.eval(xw, ep, ip);
      xw[col] = x[col] - h;
      b.eval(xw, em, im);
      xw[col] = x[col];
      jac_eq.block(b.eq_offset, col, b.eq_dim, 1) = (ep - em) / (2.0 * h);
      jac_ineq.block(b.ineq_offset, col, b.ineq_dim, 1) =
          (ip - im) / (2.0 * h);
    }
  }
}

std::vector<CollocationProblem::BlockInfo> CollocationProblem::block_info()
    const {
  std::vector<BlockInfo> info;
  info.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    info.push_back({b.name, b.eq_dim, b.ineq_dim, static_cast<bool>(b.jac)});
  }
  return info;
}

// ---- initial guesses ------------------------------------------------------

namespace {

// Planar two-link leg IK for a hip-relative foot target; knee-backward
// branch, angles relative to a torso pitch of phi.
struct LegIk {
  double hip, knee;
};

LegIk leg_ik(const RobotParams& p, double dx, double dz, double phi) {
  const double lt = p.thigh.length, ls = p.shank.length;
  double r2 = dx * dx + dz * dz;
  const double rmax = 0.999 * (lt + ls);
  if (r2 > rmax * rmax) {
    const double s = rmax / std::sqrt(r2);
    dx *= s;
    dz *= s;
    r2 = rmax * rmax;
  }
  const double r = std::sqrt(r2);
  const double cos_knee =
      std::clamp((lt * lt + ls * ls - r2) / (2.0 * lt * ls), -1.0, 1.0);
  const double interior = std::acos(cos_knee);
  const double gamma = std::atan2(dx, -dz);
  const double cos_beta =
      std::clamp((lt * lt + r2 - ls * ls) / (2.0 * lt * r), -1.0, 1.0);
  const double beta = std::acos(cos_beta);
  LegIk ik;
  const double thigh_abs = gamma + beta;
  ik.knee = -(M_PI - interior);
  ik.hip = thigh_abs - phi;
  return ik;
}

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

}  // namespace

Eigen::VectorXd initial_guess(const CollocationProblem& problem,
                              GuessStrategy strategy, std::uint64_t seed,
                              const Eigen::VectorXd* base) {
  const RobotParams& p = problem.robot();
  const CollocationOptions& opts = problem.options();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.num_vars());

  if (strategy == GuessStrategy::WarmPerturb) {
    if (base == nullptr) throw Error("warm guess needs a base vector");
    x = *base;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1e-3);
    for (int i = 0; i < x.size(); ++i) x[i] += n(rng);
    return x;
  }

  const double L = opts.step_length;
  const double h0 = 0.92 * p.leg_length();
  const double phi0 = 0.0;
  const double total_T = 0.7;
  const int P = problem.num_phases();
  for (int d = 0; d < P; ++d) x[problem.idx_duration(d)] = total_T / P;

  // Cycle-wide grid of node times in [0, 1].
  std::vector<std::pair<int, int>> node_ids;
  std::vector<double> fraction;
  for (int d = 0; d < P; ++d) {
    for (int i = 0; i < problem.nodes_in_phase(d); ++i) {
      node_ids.push_back({d, i});
      const double in_phase =
          static_cast<double>(i) / (problem.nodes_in_phase(d) - 1);
      fraction.push_back((d + in_phase) / P);
    }
  }

  const double slip_guess = 0.05 * L;
  std::vector<Vec4> ya_samples;
  std::vector<double> tau_samples;

  for (size_t n = 0; n < node_ids.size(); ++n) {
    const auto [d, i] = node_ids[n];
    const double s = strategy == GuessStrategy::Standing ? 0.0 : fraction[n];
    const double hip_x = L * s;
    // Stance foot ahead of the starting hip, sliding forward briefly.
    const double slip_frac =
        P > 1 ? std::min(1.0, s * P) : std::min(1.0, 4.0 * s);
    const double foot_x = 0.5 * L - slip_guess + slip_guess * slip_frac;
    // Swing foot travels two step lengths with a clearance arc.
    const double sw_x = -0.5 * L + 2.0 * L * smoothstep(s);
    const double sw_z = std::max(2.5 * opts.swing_clearance, 0.04) *
                        std::sin(M_PI * std::min(1.0, s));

    const LegIk st = leg_ik(p, foot_x - hip_x, -h0, phi0);
    const LegIk sw = leg_ik(p, sw_x - hip_x, sw_z - h0, phi0);

    const int xs = problem.idx_state(d, i);
    x[xs + kBaseX] = hip_x;
    x[xs + kBaseZ] = h0;
    x[xs + kPitch] = phi0;
    x[xs + kStanceKnee] = std::clamp(st.knee, opts.knee_min, opts.knee_max);
    x[xs + kStanceHip] = std::clamp(st.hip, opts.hip_min, opts.hip_max);
    x[xs + kSwingHip] = std::clamp(sw.hip, opts.hip_min, opts.hip_max);
    x[xs + kSwingKnee] = std::clamp(sw.knee, opts.knee_min, opts.knee_max);

    tau_samples.push_back(s);
    ya_samples.push_back(actuated_angles(
        (Eigen::Map<Vec7>(x.data() + xs)).eval()));
  }

  // Velocities and state derivatives by finite differences along the grid.
  if (strategy == GuessStrategy::Kinematic) {
    for (size_t n = 0; n < node_ids.size(); ++n) {
      const auto [d, i] = node_ids[n];
      const size_t np = std::min(n + 1, node_ids.size() - 1);
      const size_t nm = n == 0 ? 0 : n - 1;
      const double dt = (fraction[np] - fraction[nm]) * total_T;
      const int xs = problem.idx_state(d, i);
      const int xsp = problem.idx_state(node_ids[np].first,
                                        node_ids[np].second);
      const int xsm = problem.idx_state(node_ids[nm].first,
                                        node_ids[nm].second);
      const int xd = problem.idx_xdot(d, i);
      if (dt > 0) {
        for (int j = 0; j < 7; ++j) {
          const double v = (x[xsp + j] - x[xsm + j]) / dt;
          x[xs + 7 + j] = std::clamp(
              v, problem.lower_bounds()[xs + 7 + j],
              problem.upper_bounds()[xs + 7 + j]);
          x[xd + j] = x[xs + 7 + j];
        }
      }
    }
  }

  // Fit alpha to the actual joint angles by least squares on the grid.
  Eigen::MatrixXd A(tau_samples.size(), 5);
  for (size_t n = 0; n < tau_samples.size(); ++n) {
    const double t = tau_samples[n], s = 1.0 - t;
    A(n, 0) = s * s * s * s;
    A(n, 1) = 4 * s * s * s * t;
    A(n, 2) = 6 * s * s * t * t;
    A(n, 3) = 4 * s * t * t * t;
    A(n, 4) = t * t * t * t;
  }
  for (int r = 0; r < 4; ++r) {
    Eigen::VectorXd rhs(tau_samples.size());
    for (size_t n = 0; n < tau_samples.size(); ++n) rhs[n] = ya_samples[n][r];
    const Eigen::VectorXd coef =
        A.colPivHouseholderQr().solve(rhs);
    for (int k = 0; k < 5; ++k) x[problem.idx_alpha() + r * 5 + k] = coef[k];
  }

  // Phase endpoints from the start/end poses.
  {
    const int x0 = problem.idx_state(0, 0);
    const int xe = problem.idx_state(P - 1, problem.nodes_in_phase(P - 1) - 1);
    Vec7 q0, qe;
    for (int j = 0; j < 7; ++j) {
      q0[j] = x[x0 + j];
      qe[j] = x[xe + j];
    }
    x[problem.idx_p0()] =
        q0[kBaseX] - foot_positions(p, q0).stance[0];
    x[problem.idx_p1()] =
        qe[kBaseX] - foot_positions(p, qe).stance[0];
    if (x[problem.idx_p1()] - x[problem.idx_p0()] < 0.05) {
      x[problem.idx_p1()] = x[problem.idx_p0()] + 0.05;
    }
  }
  return x;
}

// ---- extraction -----------------------------------------------------------

GaitSynthesis extract_solution(const CollocationProblem& problem,
                               const NlpResult& result) {
  const RobotParams& params = problem.robot();
  const CollocationOptions& opts = problem.options();
  const Eigen::VectorXd& x = result.x;

  GaitSynthesis out;
  out.nlp = result;
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 5; ++k)
      out.gait.alpha(r, k) = x[problem.idx_alpha() + r * 5 + k];
  out.gait.epsilon = opts.epsilon;
  out.gait.p0 = x[problem.idx_p0()];
  out.gait.p1 = x[problem.idx_p1()];
  out.gait.u_max = opts.u_max;
  out.gait.qd_max = opts.qd_max;
  out.gait.mu_design = params.mu;

  out.initial_state.c = config_at(x, problem.idx_state(0, 0));
  out.initial_state.domain = problem.cycle().phases[0].domain;

  double t = 0.0;
  for (int d = 0; d < problem.num_phases(); ++d) {
    const DomainId dom = problem.cycle().phases[d].domain;
    const int M = problem.cycle().phases[d].intervals;
    const double h = x[problem.idx_duration(d)] / M;
    for (int i = 0; i < problem.nodes_in_phase(d); ++i) {
      TrajectorySample s;
      s.t = t + 0.5 * h * i;
      const Configuration c = config_at(x, problem.idx_state(d, i));
      s.q = c.q;
      s.qd = c.qd;
      for (int j = 0; j < 4; ++j) s.u[j] = x[problem.idx_input(d, i) + j];
      try {
        const DynamicsTerms terms = dynamics_terms(params, c);
        const ContactAccel acc =
            continuous_accel(terms, s.u, dom, params.mu, no_throw_contact());
        s.lambda_x = acc.forces.lambda_x;
        s.lambda_z = acc.forces.lambda_z;
      } catch (const Error&) {
        // leave forces at zero for degenerate iterates
      }
      s.domain = dom;
      s.step = 0;
      out.reference.samples.push_back(s);
    }
    t += x[problem.idx_duration(d)];
  }
  return out;
}

GaitSynthesis solve_gait(const RobotParams& params, const CycleSpec& cycle,
                         const CollocationOptions& copts,
                         const NlpOptions& nopts, const Eigen::VectorXd& guess,
                         NlpSolver* solver) {
  CollocationProblem problem(params, cycle, copts);
  SqpSolver builtin;
  NlpSolver& s = solver ? *solver : builtin;
  const NlpResult result = s.solve(problem, guess, nopts);
  return extract_solution(problem, result);
}

}  // namespace slipgait
