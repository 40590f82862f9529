#include "slipgait/sim.hpp"

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <fstream>
#include <sstream>

#include "slipgait/errors.hpp"

namespace slipgait {
namespace {

namespace odeint = boost::numeric::odeint;
using State = std::array<double, kStateDim>;

State pack(const Configuration& c) {
  State x;
  for (int i = 0; i < kNumDof; ++i) {
    x[i] = c.q[i];
    x[kNumDof + i] = c.qd[i];
  }
  return x;
}

Configuration unpack(const State& x) {
  Configuration c;
  for (int i = 0; i < kNumDof; ++i) {
    c.q[i] = x[i];
    c.qd[i] = x[kNumDof + i];
  }
  return c;
}

bool finite(const State& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

struct GuardScan {
  double touchdown = 0.0;
  double smooth = 0.0;
  double lambda_z = 0.0;
  bool fell = false;
};

}  // namespace

Controller make_fl_controller(const RobotParams& params,
                              const GaitParams& gait) {
  return [params, gait](double, const Configuration& c,
                        const DynamicsTerms& terms, const DomainId& domain) {
    return saturate(fl_torque(terms, c, gait, domain, params.mu), gait.u_max);
  };
}

Controller make_pd_controller(const GaitParams& gait) {
  return [gait](double, const Configuration& c, const DynamicsTerms& terms,
                const DomainId&) { return pd_torque(terms, c, gait); };
}

Controller make_zero_controller() {
  return [](double, const Configuration&, const DynamicsTerms&,
            const DomainId&) { return Vec4::Zero().eval(); };
}

SegmentResult integrate_domain(const RobotParams& params,
                               const HybridState& state,
                               const Controller& controller, double t0,
                               double t_end, const SimOptions& opts,
                               Trajectory& traj, double& next_sample_time) {
  const DomainId domain = state.domain;
  const double mu = params.mu;
  const double fall_height = opts.fall_height_frac * params.leg_length();

  auto rhs = [&](const State& x, State& dxdt, double t) {
    if (!finite(x)) throw IntegrationFailure("state diverged (nan/inf)");
    const Configuration c = unpack(x);
    const DynamicsTerms terms = dynamics_terms(params, c);
    const Vec4 u = controller(t, c, terms, domain);
    const ContactAccel acc =
        continuous_accel(terms, u, domain, mu, opts.guards.contact);
    for (int i = 0; i < kNumDof; ++i) {
      dxdt[i] = c.qd[i];
      dxdt[kNumDof + i] = acc.qdd[i];
    }
  };

  auto scan_at = [&](double t, const State& x) {
    const Configuration c = unpack(x);
    const DynamicsTerms terms = dynamics_terms(params, c);
    const Vec4 u = controller(t, c, terms, domain);
    GuardScan g;
    g.touchdown = terms.z_sw;
    if (domain.is_stick()) {
      const ContactForces f = stick_forces(terms, u, opts.guards.contact);
      g.smooth = f.cone_margin(mu);
      g.lambda_z = f.lambda_z;
    } else {
      g.smooth = domain.slip_sign * (terms.Jx * c.qd);
      g.lambda_z =
          slip_forces(terms, u, domain.slip_sign, mu, opts.guards.contact)
              .lambda_z;
    }
    g.fell = c.q[kBaseZ] < fall_height ||
             std::abs(c.q[kPitch]) > opts.fall_pitch_limit;
    return g;
  };

  auto sample_at = [&](double t, const State& x) {
    const Configuration c = unpack(x);
    const DynamicsTerms terms = dynamics_terms(params, c);
    const Vec4 u = controller(t, c, terms, domain);
    const ContactAccel acc =
        continuous_accel(terms, u, domain, mu, opts.guards.contact);
    TrajectorySample s;
    s.t = t;
    s.q = c.q;
    s.qd = c.qd;
    s.u = u;
    s.lambda_x = acc.forces.lambda_x;
    s.lambda_z = acc.forces.lambda_z;
    s.domain = domain;
    s.step = state.step_index;
    return s;
  };

  auto dense = odeint::make_dense_output(opts.abs_tol, opts.rel_tol,
                                         opts.max_dt,
                                         odeint::runge_kutta_dopri5<State>());
  State x0 = pack(state.c);
  dense.initialize(x0, t0, opts.init_dt);

  // Emit the segment-start sample directly (dense output is not yet valid).
  while (next_sample_time <= t0 + 1e-15) {
    traj.samples.push_back(sample_at(t0, x0));
    next_sample_time += opts.sample_period;
  }

  GuardScan g_prev = scan_at(t0, x0);
  if (g_prev.fell) {
    SegmentResult r;
    r.end = state.c;
    r.end_time = t0;
    // flagged via zero-length segment; walk() re-checks the end state
    return r;
  }
  bool armed_touchdown = g_prev.touchdown > opts.guard_arm_threshold;
  bool armed_smooth = g_prev.smooth > opts.guard_arm_threshold;

  State xbuf;
  auto guard_of = [&](const GuardScan& g, int which) {
    return which == 0 ? g.touchdown : g.smooth;
  };

  // Bisect a sign change of guard `which` inside (t_lo, t_hi].
  auto localize = [&](int which, double t_lo, double t_hi) {
    for (int it = 0; it < 200; ++it) {
      const double t_mid = 0.5 * (t_lo + t_hi);
      dense.calc_state(t_mid, xbuf);
      const double v = guard_of(scan_at(t_mid, xbuf), which);
      if (v > 0.0) {
        t_lo = t_mid;
      } else {
        t_hi = t_mid;
      }
      dense.calc_state(t_hi, xbuf);
      const double vh = guard_of(scan_at(t_hi, xbuf), which);
      if (t_hi - t_lo < opts.event_time_tol &&
          std::abs(vh) < opts.event_value_tol) {
        break;
      }
    }
    return t_hi;
  };

  while (dense.current_time() < t_end) {
    try {
      dense.do_step(rhs);
    } catch (const std::overflow_error& e) {
      throw IntegrationFailure(std::string("step-size control failed: ") +
                               e.what());
    }
    if (dense.current_time() - dense.previous_time() < opts.min_dt) {
      throw IntegrationFailure("step size collapsed");
    }

    const double t_lo = dense.previous_time();
    const double t_hi = std::min(dense.current_time(), t_end);

    // Scan guards on subsamples of the accepted step.
    double cross_t[2] = {-1.0, -1.0};
    double prev_t = t_lo;
    GuardScan prev_g = g_prev;
    const int n_scan = std::max(2, opts.guard_subsamples);
    bool fell = false;
    double fell_t = t_hi;
    for (int k = 1; k <= n_scan && !fell; ++k) {
      const double t = t_lo + (t_hi - t_lo) * k / n_scan;
      dense.calc_state(t, xbuf);
      const GuardScan g = scan_at(t, xbuf);
      for (int which = 0; which < 2; ++which) {
        bool& armed = which == 0 ? armed_touchdown : armed_smooth;
        const double v = guard_of(g, which);
        if (!armed && guard_of(prev_g, which) > opts.guard_arm_threshold) {
          armed = true;
        }
        if (!armed && v > opts.guard_arm_threshold) armed = true;
        if (armed && cross_t[which] < 0.0 && v <= 0.0 &&
            guard_of(prev_g, which) > 0.0) {
          cross_t[which] = localize(which, prev_t, t);
        }
      }
      if (g.fell) {
        fell = true;
        fell_t = t;
      }
      prev_t = t;
      prev_g = g;
    }
    g_prev = prev_g;

    int which = -1;
    if (cross_t[0] >= 0.0 && cross_t[1] >= 0.0) {
      const double gap = std::abs(cross_t[0] - cross_t[1]);
      if (gap <= 1e-8) {
        if (!opts.guards.impact_priority) {
          throw AmbiguousGuard("touchdown and smooth guards crossed within "
                               "one localization window");
        }
        which = 0;  // touchdown supersedes the smooth switch
      } else {
        which = cross_t[0] < cross_t[1] ? 0 : 1;
      }
    } else if (cross_t[0] >= 0.0) {
      which = 0;
    } else if (cross_t[1] >= 0.0) {
      which = 1;
    }

    if (which >= 0) {
      const double t_ev = cross_t[which];
      while (next_sample_time <= t_ev) {
        dense.calc_state(next_sample_time, xbuf);
        traj.samples.push_back(sample_at(next_sample_time, xbuf));
        next_sample_time += opts.sample_period;
      }
      dense.calc_state(t_ev, xbuf);
      const Configuration c_ev = unpack(xbuf);
      const DynamicsTerms terms = dynamics_terms(params, c_ev);
      const Vec4 u = controller(t_ev, c_ev, terms, domain);

      EdgeId edge;
      if (which == 0) {
        // Touchdown; the exact stick/slip suffix is settled by apply_edge.
        edge = domain.is_stick() ? EdgeId::StickImpactStick
                                 : EdgeId::SlipImpactStick;
      } else if (domain.is_stick()) {
        const ContactForces f = stick_forces(terms, u, opts.guards.contact);
        if (f.lambda_z <= 0.0) {
          throw DomainViolation("cone guard crossed with non-positive normal "
                                "force (lift-off is not modeled)");
        }
        edge = EdgeId::StickToSlip;
      } else {
        const ContactForces f = stick_forces(terms, u, opts.guards.contact);
        edge = f.cone_margin(mu) >= 0.0 ? EdgeId::SlipToStick
                                        : EdgeId::SlipReversal;
      }

      SegmentResult r;
      r.event = apply_edge(params, t_ev, c_ev, u, edge, domain, opts.guards);
      r.end = c_ev;
      r.end_time = t_ev;
      return r;
    }

    if (fell) {
      while (next_sample_time <= fell_t) {
        dense.calc_state(next_sample_time, xbuf);
        traj.samples.push_back(sample_at(next_sample_time, xbuf));
        next_sample_time += opts.sample_period;
      }
      dense.calc_state(fell_t, xbuf);
      SegmentResult r;
      r.end = unpack(xbuf);
      r.end_time = fell_t;
      return r;
    }

    // Contact-force sanity between events.
    if (g_prev.lambda_z < -opts.domain_check_tol * params.total_mass() *
                              params.gravity) {
      throw DomainViolation("normal force went negative without a guard "
                            "firing");
    }

    while (next_sample_time <= t_hi &&
           next_sample_time <= dense.current_time()) {
      dense.calc_state(next_sample_time, xbuf);
      traj.samples.push_back(sample_at(next_sample_time, xbuf));
      next_sample_time += opts.sample_period;
    }
  }

  dense.calc_state(t_end, xbuf);
  SegmentResult r;
  r.end = unpack(xbuf);
  r.end_time = t_end;
  return r;
}

WalkResult walk(const RobotParams& params, const HybridState& x0,
                const Controller& controller, int n_steps,
                const SimOptions& opts) {
  WalkResult res;
  res.outcome = WalkResult::Outcome::Completed;
  HybridState s = x0;
  double t = 0.0;
  double next_sample = 0.0;
  double step_slip = 0.0;
  int events_since_step = 0;
  const double fall_height = opts.fall_height_frac * params.leg_length();

  try {
    while (res.steps_completed < n_steps) {
      const double foot_x_before = foot_positions(params, s.c.q).stance[0];
      const SegmentResult seg =
          integrate_domain(params, s, controller, t, t + opts.max_segment_time,
                           opts, res.traj, next_sample);

      const double foot_x_after =
          foot_positions(params, seg.end.q).stance[0];
      if (s.domain.is_slip()) {
        const double d = std::abs(foot_x_after - foot_x_before);
        s.cumulative_slip += d;
        step_slip += d;
      }

      if (!seg.event) {
        s.c = seg.end;
        const bool fell = seg.end.q[kBaseZ] < fall_height ||
                          std::abs(seg.end.q[kPitch]) > opts.fall_pitch_limit;
        res.outcome =
            fell ? WalkResult::Outcome::Fell : WalkResult::Outcome::Stalled;
        res.message = fell ? "torso height/pitch limit exceeded"
                           : "no transition within max_segment_time";
        break;
      }

      const GuardEvent& ev = *seg.event;
      res.traj.events.push_back(ev);
      s.c = {ev.q_post, ev.qd_post};
      s.domain = ev.post_domain;
      t = ev.time;

      if (ev.is_impact()) {
        ++res.steps_completed;
        ++s.step_index;
        s.stance_leg = s.stance_leg == HybridState::Leg::Left
                           ? HybridState::Leg::Right
                           : HybridState::Leg::Left;
        res.per_step_slip.push_back(step_slip);
        step_slip = 0.0;
        events_since_step = 0;
      } else if (++events_since_step > 200) {
        res.outcome = WalkResult::Outcome::Stalled;
        res.message = "smooth-switch chattering (>200 events in one step)";
        break;
      }
    }
  } catch (const Error& e) {
    res.outcome = WalkResult::Outcome::Error;
    res.message = e.what();
  }

  res.final_state = s;
  return res;
}

WalkResult walk(const RobotParams& params, const HybridState& x0,
                const GaitParams& gait, int n_steps, const SimOptions& opts) {
  return walk(params, x0, make_fl_controller(params, gait), n_steps, opts);
}

// ---- Poincare analysis ------------------------------------------------

ReducedState to_reduced(const SectionState& s) {
  ReducedState r;
  r.head<6>() = s.c.q.tail<6>();
  r.tail<7>() = s.c.qd;
  return r;
}

SectionState from_reduced(const ReducedState& r, const DomainId& domain) {
  SectionState s;
  s.c.q[kBaseX] = 0.0;
  s.c.q.tail<6>() = r.head<6>();
  s.c.qd = r.tail<7>();
  s.domain = domain;
  return s;
}

SectionState poincare_map(const RobotParams& params, const SectionState& x,
                          const GaitParams& gait, const SimOptions& opts) {
  HybridState hs;
  hs.c = x.c;
  hs.c.q[kBaseX] = 0.0;
  hs.domain = x.domain;
  const WalkResult r = walk(params, hs, gait, 1, opts);
  if (r.outcome != WalkResult::Outcome::Completed) {
    throw Error("poincare_map: step did not complete (" + r.message + ")");
  }
  SectionState out;
  out.c = r.final_state.c;
  out.c.q[kBaseX] = 0.0;
  out.domain = r.final_state.domain;
  return out;
}

FixedPointResult find_fixed_point(const RobotParams& params,
                                  const HybridState& x0,
                                  const GaitParams& gait, int max_steps,
                                  double tol, const SimOptions& opts) {
  // Reach the section first.
  const WalkResult r0 = walk(params, x0, gait, 1, opts);
  if (r0.outcome != WalkResult::Outcome::Completed) {
    throw Error("find_fixed_point: failed to reach the section (" +
                r0.message + ")");
  }
  SectionState x{r0.final_state.c, r0.final_state.domain};
  x.c.q[kBaseX] = 0.0;

  FixedPointResult best;
  best.state = x;
  best.residual = std::numeric_limits<double>::infinity();
  for (int k = 0; k < max_steps; ++k) {
    const SectionState nx = poincare_map(params, x, gait, opts);
    const double res = (to_reduced(nx) - to_reduced(x)).norm();
    x = nx;
    if (res < best.residual) {
      best.state = nx;
      best.residual = res;
      best.steps_used = k + 1;
    }
    if (res < tol) break;
  }
  return best;
}

FixedPointResult polish_fixed_point(const RobotParams& params,
                                    const SectionState& x0,
                                    const GaitParams& gait, int iters,
                                    double fd_step, const SimOptions& opts) {
  SectionState x = x0;
  FixedPointResult out;
  out.state = x;
  out.residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    const ReducedState rx = to_reduced(x);
    const ReducedState fx = to_reduced(poincare_map(params, x, gait, opts));
    const double res = (fx - rx).norm();
    if (res < out.residual) {
      out.state = x;
      out.residual = res;
      out.steps_used = it;
    }
    if (res < 1e-12) break;

    Eigen::Matrix<double, 13, 13> J;
    for (int i = 0; i < 13; ++i) {
      ReducedState rp = rx, rm = rx;
      rp[i] += fd_step;
      rm[i] -= fd_step;
      const ReducedState fp =
          to_reduced(poincare_map(params, from_reduced(rp, x.domain), gait,
                                  opts));
      const ReducedState fm =
          to_reduced(poincare_map(params, from_reduced(rm, x.domain), gait,
                                  opts));
      J.col(i) = (fp - fm) / (2.0 * fd_step);
    }
    const Eigen::Matrix<double, 13, 13> A =
        Eigen::Matrix<double, 13, 13>::Identity() - J;
    const ReducedState dx = A.fullPivLu().solve(fx - rx);
    x = from_reduced(rx + dx, x.domain);
  }
  // Final residual at the polished point.
  const ReducedState rx = to_reduced(x);
  const ReducedState fx = to_reduced(poincare_map(params, x, gait, opts));
  const double res = (fx - rx).norm();
  if (res < out.residual) {
    out.state = x;
    out.residual = res;
  }
  return out;
}

std::vector<double> orbital_stability(const RobotParams& params,
                                      const SectionState& fixed_point,
                                      const GaitParams& gait, double fd_step,
                                      const SimOptions& opts) {
  const ReducedState rx = to_reduced(fixed_point);
  Eigen::Matrix<double, 13, 13> J;
  for (int i = 0; i < 13; ++i) {
    ReducedState rp = rx, rm = rx;
    rp[i] += fd_step;
    rm[i] -= fd_step;
    const ReducedState fp = to_reduced(
        poincare_map(params, from_reduced(rp, fixed_point.domain), gait,
                     opts));
    const ReducedState fm = to_reduced(
        poincare_map(params, from_reduced(rm, fixed_point.domain), gait,
                     opts));
    J.col(i) = (fp - fm) / (2.0 * fd_step);
  }
  const Eigen::EigenSolver<Eigen::Matrix<double, 13, 13>> es(J);
  std::vector<double> mags(13);
  for (int i = 0; i < 13; ++i) mags[i] = std::abs(es.eigenvalues()[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  return mags;
}

// ---- trajectory io ------------------------------------------------------

void Trajectory::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write trajectory csv: " + path);
  out << "t";
  for (int i = 0; i < kNumDof; ++i) out << ",q" << i;
  for (int i = 0; i < kNumDof; ++i) out << ",qd" << i;
  for (int i = 0; i < kNumActuated; ++i) out << ",u" << i;
  out << ",lambda_x,lambda_z,domain,step\n";
  out.precision(17);
  for (const auto& s : samples) {
    out << s.t;
    for (int i = 0; i < kNumDof; ++i) out << "," << s.q[i];
    for (int i = 0; i < kNumDof; ++i) out << "," << s.qd[i];
    for (int i = 0; i < kNumActuated; ++i) out << "," << s.u[i];
    const int dom = s.domain.is_stick() ? 0 : s.domain.slip_sign;
    out << "," << s.lambda_x << "," << s.lambda_z << "," << dom << ","
        << s.step << "\n";
  }
}

Trajectory Trajectory::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory csv: " + path);
  Trajectory traj;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trajectory csv");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(is, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 1 + 2 * kNumDof + kNumActuated + 4) {
      throw ConfigError("trajectory csv row has wrong column count");
    }
    TrajectorySample s;
    int k = 0;
    s.t = v[k++];
    for (int i = 0; i < kNumDof; ++i) s.q[i] = v[k++];
    for (int i = 0; i < kNumDof; ++i) s.qd[i] = v[k++];
    for (int i = 0; i < kNumActuated; ++i) s.u[i] = v[k++];
    s.lambda_x = v[k++];
    s.lambda_z = v[k++];
    const int dom = static_cast<int>(v[k++]);
    s.domain = dom == 0 ? DomainId::stick() : DomainId::slip(dom);
    s.step = static_cast<int>(v[k++]);
    traj.samples.push_back(s);
  }
  return traj;
}

}  // namespace slipgait
