#include "slipgait/nlp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace slipgait {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Eigen::VectorXd NlpProblem::lower_bounds() const {
  return Eigen::VectorXd::Constant(num_vars(), -kInf);
}

Eigen::VectorXd NlpProblem::upper_bounds() const {
  return Eigen::VectorXd::Constant(num_vars(), kInf);
}

Eigen::VectorXd NlpProblem::objective_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g(num_vars());
  Eigen::VectorXd xp = x;
  for (int i = 0; i < num_vars(); ++i) {
    const double h = 1e-7 * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = objective(xp);
    xp[i] = x[i] - h;
    const double fm = objective(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

void NlpProblem::constraint_jacobians(const Eigen::VectorXd& x,
                                      Eigen::MatrixXd& jac_eq,
                                      Eigen::MatrixXd& jac_ineq) const {
  jac_eq.resize(num_eq(), num_vars());
  jac_ineq.resize(num_ineq(), num_vars());
  Eigen::VectorXd xp = x;
  Eigen::VectorXd ep(num_eq()), em(num_eq()), ip(num_ineq()), im(num_ineq());
  for (int i = 0; i < num_vars(); ++i) {
    const double h = 1e-7 * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    constraints(xp, ep, ip);
    xp[i] = x[i] - h;
    constraints(xp, em, im);
    xp[i] = x[i];
    jac_eq.col(i) = (ep - em) / (2.0 * h);
    jac_ineq.col(i) = (ip - im) / (2.0 * h);
  }
}

double NlpProblem::max_violation(const Eigen::VectorXd& x) const {
  Eigen::VectorXd eq(num_eq()), in(num_ineq());
  constraints(x, eq, in);
  double v = 0.0;
  if (num_eq() > 0) v = eq.cwiseAbs().maxCoeff();
  if (num_ineq() > 0) v = std::max(v, std::max(0.0, -in.minCoeff()));
  const Eigen::VectorXd lb = lower_bounds();
  const Eigen::VectorXd ub = upper_bounds();
  for (int i = 0; i < num_vars(); ++i) {
    if (std::isfinite(lb[i])) v = std::max(v, lb[i] - x[i]);
    if (std::isfinite(ub[i])) v = std::max(v, x[i] - ub[i]);
  }
  return v;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::LinAlgFailure: return "linalg_failure";
  }
  return "?";
}

namespace {

// Slack-augmented view of the problem:
//   variables v = (x, s), constraints C(v) = (c_eq(x), c_in(x) - s) = 0,
//   box lb <= x <= ub, s >= 0.
struct Augmented {
  const NlpProblem& p;
  int nx, ns, nv, m;
  Eigen::VectorXd lb, ub;

  explicit Augmented(const NlpProblem& prob) : p(prob) {
    nx = p.num_vars();
    ns = p.num_ineq();
    nv = nx + ns;
    m = p.num_eq() + ns;
    lb.resize(nv);
    ub.resize(nv);
    lb.head(nx) = p.lower_bounds();
    ub.head(nx) = p.upper_bounds();
    lb.tail(ns).setZero();
    ub.tail(ns).setConstant(kInf);
  }

  Eigen::VectorXd clip(const Eigen::VectorXd& v) const {
    return v.cwiseMax(lb).cwiseMin(ub);
  }

  double objective(const Eigen::VectorXd& v) const {
    return p.objective(v.head(nx));
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& v) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nv);
    g.head(nx) = p.objective_gradient(v.head(nx));
    return g;
  }

  Eigen::VectorXd constraints(const Eigen::VectorXd& v) const {
    Eigen::VectorXd eq(p.num_eq()), in(ns);
    p.constraints(v.head(nx), eq, in);
    Eigen::VectorXd c(m);
    c.head(p.num_eq()) = eq;
    c.tail(ns) = in - v.tail(ns);
    return c;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd je, ji;
    p.constraint_jacobians(v.head(nx), je, ji);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, nv);
    J.topLeftCorner(p.num_eq(), nx) = je;
    J.block(p.num_eq(), 0, ns, nx) = ji;
    J.block(p.num_eq(), nx, ns, ns) = -Eigen::MatrixXd::Identity(ns, ns);
    return J;
  }
};

struct QpResult {
  Eigen::VectorXd d;
  Eigen::VectorXd lambda;
  bool ok = false;
};

// Primal active-set method for
//   min 0.5 d'Hd + g'd   s.t.  J d + c = 0,  dlo <= d <= dhi,
// with dual regularization on the equality block.  H must be positive
// definite.  active[i]: 0 free, -1 pinned at dlo, +1 pinned at dhi.
QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                  const Eigen::MatrixXd& J, const Eigen::VectorXd& c,
                  const Eigen::VectorXd& dlo, const Eigen::VectorXd& dhi,
                  std::vector<int>& active, int max_iter, double dual_reg) {
  const int n = static_cast<int>(g.size());
  const int m = static_cast<int>(c.size());
  QpResult out;
  out.d = Eigen::VectorXd::Zero(n);
  out.lambda = Eigen::VectorXd::Zero(m);

  // Keep the warm-started active set consistent with finite bounds.
  for (int i = 0; i < n; ++i) {
    if (active[i] == -1 && !std::isfinite(dlo[i])) active[i] = 0;
    if (active[i] == +1 && !std::isfinite(dhi[i])) active[i] = 0;
    if (active[i] == -1) out.d[i] = dlo[i];
    if (active[i] == +1) out.d[i] = dhi[i];
  }

  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<int> free_idx;
    free_idx.reserve(n);
    for (int i = 0; i < n; ++i)
      if (active[i] == 0) free_idx.push_back(i);
    const int nf = static_cast<int>(free_idx.size());

    Eigen::VectorXd d_new = out.d;
    Eigen::VectorXd lambda(m);
    if (nf == 0) {
      lambda.setZero();
    } else {
      Eigen::MatrixXd Hff(nf, nf), Jf(m, nf);
      Eigen::VectorXd geff(nf);
      Eigen::VectorXd ceff = c;
      for (int a = 0; a < n; ++a) {
        if (active[a] != 0) ceff += J.col(a) * out.d[a];
      }
      for (int r = 0; r < nf; ++r) {
        const int i = free_idx[r];
        double gi = g[i];
        for (int a = 0; a < n; ++a)
          if (active[a] != 0) gi += H(i, a) * out.d[a];
        geff[r] = gi;
        Jf.col(r) = J.col(free_idx[r]);
        for (int s = 0; s < nf; ++s) Hff(r, s) = H(i, free_idx[s]);
      }

      Eigen::LLT<Eigen::MatrixXd> lltH(Hff);
      if (lltH.info() != Eigen::Success) {
        Hff.diagonal().array() += 1e-8 * (1.0 + Hff.diagonal().maxCoeff());
        lltH.compute(Hff);
        if (lltH.info() != Eigen::Success) return out;  // ok = false
      }
      const Eigen::MatrixXd HinvJt = lltH.solve(Jf.transpose());
      Eigen::MatrixXd S = Jf * HinvJt;
      S.diagonal().array() += dual_reg * (1.0 + S.diagonal().cwiseAbs().maxCoeff());
      Eigen::LLT<Eigen::MatrixXd> lltS(S);
      if (lltS.info() != Eigen::Success) return out;
      lambda = lltS.solve(Jf * lltH.solve(geff) - ceff);
      const Eigen::VectorXd df = lltH.solve(Jf.transpose() * lambda - geff);
      for (int r = 0; r < nf; ++r) d_new[free_idx[r]] = df[r];
    }

    // Ratio test along the move from out.d to d_new on free variables.
    double alpha = 1.0;
    int blocker = -1, block_side = 0;
    for (int i : free_idx) {
      const double delta = d_new[i] - out.d[i];
      if (delta > 0 && std::isfinite(dhi[i])) {
        const double a = (dhi[i] - out.d[i]) / delta;
        if (a < alpha) {
          alpha = a;
          blocker = i;
          block_side = +1;
        }
      } else if (delta < 0 && std::isfinite(dlo[i])) {
        const double a = (dlo[i] - out.d[i]) / delta;
        if (a < alpha) {
          alpha = a;
          blocker = i;
          block_side = -1;
        }
      }
    }

    if (blocker >= 0 && alpha < 1.0 - 1e-12) {
      for (int i : free_idx) out.d[i] += alpha * (d_new[i] - out.d[i]);
      out.d[blocker] = block_side > 0 ? dhi[blocker] : dlo[blocker];
      active[blocker] = block_side;
      continue;
    }

    out.d = d_new;
    out.lambda = lambda;

    // Bound multipliers: release the worst violator if any.
    const Eigen::VectorXd grad_l = H * out.d + g - J.transpose() * lambda;
    int worst = -1;
    double worst_val = -1e-9;
    for (int i = 0; i < n; ++i) {
      if (active[i] == 0) continue;
      const double mult = active[i] == -1 ? grad_l[i] : -grad_l[i];
      if (mult < worst_val) {
        worst_val = mult;
        worst = i;
      }
    }
    if (worst < 0) {
      out.ok = true;
      return out;
    }
    active[worst] = 0;
  }
  // Iteration cap: return the current (feasible w.r.t. box) point.
  out.ok = true;
  return out;
}

// Projected Gauss-Newton/Levenberg-Marquardt on 0.5*||C(v)||^2 within the box.
bool restore_feasibility(const Augmented& aug, Eigen::VectorXd& v,
                         double target, int max_iter) {
  double lm = 1e-6;
  Eigen::VectorXd c = aug.constraints(v);
  for (int it = 0; it < max_iter; ++it) {
    const double viol = c.lpNorm<Eigen::Infinity>();
    if (viol <= target) return true;
    const Eigen::MatrixXd J = aug.jacobian(v);
    Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd rhs = -J.transpose() * c;
    bool accepted = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal().array() += lm * (1.0 + JtJ.diagonal().maxCoeff());
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      if (llt.info() != Eigen::Success) {
        lm *= 10.0;
        continue;
      }
      const Eigen::VectorXd trial = aug.clip(v + llt.solve(rhs));
      const Eigen::VectorXd c_trial = aug.constraints(trial);
      if (c_trial.squaredNorm() < c.squaredNorm() * (1.0 - 1e-12)) {
        v = trial;
        c = c_trial;
        lm = std::max(lm / 3.0, 1e-12);
        accepted = true;
        break;
      }
      lm *= 10.0;
    }
    if (!accepted) return c.lpNorm<Eigen::Infinity>() <= target;
  }
  return c.lpNorm<Eigen::Infinity>() <= target;
}

}  // namespace

NlpResult SqpSolver::solve(const NlpProblem& problem,
                           const Eigen::VectorXd& x0, const NlpOptions& opts) {
  const Augmented aug(problem);
  NlpResult res;

  Eigen::VectorXd v(aug.nv);
  v.head(aug.nx) = x0;
  {
    Eigen::VectorXd eq(problem.num_eq()), in(problem.num_ineq());
    problem.constraints(x0, eq, in);
    v.tail(aug.ns) = in.cwiseMax(0.0);
  }
  v = aug.clip(v);

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(aug.nv, aug.nv);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(aug.m);
  std::vector<int> active(aug.nv, 0);
  double nu = 1.0;

  Eigen::VectorXd c = aug.constraints(v);
  Eigen::VectorXd g = aug.gradient(v);
  Eigen::MatrixXd J = aug.jacobian(v);
  double f = aug.objective(v);

  const double entry_viol = c.lpNorm<Eigen::Infinity>();
  const double feas_ceiling = std::max(entry_viol, opts.tol_feas);

  Eigen::VectorXd best_v = v;
  double best_viol = entry_viol;
  double best_f = f;
  auto update_best = [&](const Eigen::VectorXd& vv, double viol, double ff) {
    const bool cur_feas = viol <= opts.tol_feas;
    const bool best_feas = best_viol <= opts.tol_feas;
    if ((cur_feas && (!best_feas || ff < best_f)) ||
        (!cur_feas && !best_feas && viol < best_viol)) {
      best_v = vv;
      best_viol = viol;
      best_f = ff;
    }
  };

  int restore_runs = 0;
  res.status = SolveStatus::MaxIterations;

  int k = 0;
  for (; k < opts.max_iter; ++k) {
    const double viol = c.lpNorm<Eigen::Infinity>();
    update_best(v, viol, f);

    // KKT check: feasibility + projected stationarity of the Lagrangian.
    const Eigen::VectorXd grad_l = g - J.transpose() * lambda;
    const Eigen::VectorXd proj = v - aug.clip(v - grad_l);
    if (viol <= opts.tol_feas &&
        proj.lpNorm<Eigen::Infinity>() <= opts.tol_opt) {
      res.status = SolveStatus::Optimal;
      break;
    }

    QpResult qp = solve_qp(H, g, J, c, aug.lb - v, aug.ub - v, active,
                           opts.max_qp_iter, opts.dual_reg);
    if (!qp.ok) {
      if (restore_runs++ > 4) {
        res.status = SolveStatus::LinAlgFailure;
        res.message = "QP subproblem factorization failed repeatedly";
        break;
      }
      if (!restore_feasibility(aug, v, std::max(0.5 * viol, opts.tol_feas),
                               opts.max_restore_iter) &&
          viol > opts.tol_feas) {
        res.status = SolveStatus::Infeasible;
        res.message = "feasibility restoration stalled";
        break;
      }
      c = aug.constraints(v);
      g = aug.gradient(v);
      J = aug.jacobian(v);
      f = aug.objective(v);
      H = Eigen::MatrixXd::Identity(aug.nv, aug.nv);
      continue;
    }

    const double step_norm = qp.d.lpNorm<Eigen::Infinity>();
    if (step_norm <= opts.tol_step && viol <= opts.tol_feas) {
      res.status = SolveStatus::Optimal;
      lambda = qp.lambda;
      break;
    }

    nu = std::max({nu, 1.5 * qp.lambda.lpNorm<Eigen::Infinity>() + 1e-3});
    const double phi0 = f + nu * c.lpNorm<1>();
    const double dphi = g.dot(qp.d) - nu * c.lpNorm<1>();

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd v_trial, c_trial;
    double f_trial = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      v_trial = aug.clip(v + alpha * qp.d);
      c_trial = aug.constraints(v_trial);
      f_trial = aug.objective(v_trial);
      const double phi = f_trial + nu * c_trial.lpNorm<1>();
      const double viol_trial = c_trial.lpNorm<Eigen::Infinity>();
      const bool feas_guard =
          viol > feas_ceiling || viol_trial <= feas_ceiling;
      if (phi <= phi0 + 1e-4 * alpha * std::min(dphi, 0.0) && feas_guard) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-12) break;
    }

    if (!accepted) {
      if (viol > opts.tol_feas) {
        if (restore_runs++ > 6) {
          res.status = SolveStatus::Infeasible;
          res.message = "line search and restoration both stalled";
          break;
        }
        if (!restore_feasibility(aug, v, std::max(0.3 * viol, opts.tol_feas),
                                 opts.max_restore_iter) &&
            viol > 10 * opts.tol_feas &&
            aug.constraints(v).lpNorm<Eigen::Infinity>() >= 0.99 * viol) {
          res.status = SolveStatus::Infeasible;
          res.message = "feasibility restoration made no progress";
          break;
        }
        c = aug.constraints(v);
        g = aug.gradient(v);
        J = aug.jacobian(v);
        f = aug.objective(v);
        H = Eigen::MatrixXd::Identity(aug.nv, aug.nv);
        continue;
      }
      // Feasible but no acceptable step: treat as converged-in-practice.
      res.status = SolveStatus::Optimal;
      res.message = "step stalled at feasible point";
      lambda = qp.lambda;
      break;
    }

    // Powell-damped BFGS update on the Lagrangian gradient.
    const Eigen::VectorXd g_new = aug.gradient(v_trial);
    const Eigen::MatrixXd J_new = aug.jacobian(v_trial);
    const Eigen::VectorXd s = v_trial - v;
    const Eigen::VectorXd y = (g_new - J_new.transpose() * qp.lambda) -
                              (g - J.transpose() * qp.lambda);
    const double sHs = s.dot(H * s);
    const double sy = s.dot(y);
    if (sHs > 0) {
      Eigen::VectorXd y_eff = y;
      if (sy < 0.2 * sHs) {
        const double theta = 0.8 * sHs / (sHs - sy);
        y_eff = theta * y + (1.0 - theta) * (H * s);
      }
      const double sy_eff = s.dot(y_eff);
      if (sy_eff > 1e-12 * s.norm() * y_eff.norm()) {
        const Eigen::VectorXd Hs = H * s;
        H -= (Hs * Hs.transpose()) / sHs;
        H += (y_eff * y_eff.transpose()) / sy_eff;
      }
    }

    v = v_trial;
    c = c_trial;
    f = f_trial;
    g = g_new;
    J = J_new;
    lambda = qp.lambda;
  }

  {
    const double viol = c.lpNorm<Eigen::Infinity>();
    update_best(v, viol, f);
  }

  res.x = best_v.head(aug.nx);
  res.objective = problem.objective(res.x);
  res.max_violation = problem.max_violation(res.x);
  res.iterations = k;
  res.eq_multipliers = lambda.head(problem.num_eq());
  res.ineq_multipliers = lambda.tail(problem.num_ineq());
  if (res.message.empty()) res.message = status_name(res.status);
  return res;
}

}  // namespace slipgait
