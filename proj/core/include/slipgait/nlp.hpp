#pragma once

#include <string>

#include <Eigen/Dense>

namespace slipgait {

/// Generic smooth nonlinear program:
///   min f(x)   s.t.   c_eq(x) = 0,   c_in(x) >= 0,   lb <= x <= ub.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;

  virtual Eigen::VectorXd lower_bounds() const;
  virtual Eigen::VectorXd upper_bounds() const;

  virtual double objective(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const;

  virtual void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& eq,
                           Eigen::VectorXd& ineq) const = 0;

  /// Dense Jacobians; the default is central finite differences over the
  /// full vector.  Structured problems should override with something
  /// smarter.
  virtual void constraint_jacobians(const Eigen::VectorXd& x,
                                    Eigen::MatrixXd& jac_eq,
                                    Eigen::MatrixXd& jac_ineq) const;

  /// max(|c_eq|, violation of c_in, violation of bounds), freshly evaluated.
  double max_violation(const Eigen::VectorXd& x) const;
};

enum class SolveStatus { Optimal, MaxIterations, Infeasible, LinAlgFailure };
const char* status_name(SolveStatus s);

struct NlpOptions {
  int max_iter = 400;
  double tol_feas = 1e-8;   // constraint violation at the solution
  double tol_opt = 1e-6;    // projected KKT stationarity
  double tol_step = 5e-13;  // accept when steps stall while feasible
  int max_qp_iter = 250;
  int max_restore_iter = 60;
  double dual_reg = 1e-9;
  bool verbose = false;
};

struct NlpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  /// True max violation, recomputed from the problem after solving.
  double max_violation = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  std::string message;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
};

/// Adapter interface so an external NLP code can be plugged in behind the
/// gait optimizer.
class NlpSolver {
 public:
  virtual ~NlpSolver() = default;
  virtual NlpResult solve(const NlpProblem& problem, const Eigen::VectorXd& x0,
                          const NlpOptions& opts) = 0;
};

/// Dense SQP with slack-converted inequalities, Powell-damped BFGS Hessian,
/// a primal active-set box/equality QP subproblem, l1-merit line search and
/// a Gauss-Newton feasibility-restoration fallback.  Suited to desk-scale
/// problems (a few hundred to a couple thousand variables).
class SqpSolver : public NlpSolver {
 public:
  NlpResult solve(const NlpProblem& problem, const Eigen::VectorXd& x0,
                  const NlpOptions& opts) override;
};

}  // namespace slipgait
