#include "slipgait/contact.hpp"

#include <cmath>

#include "slipgait/errors.hpp"

namespace slipgait {
namespace {

RowVec7 slip_jacobian(const DynamicsTerms& t, int slip_sign, double mu) {
  return t.Jz - slip_sign * mu * t.Jx;
}

}  // namespace

ContactForces stick_forces(const DynamicsTerms& t, const Vec4& u,
                           const ContactSolverOptions& opts) {
  const Eigen::LLT<Mat77> llt(t.D);
  const Mat27 J = t.stance_jacobian();
  const Eigen::Matrix<double, 7, 2> DinvJt = llt.solve(J.transpose());
  const Mat2 A = J * DinvJt;
  const double det = A.determinant();
  if (std::abs(det) <= opts.singular_eps * A.norm() * A.norm()) {
    throw SingularContactMatrix("J D^-1 J^T singular in stick contact");
  }
  const Vec2 rhs = J * llt.solve(t.H - t.B * u) - t.stance_bias();
  const Vec2 lambda = A.inverse() * rhs;
  return {lambda[0], lambda[1], ContactMode::Stick, 0};
}

ContactForces slip_forces(const DynamicsTerms& t, const Vec4& u, int slip_sign,
                          double mu, const ContactSolverOptions& opts) {
  const Eigen::LLT<Mat77> llt(t.D);
  const RowVec7 Jt = slip_jacobian(t, slip_sign, mu);
  const double denom = t.Jz * llt.solve(Jt.transpose());
  if (denom <= opts.painleve_eps) {
    throw PainleveSingularity(
        "slip force denominator " + std::to_string(denom) +
        " non-positive (sigma=" + std::to_string(slip_sign) + ")");
  }
  const double rhs = t.Jz * llt.solve(t.H - t.B * u) - t.dJz_qd;
  const double lambda_z = rhs / denom;
  return {-slip_sign * mu * lambda_z, lambda_z, ContactMode::Slip, slip_sign};
}

ContactAccel continuous_accel(const DynamicsTerms& t, const Vec4& u,
                              const DomainId& domain, double mu,
                              const ContactSolverOptions& opts) {
  ContactAccel out;
  out.forces = domain.is_stick()
                   ? stick_forces(t, u, opts)
                   : slip_forces(t, u, domain.slip_sign, mu, opts);
  const Vec7 gen_force = t.B * u - t.H +
                         t.Jx.transpose() * out.forces.lambda_x +
                         t.Jz.transpose() * out.forces.lambda_z;
  out.qdd = t.D.llt().solve(gen_force);
  return out;
}

AffineAccel affine_accel(const DynamicsTerms& t, const DomainId& domain,
                         double mu, const ContactSolverOptions& opts) {
  const Eigen::LLT<Mat77> llt(t.D);
  AffineAccel out;
  if (domain.is_stick()) {
    const Mat27 J = t.stance_jacobian();
    const Eigen::Matrix<double, 7, 2> DinvJt = llt.solve(J.transpose());
    const Mat2 A = J * DinvJt;
    const double det = A.determinant();
    if (std::abs(det) <= opts.singular_eps * A.norm() * A.norm()) {
      throw SingularContactMatrix("J D^-1 J^T singular in stick contact");
    }
    const Mat2 Ainv = A.inverse();
    const Vec2 lam0 = Ainv * (J * llt.solve(t.H) - t.stance_bias());
    const Eigen::Matrix<double, 2, 4> lam1 = -Ainv * (J * llt.solve(t.B));
    out.lx0 = lam0[0];
    out.lz0 = lam0[1];
    out.lx1 = lam1.row(0).transpose();
    out.lz1 = lam1.row(1).transpose();
    out.a0 = llt.solve(-t.H + J.transpose() * lam0);
    out.A1 = llt.solve(t.B + J.transpose() * lam1);
  } else {
    const int sigma = domain.slip_sign;
    const RowVec7 Jt = slip_jacobian(t, sigma, mu);
    const double denom = t.Jz * llt.solve(Jt.transpose());
    if (denom <= opts.painleve_eps) {
      throw PainleveSingularity("slip force denominator non-positive");
    }
    out.slip_denom = denom;
    const double lz0 = (t.Jz * llt.solve(t.H) - t.dJz_qd) / denom;
    const Eigen::Matrix<double, 1, 4> lz1 = -(t.Jz * llt.solve(t.B)) / denom;
    out.lz0 = lz0;
    out.lz1 = lz1.transpose();
    out.lx0 = -sigma * mu * lz0;
    out.lx1 = -sigma * mu * lz1.transpose();
    out.a0 = llt.solve(-t.H + Jt.transpose() * lz0);
    out.A1 = llt.solve(t.B + Jt.transpose() * lz1);
  }
  return out;
}

}  // namespace slipgait
