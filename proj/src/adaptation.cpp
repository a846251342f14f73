#include "promp/adaptation.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "promp/errors.hpp"
#include "promp/linalg.hpp"

namespace promp {

namespace {

void check_target(const ProMP& p, const Eigen::VectorXd& value, int order) {
  if (value.size() != p.dofs)
    throw InputError("joint target has " + std::to_string(value.size()) + " entries, model has " +
                     std::to_string(p.dofs) + " joints");
  if (order < 0 || order > 2) throw InputError("target order must be 0, 1 or 2");
  if (!value.allFinite()) throw InputError("joint target has non-finite entries");
}

}  // namespace

ProMP condition_gaussian(const ProMP& p, double z, const GaussianState& target, int order) {
  check_target(p, target.mean, order);
  target.validate();

  // Gain form: K = Sigma_w Phi^T (Phi Sigma_w Phi^T + Sigma_y)^-1 equals
  // T Phi^T Sigma_y^-1 with T = (Sigma_w^-1 + Phi^T Sigma_y^-1 Phi)^-1.
  const Eigen::MatrixXd phi = block_feature_matrix(p.basis, z, p.dofs, order);
  const Eigen::MatrixXd ps = phi * p.Sigma_w;
  const Eigen::MatrixXd innovation = ps * phi.transpose() + p.Sigma_y;
  const auto f = linalg::factor_spd(innovation, "Phi Sigma_w Phi^T + Sigma_y");
  const Eigen::MatrixXd gain = f.solve(ps).transpose();

  ProMP out = p;
  out.mu_w = p.mu_w + gain * (target.mean - phi * p.mu_w);
  Eigen::MatrixXd cov = p.Sigma_w - gain * ps;
  cov.noalias() += gain * target.cov * gain.transpose();
  out.Sigma_w = linalg::symmetrize(cov);
  return out;
}

ProMP condition_point(const ProMP& p, double z, const Eigen::VectorXd& value, int order) {
  return condition_gaussian(p, z, {value, Eigen::MatrixXd::Zero(p.dofs, p.dofs)}, order);
}

ProMP condition(const ProMP& p, const JointTarget& target) {
  if (target.cov) return condition_gaussian(p, target.z, {target.value, *target.cov}, target.order);
  return condition_point(p, target.z, target.value, target.order);
}

GaussianState task_distribution(const ProMP& p, double z, const ForwardKinematics& fk) {
  if (fk.input_dim() != p.dofs)
    throw InputError("kinematics expects " + std::to_string(fk.input_dim()) +
                     " joints, model has " + std::to_string(p.dofs));
  const Eigen::MatrixXd phi = block_feature_matrix(p.basis, z, p.dofs);
  const Eigen::VectorXd y = phi * p.mu_w;
  const Eigen::MatrixXd G = fk.jacobian(y) * phi;
  return {fk.evaluate(y), linalg::symmetrize(G * p.Sigma_w * G.transpose())};
}

namespace {

struct TaskObjective {
  const ForwardKinematics& fk;
  Eigen::VectorXd prior_mean;
  linalg::SpdFactor prior;
  Eigen::VectorXd task_mean;
  linalg::SpdFactor task;

  double value(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd dy = y - prior_mean;
    const Eigen::VectorXd dx = fk.evaluate(y) - task_mean;
    return -0.5 * (dy.dot(prior.solve(dy)) + dx.dot(task.solve(dx)));
  }
};

}  // namespace

std::pair<ProMP, LaplaceReport> condition_task(const ProMP& p, const TaskTarget& target,
                                               const ForwardKinematics& fk,
                                               const LaplaceOptions& opts) {
  if (fk.input_dim() != p.dofs)
    throw InputError("kinematics expects " + std::to_string(fk.input_dim()) +
                     " joints, model has " + std::to_string(p.dofs));
  if (target.dist.dim() != fk.output_dim())
    throw InputError("task target has dimension " + std::to_string(target.dist.dim()) +
                     ", kinematics outputs " + std::to_string(fk.output_dim()));
  target.dist.validate();

  const GaussianState marginal = marginal_at(p, target.z, 0);
  TaskObjective obj{fk, marginal.mean, linalg::factor_spd(marginal.cov, "joint marginal"),
                    target.dist.mean, {}};
  {
    Eigen::LLT<Eigen::MatrixXd> llt(target.dist.cov);
    if (llt.info() != Eigen::Success)
      throw InputError("task target covariance must be positive definite");
    obj.task.llt = std::move(llt);
  }
  const Eigen::MatrixXd prior_precision = obj.prior.inverse();
  const Eigen::MatrixXd task_precision = obj.task.inverse();
  const bool second = fk.has_second_derivatives();

  struct Local {
    Eigen::VectorXd grad;
    Eigen::MatrixXd gauss_newton;
    std::optional<Eigen::MatrixXd> full;
    double relative = 0.0;
  };
  auto local = [&](const Eigen::VectorXd& y) {
    Local l;
    const Eigen::MatrixXd J = fk.jacobian(y);
    const Eigen::VectorXd task_force = task_precision * (fk.evaluate(y) - obj.task_mean);
    const Eigen::VectorXd prior_pull = prior_precision * (y - obj.prior_mean);
    const Eigen::VectorXd task_pull = J.transpose() * task_force;
    l.grad = -prior_pull - task_pull;
    const double scale = prior_pull.norm() + task_pull.norm();
    l.relative = scale > 0.0 ? l.grad.norm() / scale : 0.0;
    l.gauss_newton = prior_precision + J.transpose() * task_precision * J;
    if (second) {
      Eigen::MatrixXd h = l.gauss_newton;
      const auto hs = fk.hessians(y);
      for (std::size_t k = 0; k < hs.size(); ++k) h += task_force[static_cast<Eigen::Index>(k)] * hs[k];
      l.full = linalg::symmetrize(h);
    }
    return l;
  };

  Eigen::VectorXd y = obj.prior_mean;
  double fy = obj.value(y);
  Local l = local(y);
  int it = 0;
  for (; it < opts.max_iter && l.relative > opts.grad_tol; ++it) {
    bool moved = false;
    // Newton step on the full curvature when it is positive definite,
    // Gauss-Newton otherwise.
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      Eigen::VectorXd dir;
      if (attempt == 0 && l.full) {
        Eigen::LLT<Eigen::MatrixXd> llt(*l.full);
        if (llt.info() != Eigen::Success) continue;
        dir = llt.solve(l.grad);
      } else if (attempt == 1 || !l.full) {
        dir = l.gauss_newton.llt().solve(l.grad);
      } else {
        continue;
      }
      const double slope = l.grad.dot(dir);
      double step = 1.0;
      for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
        const Eigen::VectorXd cand = y + step * dir;
        const double fc = obj.value(cand);
        if (!std::isfinite(fc)) continue;
        bool accept = fc >= fy + 1e-4 * step * slope;
        // Close to the mode the objective change drowns in round-off; a full
        // step that keeps the value and halves the gradient is taken anyway.
        if (!accept && ls == 0 && fc >= fy - 1e-12 * std::abs(fy))
          accept = local(cand).relative < 0.5 * l.relative;
        if (accept) {
          moved = cand != y;
          y = cand;
          fy = fc;
          break;
        }
      }
    }
    l = local(y);
    if (!moved) break;
  }
  if (l.relative > opts.grad_tol)
    throw AdaptationError("task-space optimization stopped after " + std::to_string(it) +
                              " iterations with relative gradient " +
                              std::to_string(l.relative),
                          y, l.grad.norm());

  const Eigen::MatrixXd precision = l.full ? *l.full : l.gauss_newton;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("negative Hessian at the task-space mode is not positive definite "
                         "(saddle point): " + linalg::describe(precision));

  LaplaceReport report;
  report.iterations = it;
  report.grad_norm = l.grad.norm();
  report.relative_grad_norm = l.relative;
  report.full_hessian = l.full.has_value();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(precision, Eigen::EigenvaluesOnly);
  report.hessian_condition = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  report.joint_posterior.mean = y;
  report.joint_posterior.cov =
      linalg::symmetrize(llt.solve(Eigen::MatrixXd::Identity(p.dofs, p.dofs)));

  ProMP out = condition_gaussian(p, target.z, report.joint_posterior, 0);
  return {std::move(out), std::move(report)};
}

}  // namespace promp
