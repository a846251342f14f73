#pragma once

#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "promp/kinematics.hpp"
#include "promp/model.hpp"

namespace promp {

/// Desired joint state at phase z: an exact value (cov unset) or a
/// Gaussian. order 1 and 2 target phase velocities and accelerations.
struct JointTarget {
  double z = 0.0;
  int order = 0;
  Eigen::VectorXd value;
  std::optional<Eigen::MatrixXd> cov;
};

/// Desired task-space position distribution at phase z.
struct TaskTarget {
  double z = 0.0;
  GaussianState dist;
};

struct LaplaceOptions {
  /// Stationarity threshold on |gradient| relative to the size of the two
  /// competing gradient terms (prior pull and task pull).
  double grad_tol = 1e-8;
  int max_iter = 100;
};

struct LaplaceReport {
  int iterations = 0;
  double grad_norm = 0.0;
  double relative_grad_norm = 0.0;
  double hessian_condition = 0.0;
  bool full_hessian = false;
  GaussianState joint_posterior;  // mu_q, Sigma_q
};

/// Exact conditioning on y_t = value. Input is never modified.
ProMP condition_point(const ProMP& p, double z, const Eigen::VectorXd& value, int order = 0);

/// Conditioning on y_t ~ N(target.mean, target.cov) with y_t marginalized.
/// target.cov = 0 reduces to condition_point.
ProMP condition_gaussian(const ProMP& p, double z, const GaussianState& target, int order = 0);

ProMP condition(const ProMP& p, const JointTarget& target);

/// Linearized push-forward of the joint marginal (without Sigma_y) through fk:
/// mean f(Phi mu_w), covariance (J Phi) Sigma_w (J Phi)^T.
GaussianState task_distribution(const ProMP& p, double z, const ForwardKinematics& fk);

/// Laplace approximation of p(y_t | task target, ProMP) at phase z, then
/// Gaussian conditioning of the ProMP on it. Newton iterations start at the
/// prior mean; the returned report carries the mode and covariance.
std::pair<ProMP, LaplaceReport> condition_task(const ProMP& p, const TaskTarget& target,
                                               const ForwardKinematics& fk,
                                               const LaplaceOptions& opts = {});

}  // namespace promp
