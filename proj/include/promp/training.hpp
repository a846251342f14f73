#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "promp/basis.hpp"
#include "promp/model.hpp"

namespace promp {

/// Normal-Inverse-Wishart prior over (mu_w, Sigma_w).
///
/// Without an explicit `S0` the scale matrix is rebuilt in every M-step as
/// (v0 + KD + 1) * blockdiag(Sigma_MLE), where blockdiag keeps the D per-joint
/// K x K blocks. The Sigma_w update then becomes
///   [N0 * blockdiag(Sigma_MLE) + N * Sigma_MLE] / (N + N0),  N0 = v0 + KD + 1,
/// which shrinks towards independent joints when few demonstrations exist.
struct NIWPrior {
  double k0 = 0.0;
  std::optional<Eigen::VectorXd> m0;  // zero when unset
  double v0 = 0.0;
  std::optional<Eigen::MatrixXd> S0;  // adaptive rule when unset
  bool mle = false;

  bool adaptive() const { return !mle && !S0.has_value(); }
  /// N + v0 + KD + 1 denominator offset, i.e. v0 + KD + 1.
  double n0(int weight_dim) const { return v0 + weight_dim + 1.0; }

  /// k0 = 0, v0 = KD + 1, adaptive S0.
  static NIWPrior standard(int weight_dim);
  /// k0 = 0, S0 = 0, v0 = -(KD + 1): the MAP updates collapse to the MLE ones.
  static NIWPrior maximum_likelihood(int weight_dim);

  void validate(int weight_dim) const;
};

/// Starting point for the EM loop. `weight_precision`, when set, replaces
/// Sigma_w for the first E-step only, so an infinitely wide start
/// (zero precision) is expressible.
struct TrainInit {
  Eigen::VectorXd mu_w;
  Eigen::MatrixXd Sigma_w;
  std::optional<Eigen::MatrixXd> weight_precision;
  Eigen::MatrixXd Sigma_y;
};

struct TrainOptions {
  double tol = 1e-6;
  int max_iter = 200;
  int min_iter = 3;
  bool diagonal_noise = false;
  /// Zero the cross-joint blocks of Sigma_w after every M-step.
  bool blockdiag_sigma = false;
  std::optional<TrainInit> init;  // zero mean, identity covariances when unset
};

struct TrainReport {
  int iterations = 0;
  /// Entry 0 is the objective at the initial parameters, entry i the value
  /// after the i-th M-step. Log likelihood in MLE mode, log likelihood plus
  /// the unnormalized inverse-Wishart log density otherwise.
  std::vector<double> objective_trace;
  bool converged = false;
  std::vector<GaussianState> per_demo_posteriors;
  bool ascent_violated = false;
  double max_jitter = 0.0;
  int sigma_w_rank = 0;
  bool rank_deficient = false;
  std::vector<std::string> warnings;
};

/// Gaussian posterior over the weights of one demonstration (mean m_n,
/// covariance S_n). An empty demonstration returns the prior.
GaussianState e_step(const ProMP& p, const Demonstration& demo);

/// Algorithm with full Gaussian E-step: MAP under `prior`, or MLE when
/// `prior.mle` is set.
std::pair<ProMP, TrainReport> em_train(std::span<const Demonstration> demos,
                                       const BasisConfig& basis, int dofs, const NIWPrior& prior,
                                       const TrainOptions& opts = {});

/// Same loop with the E-step collapsed to its mean (point estimate); the
/// posterior covariance drops out of every M-step update.
std::pair<ProMP, TrainReport> em_train_approx(std::span<const Demonstration> demos,
                                              const BasisConfig& basis, int dofs,
                                              const NIWPrior& prior,
                                              const TrainOptions& opts = {});

/// Per-demonstration ridge fit followed by the empirical mean and
/// (1/N-normalized) covariance of the fitted weights. Sigma_y comes from the
/// pooled residuals.
std::pair<ProMP, TrainReport> least_squares_train(std::span<const Demonstration> demos,
                                                  const BasisConfig& basis, int dofs,
                                                  double lambda);

/// Keeps the D diagonal K x K blocks, zeroes the rest.
Eigen::MatrixXd blockdiag(const Eigen::MatrixXd& m, int block_size);

/// Unnormalized log inverse-Wishart density:
/// -(v0 + p + 1)/2 log|Sigma| - tr(S0 Sigma^-1)/2.
double log_iw_kernel(const Eigen::MatrixXd& sigma, double v0, const Eigen::MatrixXd& s0);

}  // namespace promp
