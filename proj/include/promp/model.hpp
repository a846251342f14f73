#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "promp/basis.hpp"

namespace promp {

/// Mean vector and covariance of a Gaussian.
struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

/// One recorded trajectory. Row i of `joints` was recorded at `times[i]`;
/// the phase of a sample is (t - t0) / duration.
struct Demonstration {
  std::vector<double> times;
  Eigen::MatrixXd joints;  // samples x D
  double t0 = 0.0;
  double duration = 1.0;

  /// t0 and duration taken from the first and last timestamps.
  static Demonstration from_samples(std::vector<double> times, Eigen::MatrixXd joints);

  int dofs() const { return static_cast<int>(joints.cols()); }
  int num_samples() const { return static_cast<int>(joints.rows()); }
  double phase(int i) const { return (times[i] - t0) / duration; }
  std::vector<double> phases() const;

  /// Strictly increasing times, positive duration, phases within [0,1].
  void validate() const;
};

/// Gaussian over stacked weights (DoF-major blocks w_1..w_D, each of
/// length K) plus isotropic-in-time observation noise on joint positions.
struct ProMP {
  BasisConfig basis;
  int dofs = 1;
  Eigen::VectorXd mu_w;
  Eigen::MatrixXd Sigma_w;
  Eigen::MatrixXd Sigma_y;

  int num_features() const { return basis.num_features(); }
  int weight_dim() const { return num_features() * dofs; }

  /// Zero mean, identity weight covariance and identity noise.
  static ProMP initial(const BasisConfig& basis, int dofs);

  void validate() const;
};

/// Sufficient statistics of one demonstration under a basis:
/// G = sum phi phi^T (K x K), B = sum phi y^T (K x D), Y2 = sum y y^T.
/// All D joints are observed at every sample, so sum Phi^T W Phi equals
/// kron(W, G) for any D x D weighting W.
///
/// Y2 - B^T W - W^T B + W^T G W cancels badly when the noise is small, so
/// the residual scatter is kept around the least-squares fit W_ref = G^+ B:
/// residual(W) = R + (W - W_ref)^T G (W - W_ref), R summed sample by sample.
struct DemoStats {
  Eigen::MatrixXd G;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Y2;
  Eigen::MatrixXd W_ref;  // K x D
  Eigen::MatrixXd R;      // D x D
  int count = 0;

  static DemoStats compute(const BasisConfig& basis, const Demonstration& demo);
  static DemoStats empty(int num_features, int dofs);

  /// sum_t (y_t - W^T phi_t)(y_t - W^T phi_t)^T for a K x D weight matrix.
  Eigen::MatrixXd residual(const Eigen::MatrixXd& W) const;
};

/// kron(W, G): block (d,e) equals W(d,e) * G.
Eigen::MatrixXd kron_blocks(const Eigen::MatrixXd& W, const Eigen::MatrixXd& G);

/// Joint-space marginal at phase z. order 0 adds Sigma_y; velocity and
/// acceleration marginals (phase derivatives) carry no observation noise.
GaussianState marginal_at(const ProMP& p, double z, int order = 0);

/// Phi(z) mu_w for every phase, one row per phase.
Eigen::MatrixXd mean_trajectory(const ProMP& p, std::span<const double> phases, int order = 0);

Eigen::VectorXd sample_weights(const ProMP& p, std::uint64_t seed);

/// One weight draw rendered at `phases` with additive N(0, Sigma_y) noise.
Eigen::MatrixXd sample_trajectory(const ProMP& p, std::span<const double> phases,
                                  std::uint64_t seed);

/// log prod_n int N(w; mu_w, Sigma_w) prod_t N(y_nt; Phi_nt w, Sigma_y) dw.
/// Works from the factor of Sigma_w, so a singular weight covariance is
/// fine; Sigma_y must be positive definite.
double log_marginal_likelihood(const ProMP& p, std::span<const Demonstration> demos);

double log_marginal_likelihood(const ProMP& p, std::span<const DemoStats> stats);

}  // namespace promp
