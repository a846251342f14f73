#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "promp/model.hpp"
#include "promp/training.hpp"

namespace promp::experiments {

struct StudyRecord {
  double x = 0.0;
  std::vector<double> values;  // one per column
};

struct StudyResult {
  std::string name;
  std::string x_label;
  std::vector<std::string> columns;
  std::vector<StudyRecord> records;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;

  std::vector<double> xs() const;
  std::vector<double> column(const std::string& name) const;
  /// Comma-separated with a header row, or whitespace columns with a '#'
  /// header for gnuplot when `plot_data` is set.
  void write_csv(std::ostream& os, bool plot_data = false) const;
};

/// Largest over smallest singular value of a symmetric matrix; +inf when the
/// smallest is below dim * eps * largest.
double condition_number(const Eigen::MatrixXd& S);

/// Draws weights from a known ProMP and renders them on an even phase grid
/// with isotropic Gaussian noise.
struct Generator {
  ProMP truth;
  int samples = 100;
  double noise = 1e-3;

  std::vector<Demonstration> generate(int n, std::uint64_t seed) const;
};

/// Standard basis with `dofs` joints. Sigma_w = scale * kron(C, B), C a
/// random joint correlation matrix and B a smooth within-joint covariance,
/// plus `floor` * scale on the diagonal.
Generator correlated_generator(int dofs, std::uint64_t seed, double scale = 0.1,
                               double floor = 0.1);

/// Two base joints with independent weights; joints 3 and 4 are their sum
/// and difference.
Generator sum_difference_generator(std::uint64_t seed);

struct CondnumConfig {
  int n_max = 100;
  std::vector<double> lambdas{0.0, 0.1, 1.0};
  TrainOptions train;  // shared by MAP and MLE
  std::uint64_t seed = 1;
};

/// log kappa(Sigma_w) for MAP, MLE and least squares per lambda, trained on
/// the first N of one generated set for N = 1..n_max. Columns:
/// map, mle, ls_<lambda>...
StudyResult condnum_study(const Generator& gen, const CondnumConfig& cfg);

struct ConvergenceConfig {
  int n_max = 60;
  int replications = 16;  // errors averaged over independent data sets
  TrainOptions train;
  std::uint64_t seed = 2;
};

/// Frobenius errors of mu_w, of the joint-diagonal blocks of Sigma_w and of
/// the cross-joint blocks against the truth, each divided by its value at
/// N = 1. Columns: mean, blockdiag, offdiag.
StudyResult convergence_study(const Generator& gen, const ConvergenceConfig& cfg);

/// 5-point (or `width`) moving median, shrinking at the ends.
std::vector<double> moving_median(const std::vector<double>& v, int width = 5);

struct EmCurveConfig {
  int demos = 20;
  int dofs = 2;
  int samples = 100;
  double noise = 0.3;
  double missing = 0.5;  // fraction of each demo's phase range left unobserved
  int iterations = 30;
  std::uint64_t seed = 3;
};

/// Generated demos with a random contiguous gap and inflated noise.
std::vector<Demonstration> missing_data_demos(const EmCurveConfig& cfg);

/// Per-iteration log-likelihood of the exact and the point-estimate EM,
/// MLE mode, from mu_w = 0, Sigma_w = I, Sigma_y = I. Columns: exact, approx.
StudyResult em_curve_study(const EmCurveConfig& cfg);

struct LatencyConfig {
  std::vector<int> sizes{35, 70, 140, 210, 280, 350};  // KD with D = 7
  int reps = 1000;
  std::uint64_t seed = 4;
};

/// Wall-clock condition_point and condition_task times in milliseconds.
/// Columns: joint_mean, joint_std, task_mean, task_std.
StudyResult latency_bench(const LatencyConfig& cfg);

struct BootstrapResult {
  std::vector<double> rates;        // one per resample
  std::vector<int> histogram;       // sample_size + 1 bins, rate k / sample_size
  double mean = 0.0;
  double lower = 0.0;               // central 90% interval
  double upper = 0.0;
};

BootstrapResult bootstrap_rates(const std::vector<bool>& outcomes, int n_resamples = 5000,
                                int sample_size = 50, std::uint64_t seed = 5);

StudyResult bootstrap_study(const std::vector<bool>& outcomes, int n_resamples,
                            int sample_size, std::uint64_t seed);

}  // namespace promp::experiments
