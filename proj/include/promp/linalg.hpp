#pragma once

#include <string>

#include <Eigen/Dense>

namespace promp::linalg {

/// Cholesky factor of a symmetric positive definite matrix. On failure a
/// jitter of 1e-10 * trace / dim is added to the diagonal once; if that
/// fails too a NumericalError is thrown naming `what`.
struct SpdFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt.solve(rhs); }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt.solve(rhs); }
  Eigen::MatrixXd inverse() const;
  double log_det() const;
};

SpdFactor factor_spd(const Eigen::MatrixXd& m, const std::string& what);

/// Square root L with L * L^T == m for a symmetric positive semi-definite
/// matrix. Rank-deficient input is allowed; an eigenvalue below
/// -1e-9 * max|eigenvalue| is reported as a NumericalError.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const std::string& what);

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m);

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol = 1e-9);

/// log N(x; mean, cov)
double log_normal_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                      const Eigen::MatrixXd& cov);

std::string describe(const Eigen::MatrixXd& m);

}  // namespace promp::linalg
