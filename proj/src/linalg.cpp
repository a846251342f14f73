#include "promp/linalg.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "promp/errors.hpp"

namespace promp::linalg {

Eigen::MatrixXd SpdFactor::inverse() const {
  const auto n = llt.matrixLLT().rows();
  return llt.solve(Eigen::MatrixXd::Identity(n, n));
}

double SpdFactor::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

SpdFactor factor_spd(const Eigen::MatrixXd& m, const std::string& what) {
  SpdFactor f;
  f.llt.compute(m);
  if (f.llt.info() == Eigen::Success) return f;

  const double n = static_cast<double>(m.rows());
  const double jitter = 1e-10 * std::abs(m.trace()) / n;
  if (jitter > 0.0) {
    Eigen::MatrixXd shifted = m;
    shifted.diagonal().array() += jitter;
    f.llt.compute(shifted);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jitter;
      return f;
    }
  }
  throw NumericalError("cholesky factorization of " + what + " failed: " + describe(m));
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  if (es.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of " + what + " failed: " + describe(m));
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  if (ev.minCoeff() < -1e-9 * scale)
    throw NumericalError(what + " is not positive semi-definite: " + describe(m));
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

double log_normal_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                      const Eigen::MatrixXd& cov) {
  const auto f = factor_spd(cov, "gaussian covariance");
  const Eigen::VectorXd r = x - mean;
  const double maha = r.dot(f.solve(r));
  const double n = static_cast<double>(x.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + f.log_det() + maha);
}

std::string describe(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  if (m.size() == 0) return os.str();
  os << ", trace=" << m.trace() << ", max|a_ij|=" << m.cwiseAbs().maxCoeff();
  if (m.rows() == m.cols() && m.allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
    if (es.info() == Eigen::Success)
      os << ", eig in [" << es.eigenvalues().minCoeff() << ", " << es.eigenvalues().maxCoeff()
         << "]";
  } else if (!m.allFinite()) {
    os << ", non-finite entries";
  }
  return os.str();
}

}  // namespace promp::linalg
