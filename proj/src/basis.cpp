#include "promp/basis.hpp"

#include <cmath>
#include <string>

#include "promp/errors.hpp"

namespace promp {

void BasisConfig::validate() const {
  if (poly_degree < 0) throw InputError("poly_degree must be >= 0");
  if (!(rbf_width > 0.0) || !std::isfinite(rbf_width))
    throw InputError("rbf_width must be a positive finite number");
  for (std::size_t i = 0; i < rbf_centers.size(); ++i) {
    const double c = rbf_centers[i];
    if (!(c >= 0.0 && c <= 1.0))
      throw InputError("rbf center " + std::to_string(i) + " outside [0,1]");
    if (i > 0 && !(c > rbf_centers[i - 1]))
      throw InputError("rbf centers must be strictly increasing");
  }
}

BasisConfig BasisConfig::make(int num_rbf, int poly_degree) {
  if (num_rbf < 0) throw InputError("number of RBFs must be >= 0");
  BasisConfig cfg;
  cfg.poly_degree = poly_degree;
  if (num_rbf == 1) {
    cfg.rbf_centers = {0.5};
  } else {
    for (int i = 0; i < num_rbf; ++i)
      cfg.rbf_centers.push_back(static_cast<double>(i) / (num_rbf - 1));
  }
  cfg.rbf_width = num_rbf > 0 ? 1.0 / num_rbf : 1.0;
  cfg.validate();
  return cfg;
}

namespace {

void check_phase(double z) {
  if (!std::isfinite(z)) throw InputError("phase must be finite");
}

}  // namespace

Eigen::VectorXd features(const BasisConfig& cfg, double z) { return features_deriv(cfg, z, 0); }

Eigen::VectorXd features_deriv(const BasisConfig& cfg, double z, int order) {
  check_phase(z);
  if (order < 0 || order > 2) throw InputError("feature derivative order must be 0, 1 or 2");

  Eigen::VectorXd out(cfg.num_features());
  int k = 0;
  for (int p = 0; p <= cfg.poly_degree; ++p, ++k) {
    double v = 0.0;
    if (order == 0) {
      v = std::pow(z, p);
    } else if (order == 1) {
      v = p >= 1 ? p * std::pow(z, p - 1) : 0.0;
    } else {
      v = p >= 2 ? p * (p - 1) * std::pow(z, p - 2) : 0.0;
    }
    out[k] = v;
  }

  const double h2 = cfg.rbf_width * cfg.rbf_width;
  for (double c : cfg.rbf_centers) {
    const double d = z - c;
    const double g = std::exp(-0.5 * d * d / h2);
    if (order == 0) {
      out[k++] = g;
    } else if (order == 1) {
      out[k++] = -d / h2 * g;
    } else {
      out[k++] = (d * d / (h2 * h2) - 1.0 / h2) * g;
    }
  }
  return out;
}

Eigen::MatrixXd block_feature_matrix(const BasisConfig& cfg, double z, int dofs, int order) {
  if (dofs < 1) throw InputError("number of degrees of freedom must be >= 1");
  const Eigen::VectorXd phi = features_deriv(cfg, z, order);
  const int k = static_cast<int>(phi.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dofs, static_cast<Eigen::Index>(k) * dofs);
  for (int d = 0; d < dofs; ++d) out.block(d, d * k, 1, k) = phi.transpose();
  return out;
}

}  // namespace promp
