#pragma once

#include <vector>

#include <Eigen/Dense>

namespace promp {

/// Feature map phi(z): a polynomial block (1, z, ..., z^degree) followed by
/// unnormalized Gaussian RBFs sharing one width.
struct BasisConfig {
  std::vector<double> rbf_centers;
  double rbf_width = 1.0;
  int poly_degree = 0;

  int num_features() const { return static_cast<int>(rbf_centers.size()) + poly_degree + 1; }

  /// Throws InputError when centers are unordered or outside [0,1], the
  /// width is not positive or the degree is negative.
  void validate() const;

  /// `num_rbf` centers equally spaced over [0,1] inclusive with width
  /// 1/num_rbf. A single RBF sits at 0.5.
  static BasisConfig make(int num_rbf, int poly_degree);

  /// Three RBFs and a linear polynomial, five features in total.
  static BasisConfig standard() { return make(3, 1); }

  bool operator==(const BasisConfig&) const = default;
};

Eigen::VectorXd features(const BasisConfig& cfg, double z);

/// d/dz (order 1) or d^2/dz^2 (order 2) of features(). The derivative is
/// with respect to phase; divide by T (or T^2) for wall-clock rates.
Eigen::VectorXd features_deriv(const BasisConfig& cfg, double z, int order);

/// D x KD block-diagonal matrix with the (differentiated) feature row once
/// per degree of freedom. order 0 is plain features.
Eigen::MatrixXd block_feature_matrix(const BasisConfig& cfg, double z, int dofs, int order = 0);

}  // namespace promp
