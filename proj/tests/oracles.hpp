#pragma once

// Independent reference computations for the tests. Everything here works on
// dense, explicitly stacked matrices and avoids the library's own shortcuts.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "promp/basis.hpp"
#include "promp/model.hpp"

namespace oracle {

inline Eigen::VectorXd central_diff(const std::function<Eigen::VectorXd(double)>& f, double x,
                                    double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Eigen::MatrixXd central_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    Eigen::VectorXd a = x, b = x;
    a[j] += h;
    b[j] -= h;
    J.col(j) = (f(a) - f(b)) / (2.0 * h);
  }
  return J;
}

// RBF and polynomial features written out from the definition.
inline Eigen::VectorXd features(const promp::BasisConfig& cfg, double z) {
  std::vector<double> v;
  for (int p = 0; p <= cfg.poly_degree; ++p) v.push_back(std::pow(z, p));
  for (double c : cfg.rbf_centers)
    v.push_back(std::exp(-(z - c) * (z - c) / (2.0 * cfg.rbf_width * cfg.rbf_width)));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// D x KD matrix with phi^T on the block diagonal.
inline Eigen::MatrixXd phi_row(const promp::BasisConfig& cfg, double z, int dofs) {
  const Eigen::VectorXd f = oracle::features(cfg, z);
  const int k = static_cast<int>(f.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dofs, k * dofs);
  for (int d = 0; d < dofs; ++d) m.block(d, d * k, 1, k) = f.transpose();
  return m;
}

// All samples of one demo stacked: (T*D) x KD, sample-major.
inline Eigen::MatrixXd stacked_phi(const promp::BasisConfig& cfg, const promp::Demonstration& d) {
  const int D = d.dofs();
  const int T = d.num_samples();
  const int k = cfg.num_features();
  Eigen::MatrixXd m(T * D, k * D);
  for (int t = 0; t < T; ++t) m.middleRows(t * D, D) = phi_row(cfg, d.phase(t), D);
  return m;
}

inline Eigen::VectorXd stacked_y(const promp::Demonstration& d) {
  Eigen::VectorXd y(d.num_samples() * d.dofs());
  for (int t = 0; t < d.num_samples(); ++t) y.segment(t * d.dofs(), d.dofs()) = d.joints.row(t).transpose();
  return y;
}

inline Eigen::MatrixXd block_noise(const Eigen::MatrixXd& sigma_y, int samples) {
  const int D = static_cast<int>(sigma_y.rows());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(samples * D, samples * D);
  for (int t = 0; t < samples; ++t) m.block(t * D, t * D, D, D) = sigma_y;
  return m;
}

inline double log_normal(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& S) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  const Eigen::VectorXd r = x - mu;
  double logdet = 0.0;
  for (int i = 0; i < ldlt.vectorD().size(); ++i) logdet += std::log(ldlt.vectorD()[i]);
  return -0.5 * (r.dot(ldlt.solve(r)) + logdet + x.size() * std::log(2.0 * std::numbers::pi));
}

// Marginal likelihood by integrating out w in closed form on the full
// (T*D)-dimensional observation vector.
inline double log_likelihood(const promp::ProMP& p, const std::vector<promp::Demonstration>& demos) {
  double ll = 0.0;
  for (const auto& d : demos) {
    const Eigen::MatrixXd phi = stacked_phi(p.basis, d);
    const Eigen::MatrixXd S = phi * p.Sigma_w * phi.transpose() + block_noise(p.Sigma_y, d.num_samples());
    ll += log_normal(stacked_y(d), phi * p.mu_w, S);
  }
  return ll;
}

// Posterior over w from the joint Gaussian of (w, y) via the Schur complement.
inline promp::GaussianState posterior(const promp::ProMP& p, const promp::Demonstration& d) {
  const Eigen::MatrixXd phi = stacked_phi(p.basis, d);
  const Eigen::MatrixXd Syy = phi * p.Sigma_w * phi.transpose() + block_noise(p.Sigma_y, d.num_samples());
  const Eigen::MatrixXd Swy = p.Sigma_w * phi.transpose();
  const Eigen::MatrixXd gain = Syy.ldlt().solve(Swy.transpose()).transpose();
  return {p.mu_w + gain * (stacked_y(d) - phi * p.mu_w), p.Sigma_w - gain * Swy.transpose()};
}

// Weight posterior given y_z ~ N(target) where y_z = Phi w + eps, averaged
// over the target (mixture of exact posteriors).
inline promp::GaussianState condition(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                                      const Eigen::MatrixXd& phi, const Eigen::MatrixXd& noise,
                                      const Eigen::VectorXd& target, const Eigen::MatrixXd& target_cov) {
  const Eigen::MatrixXd Cyy = phi * Sigma * phi.transpose() + noise;
  const Eigen::MatrixXd Cwy = Sigma * phi.transpose();
  const Eigen::MatrixXd Cinv = Cyy.inverse();
  return {mu + Cwy * Cinv * (target - phi * mu),
          Sigma - Cwy * Cinv * Cwy.transpose() + Cwy * Cinv * target_cov * Cinv * Cwy.transpose()};
}

// Gauss-Hermite nodes and weights for int exp(-x^2) f(x) dx (Golub-Welsch).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Eigen::VectorXd w = es.eigenvectors().row(0).transpose().array().square() * std::sqrt(std::numbers::pi);
  return {es.eigenvalues(), w};
}

// int N(x; a) N(x; b) dx by tensor Gauss-Hermite quadrature. The nodes
// follow N(m, 2C) where (m, C) is the shape of the product, so the weighted
// integrand stays smooth however the two covariances are oriented.
inline double overlap_quadrature(const promp::GaussianState& a, const promp::GaussianState& b,
                                 int nodes) {
  const int n = a.dim();
  const Eigen::MatrixXd Pa = a.cov.inverse(), Pb = b.cov.inverse();
  const Eigen::MatrixXd C = (Pa + Pb).inverse();
  const Eigen::VectorXd m = C * (Pa * a.mean + Pb * b.mean);
  const Eigen::MatrixXd S = 2.0 * C;
  const Eigen::MatrixXd L = S.llt().matrixL();
  const auto [x, w] = gauss_hermite(nodes);
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  double sum = 0.0;
  for (;;) {
    Eigen::VectorXd u(n);
    double weight = 1.0;
    for (int d = 0; d < n; ++d) {
      u[d] = x[idx[static_cast<std::size_t>(d)]];
      weight *= w[idx[static_cast<std::size_t>(d)]];
    }
    const Eigen::VectorXd p = m + std::sqrt(2.0) * L * u;
    sum += weight * std::exp(log_normal(p, a.mean, a.cov) + log_normal(p, b.mean, b.cov) - log_normal(p, m, S));
    int d = 0;
    while (d < n && ++idx[static_cast<std::size_t>(d)] == nodes) idx[static_cast<std::size_t>(d++)] = 0;
    if (d == n) break;
  }
  return sum / std::pow(std::numbers::pi, 0.5 * n);
}

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double floor = 0.1) {
  std::normal_distribution<double> N;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = N(rng);
  return A * A.transpose() / n + floor * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = N(rng);
  return v;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double s = std::max(b.norm(), 1e-300);
  return (a - b).norm() / s;
}

// Demos drawn from a ProMP on an even phase grid (own sampler).
inline std::vector<promp::Demonstration> draw_demos(const promp::ProMP& p, int n, int samples,
                                                    std::mt19937_64& rng) {
  Eigen::LLT<Eigen::MatrixXd> lw(p.Sigma_w), ly(p.Sigma_y);
  std::vector<promp::Demonstration> out;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd w = p.mu_w + lw.matrixL() * random_vector(p.weight_dim(), rng);
    std::vector<double> t;
    Eigen::MatrixXd q(samples, p.dofs);
    for (int s = 0; s < samples; ++s) {
      const double z = static_cast<double>(s) / (samples - 1);
      t.push_back(z);
      q.row(s) = (phi_row(p.basis, z, p.dofs) * w + ly.matrixL() * random_vector(p.dofs, rng)).transpose();
    }
    out.push_back(promp::Demonstration::from_samples(t, q));
  }
  return out;
}

}  // namespace oracle
