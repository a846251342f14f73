#include "promp/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "promp/errors.hpp"
#include "promp/linalg.hpp"

namespace promp {

void GaussianState::validate() const {
  if (cov.rows() != mean.size() || cov.cols() != mean.size())
    throw InputError("gaussian covariance must be " + std::to_string(mean.size()) + "x" +
                     std::to_string(mean.size()));
  if (!mean.allFinite() || !cov.allFinite()) throw InputError("gaussian has non-finite entries");
  if (!linalg::is_symmetric(cov)) throw InputError("gaussian covariance is not symmetric");
}

Demonstration Demonstration::from_samples(std::vector<double> times, Eigen::MatrixXd joints) {
  Demonstration d;
  if (!times.empty()) {
    d.t0 = times.front();
    d.duration = times.back() - times.front();
  }
  d.times = std::move(times);
  d.joints = std::move(joints);
  return d;
}

std::vector<double> Demonstration::phases() const {
  std::vector<double> z(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) z[i] = (times[i] - t0) / duration;
  return z;
}

void Demonstration::validate() const {
  if (static_cast<Eigen::Index>(times.size()) != joints.rows())
    throw InputError("demonstration has " + std::to_string(times.size()) + " timestamps but " +
                     std::to_string(joints.rows()) + " joint rows");
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw InputError("demonstration duration must be positive");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw TimeOrderError("timestamps not strictly increasing at sample " + std::to_string(i));
  constexpr double kSlack = 1e-9;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double z = (times[i] - t0) / duration;
    if (z < -kSlack || z > 1.0 + kSlack)
      throw InputError("sample " + std::to_string(i) + " has phase " + std::to_string(z) +
                       " outside [0,1]");
  }
  if (!joints.allFinite()) throw InputError("demonstration has non-finite joint values");
}

ProMP ProMP::initial(const BasisConfig& basis, int dofs) {
  ProMP p;
  p.basis = basis;
  p.dofs = dofs;
  const int n = basis.num_features() * dofs;
  p.mu_w = Eigen::VectorXd::Zero(n);
  p.Sigma_w = Eigen::MatrixXd::Identity(n, n);
  p.Sigma_y = Eigen::MatrixXd::Identity(dofs, dofs);
  return p;
}

void ProMP::validate() const {
  basis.validate();
  if (dofs < 1) throw InputError("ProMP needs at least one degree of freedom");
  const int n = weight_dim();
  if (mu_w.size() != n) throw InputError("mu_w must have length K*D = " + std::to_string(n));
  if (Sigma_w.rows() != n || Sigma_w.cols() != n)
    throw InputError("Sigma_w must be " + std::to_string(n) + "x" + std::to_string(n));
  if (Sigma_y.rows() != dofs || Sigma_y.cols() != dofs)
    throw InputError("Sigma_y must be " + std::to_string(dofs) + "x" + std::to_string(dofs));
  if (!mu_w.allFinite() || !Sigma_w.allFinite() || !Sigma_y.allFinite())
    throw InputError("ProMP parameters contain non-finite values");
  if (!linalg::is_symmetric(Sigma_w)) throw InputError("Sigma_w is not symmetric");
  if (!linalg::is_symmetric(Sigma_y)) throw InputError("Sigma_y is not symmetric");
}

DemoStats DemoStats::compute(const BasisConfig& basis, const Demonstration& demo) {
  const int k = basis.num_features();
  const int d = demo.dofs();
  DemoStats s;
  s.G = Eigen::MatrixXd::Zero(k, k);
  s.B = Eigen::MatrixXd::Zero(k, d);
  s.Y2 = Eigen::MatrixXd::Zero(d, d);
  s.count = demo.num_samples();
  for (int i = 0; i < demo.num_samples(); ++i) {
    const Eigen::VectorXd phi = features(basis, demo.phase(i));
    const Eigen::VectorXd y = demo.joints.row(i).transpose();
    s.G.noalias() += phi * phi.transpose();
    s.B.noalias() += phi * y.transpose();
    s.Y2.noalias() += y * y.transpose();
  }
  s.W_ref = s.G.completeOrthogonalDecomposition().solve(s.B);
  s.R = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < demo.num_samples(); ++i) {
    const Eigen::VectorXd r =
        demo.joints.row(i).transpose() - s.W_ref.transpose() * features(basis, demo.phase(i));
    s.R.noalias() += r * r.transpose();
  }
  return s;
}

DemoStats DemoStats::empty(int num_features, int dofs) {
  DemoStats s;
  s.G = Eigen::MatrixXd::Zero(num_features, num_features);
  s.B = Eigen::MatrixXd::Zero(num_features, dofs);
  s.Y2 = Eigen::MatrixXd::Zero(dofs, dofs);
  s.W_ref = Eigen::MatrixXd::Zero(num_features, dofs);
  s.R = Eigen::MatrixXd::Zero(dofs, dofs);
  return s;
}

Eigen::MatrixXd DemoStats::residual(const Eigen::MatrixXd& W) const {
  const Eigen::MatrixXd dw = W - W_ref;
  return R + dw.transpose() * G * dw;
}

Eigen::MatrixXd kron_blocks(const Eigen::MatrixXd& W, const Eigen::MatrixXd& G) {
  const auto d = W.rows();
  const auto k = G.rows();
  Eigen::MatrixXd out(d * k, d * k);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) out.block(a * k, b * k, k, k) = W(a, b) * G;
  return out;
}

GaussianState marginal_at(const ProMP& p, double z, int order) {
  const Eigen::MatrixXd phi = block_feature_matrix(p.basis, z, p.dofs, order);
  GaussianState g;
  g.mean = phi * p.mu_w;
  g.cov = phi * p.Sigma_w * phi.transpose();
  if (order == 0) g.cov += p.Sigma_y;
  g.cov = linalg::symmetrize(g.cov);
  return g;
}

Eigen::MatrixXd mean_trajectory(const ProMP& p, std::span<const double> phases, int order) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(phases.size()), p.dofs);
  for (std::size_t i = 0; i < phases.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) =
        (block_feature_matrix(p.basis, phases[i], p.dofs, order) * p.mu_w).transpose();
  return out;
}

namespace {

Eigen::VectorXd standard_normal(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

Eigen::VectorXd sample_weights(const ProMP& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd L = linalg::psd_sqrt(p.Sigma_w, "Sigma_w");
  return p.mu_w + L * standard_normal(rng, p.weight_dim());
}

Eigen::MatrixXd sample_trajectory(const ProMP& p, std::span<const double> phases,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd L = linalg::psd_sqrt(p.Sigma_w, "Sigma_w");
  const Eigen::MatrixXd Ly = linalg::psd_sqrt(p.Sigma_y, "Sigma_y");
  const Eigen::VectorXd w = p.mu_w + L * standard_normal(rng, p.weight_dim());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(phases.size()), p.dofs);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const Eigen::VectorXd y = block_feature_matrix(p.basis, phases[i], p.dofs) * w +
                              Ly * standard_normal(rng, p.dofs);
    out.row(static_cast<Eigen::Index>(i)) = y.transpose();
  }
  return out;
}

double log_marginal_likelihood(const ProMP& p, std::span<const Demonstration> demos) {
  if (demos.empty()) throw InputError("log likelihood needs at least one demonstration");
  std::vector<DemoStats> stats;
  stats.reserve(demos.size());
  for (const auto& d : demos) {
    if (d.dofs() != p.dofs)
      throw DimensionError("demonstration has " + std::to_string(d.dofs()) +
                           " joints, model has " + std::to_string(p.dofs));
    stats.push_back(DemoStats::compute(p.basis, d));
  }
  return log_marginal_likelihood(p, stats);
}

double log_marginal_likelihood(const ProMP& p, std::span<const DemoStats> stats) {
  const int k = p.num_features();
  const int dofs = p.dofs;
  const int n = p.weight_dim();
  const auto noise = linalg::factor_spd(p.Sigma_y, "Sigma_y");
  const Eigen::MatrixXd noise_inv = noise.inverse();
  const double noise_logdet = noise.log_det();
  const Eigen::MatrixXd L = linalg::psd_sqrt(p.Sigma_w, "Sigma_w");
  const Eigen::Map<const Eigen::MatrixXd> mean(p.mu_w.data(), k, dofs);
  const double log2pi = std::log(2.0 * std::numbers::pi);

  double total = 0.0;
  for (const auto& s : stats) {
    if (s.count == 0) continue;
    // Residual scatter sum r r^T with r = y - Phi mu.
    const Eigen::MatrixXd R2 = s.residual(mean);
    const double quad = (noise_inv * R2).trace();

    const Eigen::MatrixXd A = kron_blocks(noise_inv, s.G);
    Eigen::MatrixXd M = L.transpose() * A * L;
    M.diagonal().array() += 1.0;
    const auto mf = linalg::factor_spd(linalg::symmetrize(M), "I + L^T A L");
    const Eigen::MatrixXd c = (s.B - s.G * mean) * noise_inv;
    const Eigen::VectorXd u = L.transpose() * Eigen::Map<const Eigen::VectorXd>(c.data(), n);
    const double correction = u.dot(mf.solve(u));

    total += -0.5 * (s.count * dofs * log2pi + s.count * noise_logdet + mf.log_det() + quad -
                     correction);
  }
  return total;
}

}  // namespace promp
