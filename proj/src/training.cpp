#include "promp/training.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "promp/errors.hpp"
#include "promp/linalg.hpp"

namespace promp {

NIWPrior NIWPrior::standard(int weight_dim) {
  NIWPrior p;
  p.k0 = 0.0;
  p.v0 = weight_dim + 1.0;
  return p;
}

NIWPrior NIWPrior::maximum_likelihood(int weight_dim) {
  NIWPrior p;
  p.mle = true;
  p.k0 = 0.0;
  p.v0 = -(weight_dim + 1.0);
  p.S0 = Eigen::MatrixXd::Zero(weight_dim, weight_dim);
  return p;
}

void NIWPrior::validate(int weight_dim) const {
  if (!(k0 >= 0.0)) throw InputError("k0 must be >= 0");
  if (m0 && m0->size() != weight_dim) throw InputError("m0 must have length K*D");
  if (mle) return;
  if (!std::isfinite(v0)) throw InputError("v0 must be finite");
  if (n0(weight_dim) < 0.0) throw InputError("v0 + KD + 1 must be >= 0");
  if (S0) {
    if (S0->rows() != weight_dim || S0->cols() != weight_dim)
      throw InputError("S0 must be KD x KD");
    if (!linalg::is_symmetric(*S0)) throw InputError("S0 must be symmetric");
  }
}

Eigen::MatrixXd blockdiag(const Eigen::MatrixXd& m, int block_size) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (Eigen::Index b = 0; b + block_size <= m.rows(); b += block_size)
    out.block(b, b, block_size, block_size) = m.block(b, b, block_size, block_size);
  return out;
}

double log_iw_kernel(const Eigen::MatrixXd& sigma, double v0, const Eigen::MatrixXd& s0) {
  const auto f = linalg::factor_spd(sigma, "Sigma_w");
  const double p = static_cast<double>(sigma.rows());
  return -0.5 * (v0 + p + 1.0) * f.log_det() - 0.5 * f.solve(s0).trace();
}

namespace {

enum class EStepKind { Full, PointEstimate };

/// Weight prior for one E-step pass: square-root form (Sigma_w = L L^T) or,
/// for a user-supplied starting precision, information form.
struct WeightPrior {
  Eigen::VectorXd mu;
  Eigen::MatrixXd L;
  std::optional<Eigen::MatrixXd> precision;
};

struct EStepResult {
  std::vector<GaussianState> posteriors;
  double log_likelihood = 0.0;
  double max_jitter = 0.0;
};

EStepResult run_e_step(const WeightPrior& prior, const Eigen::MatrixXd& sigma_y,
                       std::span<const DemoStats> stats, int k, int dofs) {
  const int n = k * dofs;
  const auto noise = linalg::factor_spd(sigma_y, "Sigma_y");
  const Eigen::MatrixXd noise_inv = noise.inverse();
  const double noise_logdet = noise.log_det();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const Eigen::Map<const Eigen::MatrixXd> mean(prior.mu.data(), k, dofs);

  EStepResult out;
  out.max_jitter = noise.jitter;
  out.posteriors.reserve(stats.size());
  // Demos recorded on the same phase grid share G, and with it everything
  // but the mean and the likelihood residual.
  const Eigen::MatrixXd* cached_g = nullptr;
  Eigen::MatrixXd cov, X;
  double m_logdet = 0.0;
  for (const auto& s : stats) {
    GaussianState post;
    const Eigen::MatrixXd c_mat = (s.B - s.G * mean) * noise_inv;
    const Eigen::Map<const Eigen::VectorXd> c(c_mat.data(), n);
    const bool reuse = cached_g && cached_g->rows() == s.G.rows() && *cached_g == s.G;

    if (prior.precision) {
      if (!reuse) {
        const auto pf =
            linalg::factor_spd(*prior.precision + kron_blocks(noise_inv, s.G), "posterior precision");
        out.max_jitter = std::max(out.max_jitter, pf.jitter);
        cov = pf.inverse();
        cached_g = &s.G;
      }
      post.cov = cov;
      post.mean = prior.mu + post.cov * c;
    } else {
      if (!reuse) {
        const Eigen::MatrixXd& L = prior.L;
        Eigen::MatrixXd M = L.transpose() * kron_blocks(noise_inv, s.G) * L;
        M.diagonal().array() += 1.0;
        const auto mf = linalg::factor_spd(linalg::symmetrize(M), "I + L^T A L");
        out.max_jitter = std::max(out.max_jitter, mf.jitter);
        // S = L M^-1 L^T = X^T X with X = chol(M)^-1 L^T.
        X = mf.llt.matrixL().solve(L.transpose());
        cov.noalias() = X.transpose() * X;
        m_logdet = mf.log_det();
        cached_g = &s.G;
      }
      post.cov = cov;
      post.mean = prior.mu + post.cov * c;

      if (s.count > 0) {
        const Eigen::MatrixXd R2 = s.residual(mean);
        const Eigen::VectorXd xc = X * c;
        out.log_likelihood += -0.5 * (s.count * dofs * log2pi + s.count * noise_logdet +
                                      m_logdet + (noise_inv * R2).trace() - xc.squaredNorm());
      }
    }
    out.posteriors.push_back(std::move(post));
  }
  return out;
}

double prior_log_density(const ProMP& p, const NIWPrior& prior, const Eigen::MatrixXd& s0) {
  if (prior.mle) return 0.0;
  double lp = log_iw_kernel(p.Sigma_w, prior.v0, s0);
  if (prior.k0 > 0.0) {
    const Eigen::VectorXd m0 =
        prior.m0.value_or(Eigen::VectorXd::Zero(p.weight_dim()));
    const auto f = linalg::factor_spd(p.Sigma_w / prior.k0, "Sigma_w / k0");
    const Eigen::VectorXd r = p.mu_w - m0;
    lp += -0.5 * (f.log_det() + r.dot(f.solve(r)));
  }
  return lp;
}

struct MStepResult {
  ProMP params;
  Eigen::MatrixXd s0;
};

MStepResult run_m_step(const ProMP& current, const std::vector<GaussianState>& posts,
                       std::span<const DemoStats> stats, const NIWPrior& prior,
                       const TrainOptions& opts, EStepKind kind) {
  const int k = current.num_features();
  const int dofs = current.dofs;
  const int n = k * dofs;
  const double count = static_cast<double>(posts.size());
  const bool full = kind == EStepKind::Full;

  Eigen::VectorXd mu_mle = Eigen::VectorXd::Zero(n);
  for (const auto& g : posts) mu_mle += g.mean;
  mu_mle /= count;

  MStepResult out;
  ProMP& p = out.params;
  p.basis = current.basis;
  p.dofs = dofs;
  if (prior.k0 > 0.0) {
    const Eigen::VectorXd m0 = prior.m0.value_or(Eigen::VectorXd::Zero(n));
    p.mu_w = (prior.k0 * m0 + count * mu_mle) / (count + prior.k0);
  } else {
    p.mu_w = mu_mle;
  }

  Eigen::MatrixXd sigma_mle = Eigen::MatrixXd::Zero(n, n);
  for (const auto& g : posts) {
    const Eigen::VectorXd d = g.mean - p.mu_w;
    if (full) sigma_mle += g.cov;
    sigma_mle.noalias() += d * d.transpose();
  }
  sigma_mle /= count;

  if (prior.mle) {
    p.Sigma_w = sigma_mle;
    out.s0 = Eigen::MatrixXd::Zero(n, n);
  } else {
    out.s0 = prior.S0 ? *prior.S0 : prior.n0(n) * blockdiag(sigma_mle, k);
    p.Sigma_w = (out.s0 + count * sigma_mle) / (count + prior.n0(n));
  }
  if (opts.blockdiag_sigma) p.Sigma_w = blockdiag(p.Sigma_w, k);
  p.Sigma_w = linalg::symmetrize(p.Sigma_w);

  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(dofs, dofs);
  double samples = 0.0;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const auto& s = stats[i];
    if (s.count == 0) continue;
    samples += s.count;
    const Eigen::Map<const Eigen::MatrixXd> w(posts[i].mean.data(), k, dofs);
    noise += s.residual(w);
    if (full) {
      const Eigen::MatrixXd& S = posts[i].cov;
      for (int a = 0; a < dofs; ++a)
        for (int b = 0; b < dofs; ++b)
          noise(a, b) += S.block(a * k, b * k, k, k).cwiseProduct(s.G).sum();
    }
  }
  if (samples == 0.0) throw InputError("demonstrations contain no samples");
  noise /= samples;
  if (opts.diagonal_noise) noise = Eigen::MatrixXd(noise.diagonal().asDiagonal());
  p.Sigma_y = linalg::symmetrize(noise);
  return out;
}

std::vector<DemoStats> prepare(std::span<const Demonstration> demos, const BasisConfig& basis,
                               int dofs) {
  if (demos.empty()) throw InputError("training needs at least one demonstration");
  basis.validate();
  if (dofs < 1) throw InputError("number of degrees of freedom must be >= 1");
  std::vector<DemoStats> stats;
  stats.reserve(demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const auto& d = demos[i];
    if (d.dofs() != dofs)
      throw DimensionError("demonstration " + std::to_string(i) + " has " +
                           std::to_string(d.dofs()) + " joints, expected " +
                           std::to_string(dofs));
    d.validate();
    stats.push_back(DemoStats::compute(basis, d));
  }
  return stats;
}

int numerical_rank(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(linalg::symmetrize(m),
                                                    Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
  const double tol = ev.maxCoeff() * static_cast<double>(m.rows()) *
                     std::numeric_limits<double>::epsilon();
  return static_cast<int>((ev.array() > tol).count());
}

std::pair<ProMP, TrainReport> run_em(std::span<const Demonstration> demos,
                                     const BasisConfig& basis, int dofs, const NIWPrior& prior,
                                     const TrainOptions& opts, EStepKind kind) {
  const auto stats = prepare(demos, basis, dofs);
  const int k = basis.num_features();
  const int n = k * dofs;
  prior.validate(n);
  if (opts.max_iter < 1) throw InputError("max_iter must be >= 1");
  if (!(opts.tol >= 0.0)) throw InputError("tol must be >= 0");

  ProMP theta = ProMP::initial(basis, dofs);
  std::optional<Eigen::MatrixXd> start_precision;
  if (opts.init) {
    theta.mu_w = opts.init->mu_w;
    theta.Sigma_y = opts.init->Sigma_y;
    if (opts.init->weight_precision) {
      start_precision = opts.init->weight_precision;
      theta.Sigma_w = Eigen::MatrixXd::Zero(n, n);
    } else {
      theta.Sigma_w = opts.init->Sigma_w;
    }
    if (theta.mu_w.size() != n || theta.Sigma_y.rows() != dofs ||
        (!start_precision && theta.Sigma_w.rows() != n) ||
        (start_precision && start_precision->rows() != n))
      throw InputError("initial parameters do not match K*D");
  }

  TrainReport report;
  std::optional<Eigen::MatrixXd> s0_of_theta;
  std::vector<GaussianState> posts;

  for (int it = 0;; ++it) {
    WeightPrior wp{theta.mu_w, {}, {}};
    const bool precision_pass = it == 0 && start_precision.has_value();
    if (precision_pass) {
      wp.precision = start_precision;
    } else {
      wp.L = linalg::psd_sqrt(theta.Sigma_w, "Sigma_w");
    }
    EStepResult es = run_e_step(wp, theta.Sigma_y, stats, k, dofs);
    report.max_jitter = std::max(report.max_jitter, es.max_jitter);
    posts = std::move(es.posteriors);

    double objective = es.log_likelihood;
    if (precision_pass) {
      // Only a proper start has a likelihood.
      objective = -std::numeric_limits<double>::infinity();
      Eigen::LLT<Eigen::MatrixXd> llt(*start_precision);
      if (llt.info() == Eigen::Success) {
        ProMP start = theta;
        start.Sigma_w = llt.solve(Eigen::MatrixXd::Identity(n, n));
        objective = log_marginal_likelihood(start, stats);
      }
    }
    if (!prior.mle && std::isfinite(objective)) {
      if (!s0_of_theta) {
        // Starting point: use the scale matrix the first M-step will see.
        s0_of_theta = run_m_step(theta, posts, stats, prior, opts, kind).s0;
      }
      objective += prior_log_density(theta, prior, *s0_of_theta);
    }

    if (!report.objective_trace.empty()) {
      const double prev = report.objective_trace.back();
      if (std::isfinite(prev) && objective < prev - 1e-8 * std::abs(prev)) {
        report.ascent_violated = true;
        report.warnings.push_back("objective decreased at iteration " + std::to_string(it) +
                                  ": " + std::to_string(prev) + " -> " +
                                  std::to_string(objective));
      }
    }
    report.objective_trace.push_back(objective);
    if (!std::isfinite(objective) && !precision_pass)
      throw NumericalError("objective became non-finite at iteration " + std::to_string(it));

    if (it >= 1) {
      const double prev = report.objective_trace[it - 1];
      const double rel = std::abs(objective - prev) / std::max(1.0, std::abs(prev));
      if (std::isfinite(prev) && rel < opts.tol && it >= std::min(opts.min_iter, opts.max_iter)) {
        report.converged = true;
        break;
      }
    }
    if (it == opts.max_iter) break;

    try {
      auto m = run_m_step(theta, posts, stats, prior, opts, kind);
      theta = std::move(m.params);
      s0_of_theta = std::move(m.s0);
    } catch (const NumericalError& e) {
      throw NumericalError("M-step " + std::to_string(it + 1) + ": " + e.what());
    }
    report.iterations = it + 1;
    if (!theta.Sigma_w.allFinite() || !theta.Sigma_y.allFinite())
      throw NumericalError("non-finite covariance after M-step " + std::to_string(it + 1));
  }

  report.per_demo_posteriors = std::move(posts);
  report.sigma_w_rank = numerical_rank(theta.Sigma_w);
  report.rank_deficient = report.sigma_w_rank < n;
  return {std::move(theta), std::move(report)};
}

}  // namespace

GaussianState e_step(const ProMP& p, const Demonstration& demo) {
  if (demo.dofs() != p.dofs && demo.num_samples() > 0)
    throw DimensionError("demonstration has " + std::to_string(demo.dofs()) +
                         " joints, model has " + std::to_string(p.dofs));
  DemoStats s;
  if (demo.num_samples() > 0) {
    s = DemoStats::compute(p.basis, demo);
  } else {
    s = DemoStats::empty(p.num_features(), p.dofs);
  }
  WeightPrior wp{p.mu_w, linalg::psd_sqrt(p.Sigma_w, "Sigma_w"), {}};
  auto r = run_e_step(wp, p.Sigma_y, std::span<const DemoStats>(&s, 1), p.num_features(),
                      p.dofs);
  return std::move(r.posteriors.front());
}

std::pair<ProMP, TrainReport> em_train(std::span<const Demonstration> demos,
                                       const BasisConfig& basis, int dofs, const NIWPrior& prior,
                                       const TrainOptions& opts) {
  return run_em(demos, basis, dofs, prior, opts, EStepKind::Full);
}

std::pair<ProMP, TrainReport> em_train_approx(std::span<const Demonstration> demos,
                                              const BasisConfig& basis, int dofs,
                                              const NIWPrior& prior,
                                              const TrainOptions& opts) {
  return run_em(demos, basis, dofs, prior, opts, EStepKind::PointEstimate);
}

std::pair<ProMP, TrainReport> least_squares_train(std::span<const Demonstration> demos,
                                                  const BasisConfig& basis, int dofs,
                                                  double lambda) {
  if (!(lambda >= 0.0)) throw InputError("ridge parameter must be >= 0");
  const auto stats = prepare(demos, basis, dofs);
  const int k = basis.num_features();
  const int n = k * dofs;
  const double count = static_cast<double>(demos.size());

  std::vector<Eigen::VectorXd> weights;
  weights.reserve(stats.size());
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(dofs, dofs);
  double samples = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto& s = stats[i];
    Eigen::MatrixXd gram = s.G;
    gram.diagonal().array() += lambda;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(es.eigenvalues().minCoeff() > top * k * std::numeric_limits<double>::epsilon()))
      throw NumericalError("ridge system of demonstration " + std::to_string(i) +
                           " is singular (" + std::to_string(s.count) + " samples, K=" +
                           std::to_string(k) + ", lambda=" + std::to_string(lambda) + ")");
    const Eigen::MatrixXd W = gram.ldlt().solve(s.B);  // K x D, column d = w_d
    weights.emplace_back(Eigen::Map<const Eigen::VectorXd>(W.data(), n));
    noise += s.residual(W);
    samples += s.count;
  }

  ProMP p;
  p.basis = basis;
  p.dofs = dofs;
  p.mu_w = Eigen::VectorXd::Zero(n);
  for (const auto& w : weights) p.mu_w += w;
  p.mu_w /= count;
  p.Sigma_w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& w : weights) {
    const Eigen::VectorXd d = w - p.mu_w;
    p.Sigma_w.noalias() += d * d.transpose();
  }
  p.Sigma_w /= count;
  p.Sigma_y = linalg::symmetrize(noise / samples);

  TrainReport report;
  report.iterations = 1;
  report.converged = true;
  report.sigma_w_rank = numerical_rank(p.Sigma_w);
  report.rank_deficient = report.sigma_w_rank < n;
  if (report.rank_deficient)
    report.warnings.push_back("weight covariance is rank deficient (rank " +
                              std::to_string(report.sigma_w_rank) + " of " + std::to_string(n) +
                              "); use more demonstrations than K*D");
  for (const auto& w : weights) report.per_demo_posteriors.push_back({w, Eigen::MatrixXd::Zero(n, n)});
  return {std::move(p), std::move(report)};
}

}  // namespace promp
