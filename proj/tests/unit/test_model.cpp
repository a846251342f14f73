#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "promp/errors.hpp"
#include "promp/model.hpp"

using namespace promp;

namespace {

ProMP random_promp(int dofs, std::uint64_t seed, double noise = 0.05) {
  std::mt19937_64 rng(seed);
  ProMP p;
  p.basis = BasisConfig::standard();
  p.dofs = dofs;
  p.mu_w = oracle::random_vector(p.weight_dim(), rng);
  p.Sigma_w = oracle::random_spd(p.weight_dim(), rng, 0.05) * 0.2;
  p.Sigma_y = oracle::random_spd(dofs, rng, 0.1) * noise;
  return p;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("kron_blocks places W(d,e) * G") {
    Eigen::MatrixXd W(2, 2), G(2, 2);
    W << 1, 2, 3, 4;
    G << 5, 6, 7, 8;
    Eigen::MatrixXd want(4, 4);
    want << 5, 6, 10, 12, 7, 8, 14, 16, 15, 18, 20, 24, 21, 24, 28, 32;
    CHECK((kron_blocks(W, G) - want).norm() == 0.0);
  }

  TEST_CASE("sufficient statistics equal direct sums") {
    std::mt19937_64 rng(1);
    const ProMP p = random_promp(3, 2);
    const auto demos = oracle::draw_demos(p, 1, 30, rng);
    const auto s = DemoStats::compute(p.basis, demos[0]);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(5, 5), B = Eigen::MatrixXd::Zero(5, 3),
                    Y2 = Eigen::MatrixXd::Zero(3, 3);
    for (int t = 0; t < 30; ++t) {
      const Eigen::VectorXd f = oracle::features(p.basis, demos[0].phase(t));
      const Eigen::VectorXd y = demos[0].joints.row(t).transpose();
      G += f * f.transpose();
      B += f * y.transpose();
      Y2 += y * y.transpose();
    }
    CHECK(s.count == 30);
    CHECK(oracle::rel_err(s.G, G) < 1e-13);
    CHECK(oracle::rel_err(s.B, B) < 1e-13);
    CHECK(oracle::rel_err(s.Y2, Y2) < 1e-13);

    const Eigen::MatrixXd W = Eigen::MatrixXd::Random(5, 3);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(3, 3);
    for (int t = 0; t < 30; ++t) {
      const Eigen::VectorXd r = demos[0].joints.row(t).transpose() - W.transpose() * oracle::features(p.basis, demos[0].phase(t));
      R += r * r.transpose();
    }
    CHECK(oracle::rel_err(s.residual(W), R) < 1e-12);
  }

  TEST_CASE("marginal matches dense push-forward") {
    const ProMP p = random_promp(2, 3);
    for (double z : {0.0, 0.4, 1.0}) {
      const Eigen::MatrixXd phi = oracle::phi_row(p.basis, z, 2);
      const auto m = marginal_at(p, z);
      CHECK(oracle::rel_err(m.mean, phi * p.mu_w) < 1e-13);
      CHECK(oracle::rel_err(m.cov, phi * p.Sigma_w * phi.transpose() + p.Sigma_y) < 1e-12);
      const auto v = marginal_at(p, z, 1);
      const Eigen::MatrixXd dphi = block_feature_matrix(p.basis, z, 2, 1);
      CHECK(oracle::rel_err(v.cov, dphi * p.Sigma_w * dphi.transpose()) < 1e-12);
    }
  }

  TEST_CASE("log marginal likelihood matches the dense Gaussian") {
    std::mt19937_64 rng(4);
    ProMP p = random_promp(2, 5);
    const auto demos = oracle::draw_demos(p, 4, 25, rng);
    const double want = oracle::log_likelihood(p, demos);
    CHECK(log_marginal_likelihood(p, demos) == doctest::Approx(want).epsilon(1e-10));

    // Rank-one weight covariance is still fine.
    const Eigen::VectorXd u = oracle::random_vector(p.weight_dim(), rng);
    p.Sigma_w = u * u.transpose();
    CHECK(log_marginal_likelihood(p, demos) ==
          doctest::Approx(oracle::log_likelihood(p, demos)).epsilon(1e-9));
  }

  TEST_CASE("sampled trajectories have the analytic moments") {
    const ProMP p = random_promp(2, 6, 0.02);
    const std::vector<double> z{0.25, 0.75};
    const int n = 20000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(4), sum2 = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < n; ++i) {
      const Eigen::MatrixXd y = sample_trajectory(p, z, 1000 + i);
      Eigen::VectorXd v(4);
      v << y(0, 0), y(0, 1), y(1, 0), y(1, 1);
      sum += v;
      sum2 += v.cwiseProduct(v);
    }
    const Eigen::VectorXd mean = sum / n;
    for (int j = 0; j < 2; ++j) {
      const auto m = marginal_at(p, z[static_cast<std::size_t>(j)]);
      for (int d = 0; d < 2; ++d) {
        const double sd = std::sqrt(m.cov(d, d));
        CHECK(std::abs(mean[2 * j + d] - m.mean[d]) < 4.0 * sd / std::sqrt(n));
        const double var = sum2[2 * j + d] / n - mean[2 * j + d] * mean[2 * j + d];
        // Var of the sample variance of a Gaussian is 2 sigma^4 / n.
        CHECK(std::abs(var - m.cov(d, d)) < 4.0 * std::sqrt(2.0 / n) * m.cov(d, d));
      }
    }
  }

  TEST_CASE("sampling is reproducible by seed") {
    const ProMP p = random_promp(1, 7);
    CHECK((sample_weights(p, 42) - sample_weights(p, 42)).norm() == 0.0);
    CHECK((sample_weights(p, 42) - sample_weights(p, 43)).norm() > 0.0);
  }

  TEST_CASE("demonstration validation") {
    Eigen::MatrixXd q(3, 1);
    q << 0, 1, 2;
    const auto d = Demonstration::from_samples({1.0, 1.5, 3.0}, q);
    CHECK(d.t0 == 1.0);
    CHECK(d.duration == 2.0);
    CHECK(d.phase(1) == doctest::Approx(0.25));
    CHECK_THROWS_AS(Demonstration::from_samples({0.0, 0.5, 0.5}, q).validate(), TimeOrderError);
    Demonstration bad{{0.0, 1.0, 2.0}, q, 0.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), InputError);
    ProMP p = ProMP::initial(BasisConfig::standard(), 2);
    p.Sigma_w(0, 1) = 1.0;
    CHECK_THROWS_AS(p.validate(), InputError);
  }
}
