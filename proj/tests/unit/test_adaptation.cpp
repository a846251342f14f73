#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "promp/adaptation.hpp"
#include "promp/errors.hpp"

using namespace promp;

namespace {

ProMP random_promp(int dofs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ProMP p;
  p.basis = BasisConfig::standard();
  p.dofs = dofs;
  p.mu_w = oracle::random_vector(p.weight_dim(), rng, 0.5);
  p.Sigma_w = oracle::random_spd(p.weight_dim(), rng, 0.05) * 0.05;
  p.Sigma_y = oracle::random_spd(dofs, rng, 0.1) * 1e-3;
  return p;
}

}  // namespace

TEST_SUITE("adaptation") {
  TEST_CASE("point and Gaussian conditioning match the joint-Gaussian oracle") {
    const ProMP p = random_promp(2, 1);
    std::mt19937_64 rng(2);
    for (int order : {0, 1, 2}) {
      const double z = 0.37;
      const Eigen::MatrixXd phi = block_feature_matrix(p.basis, z, 2, order);
      const Eigen::VectorXd v = oracle::random_vector(2, rng);
      const Eigen::MatrixXd C = oracle::random_spd(2, rng) * 0.01;
      const ProMP a = condition_point(p, z, v, order);
      const auto want = oracle::condition(p.mu_w, p.Sigma_w, phi, p.Sigma_y, v, Eigen::MatrixXd::Zero(2, 2));
      CHECK(oracle::rel_err(a.mu_w, want.mean) < 1e-9);
      CHECK(oracle::rel_err(a.Sigma_w, want.cov) < 1e-8);
      const ProMP b = condition_gaussian(p, z, {v, C}, order);
      const auto wantb = oracle::condition(p.mu_w, p.Sigma_w, phi, p.Sigma_y, v, C);
      CHECK(oracle::rel_err(b.mu_w, wantb.mean) < 1e-9);
      CHECK(oracle::rel_err(b.Sigma_w, wantb.cov) < 1e-8);
    }
  }

  TEST_CASE("tiny target covariance reduces to point conditioning") {
    const ProMP p = random_promp(3, 3);
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(3, 0.2);
    const ProMP a = condition_point(p, 0.8, v);
    const ProMP b = condition_gaussian(p, 0.8, {v, Eigen::MatrixXd::Identity(3, 3) * 1e-12});
    CHECK((a.mu_w - b.mu_w).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.Sigma_w - b.Sigma_w).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("conditioned mean passes near the via point and shrinks variance there") {
    ProMP p = random_promp(2, 4);
    p.Sigma_y *= 1e-3;
    const Eigen::Vector2d v(0.4, -0.3);
    const ProMP a = condition(p, {0.5, 0, v, std::nullopt});
    const auto m = marginal_at(a, 0.5);
    CHECK((m.mean - v).norm() < 1e-3);
    CHECK(m.cov.trace() < marginal_at(p, 0.5).cov.trace());
    // The input model is untouched.
    CHECK((p.mu_w - random_promp(2, 4).mu_w).norm() == 0.0);
  }

  TEST_CASE("task distribution through linear kinematics") {
    const ProMP p = random_promp(3, 5);
    std::mt19937_64 rng(6);
    Eigen::MatrixXd A(2, 3);
    A << 1, 2, 0, -1, 0.5, 3;
    const Eigen::Vector2d c(0.1, 0.2);
    const LinearKinematics fk(A, c);
    const auto t = task_distribution(p, 0.2, fk);
    const Eigen::MatrixXd phi = oracle::phi_row(p.basis, 0.2, 3);
    CHECK(oracle::rel_err(t.mean, A * phi * p.mu_w + c) < 1e-13);
    CHECK(oracle::rel_err(t.cov, A * phi * p.Sigma_w * phi.transpose() * A.transpose()) < 1e-12);
  }

  TEST_CASE("Laplace conditioning is exact for linear kinematics") {
    const ProMP p = random_promp(3, 7);
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd A = oracle::random_spd(3, rng).topRows(2);
    const Eigen::Vector2d c(0.3, -0.1);
    const LinearKinematics fk(A, c);
    const double z = 0.6;
    const GaussianState target{oracle::random_vector(2, rng), oracle::random_spd(2, rng) * 1e-2};
    const auto [got, rep] = condition_task(p, {z, target}, fk);

    // p(y | x) for y ~ marginal, x = A y + c + noise(target.cov), then the
    // mixture of weight posteriors over it.
    const auto m = marginal_at(p, z);
    const Eigen::MatrixXd Sxx = A * m.cov * A.transpose() + target.cov;
    const Eigen::MatrixXd gy = m.cov * A.transpose() * Sxx.inverse();
    const Eigen::VectorXd my = m.mean + gy * (target.mean - A * m.mean - c);
    const Eigen::MatrixXd Sy = m.cov - gy * A * m.cov;
    const Eigen::MatrixXd phi = oracle::phi_row(p.basis, z, 3);
    const auto want = oracle::condition(p.mu_w, p.Sigma_w, phi, p.Sigma_y, my, Sy);
    CHECK(oracle::rel_err(rep.joint_posterior.mean, my) < 1e-9);
    CHECK(oracle::rel_err(rep.joint_posterior.cov, Sy) < 1e-8);
    CHECK((got.mu_w - want.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((got.Sigma_w - want.cov).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("planar arm reaches a nearby target") {
    ProMP p = random_promp(3, 9);
    p.mu_w *= 0.3;
    const PlanarArm arm({0.5, 0.4, 0.3});
    const auto prior = task_distribution(p, 0.5, arm);
    const Eigen::Vector2d target = prior.mean + Eigen::Vector2d(0.05, -0.04);
    const auto [a, rep] = condition_task(p, {0.5, {target, Eigen::Matrix2d::Identity() * 1e-6}}, arm);
    const Eigen::VectorXd y = block_feature_matrix(a.basis, 0.5, 3) * a.mu_w;
    CHECK((arm.evaluate(y) - target).norm() < 1e-2);
    CHECK(rep.relative_grad_norm < 1e-8);
  }

  TEST_CASE("shape errors") {
    const ProMP p = random_promp(2, 10);
    CHECK_THROWS_AS(condition_point(p, 0.5, Eigen::VectorXd::Zero(3)), InputError);
    CHECK_THROWS_AS(condition_point(p, 0.5, Eigen::VectorXd::Zero(2), 3), InputError);
    const PlanarArm arm({1.0, 1.0, 1.0});
    CHECK_THROWS_AS(task_distribution(p, 0.5, arm), InputError);
    const PlanarArm arm2({1.0, 1.0});
    CHECK_THROWS_AS(condition_task(p, {0.5, {Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()}}, arm2),
                    InputError);
    CHECK_THROWS_AS(condition_task(p, {0.5, {Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero()}}, arm2),
                    InputError);
  }

  TEST_CASE("non-convergence keeps the best iterate") {
    const ProMP p = random_promp(2, 11);
    const PlanarArm arm({1.0, 1.0});
    LaplaceOptions o;
    o.max_iter = 1;
    o.grad_tol = 1e-300;
    try {
      condition_task(p, {0.5, {Eigen::Vector2d(0.3, 1.5), Eigen::Matrix2d::Identity() * 1e-6}}, arm, o);
      FAIL("expected AdaptationError");
    } catch (const AdaptationError& e) {
      CHECK(e.best_iterate().size() == 2);
      CHECK(e.grad_norm() > 0.0);
    }
  }
}
