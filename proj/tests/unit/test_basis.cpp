#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "promp/basis.hpp"
#include "promp/errors.hpp"

using namespace promp;

TEST_SUITE("basis") {
  TEST_CASE("make spaces centers over the unit interval") {
    const auto b = BasisConfig::make(5, 1);
    CHECK(b.num_features() == 7);
    REQUIRE(b.rbf_centers.size() == 5);
    CHECK(b.rbf_centers.front() == 0.0);
    CHECK(b.rbf_centers.back() == 1.0);
    CHECK(b.rbf_centers[2] == doctest::Approx(0.5));
    CHECK(b.rbf_width == doctest::Approx(0.2));
    CHECK(BasisConfig::make(1, 0).rbf_centers == std::vector<double>{0.5});
    CHECK(BasisConfig::standard().num_features() == 5);
  }

  TEST_CASE("features match the written-out definition") {
    const auto b = BasisConfig::make(4, 2);
    for (double z : {0.0, 0.13, 0.5, 0.99, 1.0, -0.2, 1.3}) {
      const Eigen::VectorXd got = features(b, z);
      const Eigen::VectorXd want = oracle::features(b, z);
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-15);
    }
  }

  TEST_CASE("derivatives agree with central differences") {
    const auto b = BasisConfig::make(6, 3);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double z = U(rng);
      const auto f0 = [&](double x) { return features(b, x); };
      const auto f1 = [&](double x) { return features_deriv(b, x, 1); };
      worst = std::max(worst, (features_deriv(b, z, 1) - oracle::central_diff(f0, z)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (features_deriv(b, z, 2) - oracle::central_diff(f1, z)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("block feature matrix repeats the row per joint") {
    const auto b = BasisConfig::standard();
    const Eigen::MatrixXd m = block_feature_matrix(b, 0.3, 3);
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 15);
    CHECK((m - oracle::phi_row(b, 0.3, 3)).norm() < 1e-15);
    const Eigen::MatrixXd d = block_feature_matrix(b, 0.3, 2, 1);
    CHECK((d.block(1, 5, 1, 5).transpose() - features_deriv(b, 0.3, 1)).norm() < 1e-15);
    CHECK(d.block(0, 5, 1, 5).norm() == 0.0);
  }

  TEST_CASE("invalid configurations are rejected") {
    BasisConfig b;
    b.rbf_centers = {0.5, 0.2};
    CHECK_THROWS_AS(b.validate(), InputError);
    b.rbf_centers = {0.2, 1.5};
    CHECK_THROWS_AS(b.validate(), InputError);
    b.rbf_centers = {0.2};
    b.rbf_width = 0.0;
    CHECK_THROWS_AS(b.validate(), InputError);
    b.rbf_width = 0.1;
    b.poly_degree = -1;
    CHECK_THROWS_AS(b.validate(), InputError);
    CHECK_THROWS_AS(features_deriv(BasisConfig::standard(), 0.5, 3), InputError);
    CHECK_THROWS_AS(features(BasisConfig::standard(), std::nan("")), InputError);
  }
}
