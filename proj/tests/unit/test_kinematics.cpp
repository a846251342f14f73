#include <doctest.h>

#include <numbers>
#include <random>

#include "../oracles.hpp"
#include "promp/errors.hpp"
#include "promp/kinematics.hpp"

using namespace promp;

namespace {

Eigen::VectorXd uniform_angles(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-std::numbers::pi, std::numbers::pi);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = U(rng);
  return y;
}

double jac_err(const ForwardKinematics& fk, const Eigen::VectorXd& y) {
  const auto f = [&](const Eigen::VectorXd& x) { return fk.evaluate(x); };
  return (fk.jacobian(y) - oracle::central_jacobian(f, y)).cwiseAbs().maxCoeff();
}

double hess_err(const ForwardKinematics& fk, const Eigen::VectorXd& y) {
  const auto H = fk.hessians(y);
  double worst = 0.0;
  for (int o = 0; o < fk.output_dim(); ++o) {
    const auto g = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(fk.jacobian(x).row(o).transpose()); };
    worst = std::max(worst, (H[static_cast<std::size_t>(o)] - oracle::central_jacobian(g, y)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST_SUITE("kinematics") {
  TEST_CASE("planar arm at known poses") {
    const PlanarArm arm({1.0, 0.5});
    CHECK((arm.evaluate(Eigen::Vector2d(0, 0)) - Eigen::Vector2d(1.5, 0)).norm() < 1e-15);
    CHECK((arm.evaluate(Eigen::Vector2d(std::numbers::pi / 2, 0)) - Eigen::Vector2d(0, 1.5)).norm() < 1e-15);
    CHECK((arm.evaluate(Eigen::Vector2d(0, std::numbers::pi / 2)) - Eigen::Vector2d(1.0, 0.5)).norm() < 1e-15);
    CHECK(arm.reach() == 1.5);
    CHECK_THROWS_AS(PlanarArm({1.0, -1.0}), InputError);
  }

  TEST_CASE("yaw-planar arm rotates the planar reach") {
    const YawPlanarArm arm({1.0, 1.0}, Eigen::Vector3d(0, 0, 0.5));
    const Eigen::Vector3d x = arm.evaluate(Eigen::Vector3d(std::numbers::pi / 2, 0.0, 0.0));
    CHECK((x - Eigen::Vector3d(0.0, 2.0, 0.5)).norm() < 1e-14);
    const Eigen::Vector3d up = arm.evaluate(Eigen::Vector3d(0.0, std::numbers::pi / 2, 0.0));
    CHECK((up - Eigen::Vector3d(0.0, 0.0, 2.5)).norm() < 1e-14);
  }

  TEST_CASE("analytic Jacobians and Hessians match finite differences") {
    std::mt19937_64 rng(1);
    const PlanarArm planar({0.4, 0.3, 0.25, 0.1});
    const YawPlanarArm yaw({0.3, 0.3, 0.2}, Eigen::Vector3d(0.1, -0.2, 0.3));
    Eigen::MatrixXd A(2, 3);
    A << 1, 2, 3, 4, 5, 6;
    const LinearKinematics lin(A, Eigen::Vector2d(1, 1));
    double j = 0.0, h = 0.0;
    for (int i = 0; i < 100; ++i) {
      for (const ForwardKinematics* fk : {static_cast<const ForwardKinematics*>(&planar),
                                          static_cast<const ForwardKinematics*>(&yaw),
                                          static_cast<const ForwardKinematics*>(&lin)}) {
        const Eigen::VectorXd y = uniform_angles(fk->input_dim(), rng);
        j = std::max(j, jac_err(*fk, y));
        h = std::max(h, hess_err(*fk, y));
      }
    }
    CHECK(j < 1e-8);
    CHECK(h < 1e-6);
    CHECK(jacobian_consistency_error(planar, 50, 3) < 1e-8);
  }

  TEST_CASE("kinematics from JSON") {
    const auto a = make_kinematics(nlohmann::json::parse(R"({"type":"planar","link_lengths":[1,2]})"));
    CHECK(a->input_dim() == 2);
    CHECK(a->output_dim() == 2);
    const auto b = make_kinematics(
        nlohmann::json::parse(R"({"type":"yaw_planar","link_lengths":[1,1],"base":[0,0,1]})"));
    CHECK(b->output_dim() == 3);
    CHECK(b->evaluate(Eigen::Vector3d::Zero())[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(make_kinematics(nlohmann::json::parse(R"({"type":"scara"})")), InputError);
    CHECK_THROWS_AS(make_kinematics(nlohmann::json::parse(R"({"type":"planar"})")), InputError);
    CHECK_THROWS_AS(make_kinematics(nlohmann::json::parse(R"({"type":"planar","link_lengths":[]})")), InputError);
  }
}
