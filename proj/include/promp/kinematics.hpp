#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace promp {

/// Position-only forward kinematics x = f(y).
class ForwardKinematics {
 public:
  virtual ~ForwardKinematics() = default;

  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual Eigen::VectorXd evaluate(const Eigen::VectorXd& y) const = 0;
  /// output_dim x input_dim.
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& y) const = 0;

  virtual bool has_second_derivatives() const { return false; }
  /// One input_dim x input_dim Hessian per output coordinate.
  virtual std::vector<Eigen::MatrixXd> hessians(const Eigen::VectorXd& y) const;

  /// Sum of the reach of all links, used for workspace-scale thresholds.
  virtual double reach() const = 0;
};

/// Serial chain of revolute joints moving in a plane.
class PlanarArm final : public ForwardKinematics {
 public:
  explicit PlanarArm(std::vector<double> link_lengths);

  int input_dim() const override { return static_cast<int>(links_.size()); }
  int output_dim() const override { return 2; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& y) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& y) const override;
  bool has_second_derivatives() const override { return true; }
  std::vector<Eigen::MatrixXd> hessians(const Eigen::VectorXd& y) const override;
  double reach() const override;

  const std::vector<double>& link_lengths() const { return links_; }

 private:
  std::vector<double> links_;
};

/// A base yaw joint followed by a planar chain in the vertical plane it
/// selects: x = (r cos(yaw), r sin(yaw), h) + base, with (r, h) the planar
/// end point. Three-dimensional stand-in for a striking arm.
class YawPlanarArm final : public ForwardKinematics {
 public:
  YawPlanarArm(std::vector<double> link_lengths, Eigen::Vector3d base = Eigen::Vector3d::Zero());

  int input_dim() const override { return static_cast<int>(planar_.input_dim()) + 1; }
  int output_dim() const override { return 3; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& y) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& y) const override;
  bool has_second_derivatives() const override { return true; }
  std::vector<Eigen::MatrixXd> hessians(const Eigen::VectorXd& y) const override;
  double reach() const override { return planar_.reach(); }

  const PlanarArm& planar() const { return planar_; }
  const Eigen::Vector3d& base() const { return base_; }

 private:
  PlanarArm planar_;
  Eigen::Vector3d base_;
};

/// f(y) = A y + c.
class LinearKinematics final : public ForwardKinematics {
 public:
  LinearKinematics(Eigen::MatrixXd A, Eigen::VectorXd offset);

  int input_dim() const override { return static_cast<int>(A_.cols()); }
  int output_dim() const override { return static_cast<int>(A_.rows()); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& y) const override { return A_ * y + c_; }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const override { return A_; }
  bool has_second_derivatives() const override { return true; }
  std::vector<Eigen::MatrixXd> hessians(const Eigen::VectorXd& y) const override;
  double reach() const override;

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd c_;
};

Eigen::Vector2d planar_fk(const PlanarArm& arm, const Eigen::VectorXd& y);
Eigen::MatrixXd planar_jacobian(const PlanarArm& arm, const Eigen::VectorXd& y);

/// Central differences, X x D.
Eigen::MatrixXd numeric_jacobian(const ForwardKinematics& fk, const Eigen::VectorXd& y,
                                 double step = 1e-6);

/// Largest |analytic - numeric| Jacobian entry over `samples` configurations
/// drawn uniformly from [-pi, pi]^D.
double jacobian_consistency_error(const ForwardKinematics& fk, int samples, std::uint64_t seed,
                                  double step = 1e-6);

/// Builds kinematics from `{"type":"planar","link_lengths":[...]}` or
/// `{"type":"yaw_planar","link_lengths":[...],"base":[x,y,z]}`. With
/// `verify` the Jacobian is checked against finite differences on 100
/// random configurations (max error 1e-5) before returning.
std::unique_ptr<ForwardKinematics> make_kinematics(const nlohmann::json& cfg, bool verify = true);

}  // namespace promp
