#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "promp/adaptation.hpp"
#include "promp/kinematics.hpp"
#include "promp/model.hpp"
#include "promp/training.hpp"

namespace promp::tt {

/// Ballistic model shared by the filter and the simulator: constant
/// gravity on z, table bounce flips and scales the vertical velocity.
struct BallModel {
  double gravity = 9.81;
  double table_height = 0.0;
  double restitution = 0.87;
  double process_noise = 0.1;  // acceleration std per axis, m/s^2
  double obs_noise = 0.01;     // position std per axis, m
};

struct BallObservation {
  double t = 0.0;
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
};

using BallState = Eigen::Matrix<double, 6, 1>;  // position, velocity
using BallCov = Eigen::Matrix<double, 6, 6>;

/// Open-loop propagation of a ball state and covariance by dt >= 0,
/// bouncing when the mean crosses the table going down.
void propagate(const BallModel& model, BallState& x, BallCov& P, double dt);

/// Filtered ball state at the last observation plus a tabulated open-loop
/// prediction out to `horizon` seconds after it.
class BallTrajectoryEstimate {
 public:
  BallTrajectoryEstimate(const BallModel& model, double t, const BallState& x, const BallCov& P,
                         double horizon, double resolution = 0.002);

  /// Position distribution at time t in [start_time(), start_time() + horizon].
  GaussianState query(double t) const;
  double start_time() const { return t_; }
  double end_time() const { return t_ + horizon_; }
  const BallState& state() const { return x_; }
  const BallCov& covariance() const { return P_; }

 private:
  double t_;
  double horizon_;
  double resolution_;
  BallState x_;
  BallCov P_;
  std::vector<Eigen::Vector3d> means_;
  std::vector<Eigen::Matrix3d> covs_;
};

/// Linear-Gaussian filter over the observations (initialized from the first
/// two), then open-loop prediction.
BallTrajectoryEstimate kf_predict(std::span<const BallObservation> obs, double horizon,
                                  const BallModel& model = {});

/// int N(x; a) N(x; b) dx = N(a.mean; b.mean, a.cov + b.cov).
double gaussian_overlap(const GaussianState& a, const GaussianState& b);

/// Prior over the normalized hit phase: N(mean, sigma^2), or uniform on [0,1].
struct HitTimePrior {
  double mean = 0.5;
  double sigma = 0.1;
  bool uniform = false;

  double density(double z) const;
};

/// Racket task-space distributions at the n_grid phases 0, 1/(n-1), ..., 1.
std::vector<GaussianState> racket_distributions(const ProMP& p, const ForwardKinematics& fk,
                                                int n_grid);

/// Trapezoid rule over z in [0,1] of overlap(racket(z), ball(t0 + z T)) * p_h(z).
double hit_likelihood(const ProMP& p, const ForwardKinematics& fk,
                      const BallTrajectoryEstimate& ball, double t0, double T,
                      const HitTimePrior& prior, int n_grid = 64);

double hit_likelihood(std::span<const GaussianState> racket, const BallTrajectoryEstimate& ball,
                      double t0, double T, const HitTimePrior& prior);

struct StartTimeRange {
  double first = 0.0;
  double last = 0.0;
  double step = 0.01;
};

/// Grid search for the start time with the largest hit likelihood; ties go
/// to the earliest start.
std::pair<double, double> optimal_start_time(const ProMP& p, const ForwardKinematics& fk,
                                             const BallTrajectoryEstimate& ball, double T,
                                             const HitTimePrior& prior,
                                             const StartTimeRange& range, int n_grid = 64);

std::pair<double, double> optimal_start_time(std::span<const GaussianState> racket,
                                             const BallTrajectoryEstimate& ball, double T,
                                             const HitTimePrior& prior,
                                             const StartTimeRange& range);

/// Ground-truth ball flight with quadratic air drag and a per-ball
/// restitution, emitting noisy observations at a fixed rate from t = 0.
struct BallSimConfig {
  BallModel model;
  double drag = 0.0;  // 1/m, acceleration -drag * |v| * v
  double obs_rate = 60.0;
  double obs_noise = 0.01;  // m, isotropic
  double duration = 1.6;
  double restitution_jitter = 0.0;  // std of the true restitution
  double step = 5e-4;
};

struct BallLaunch {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();
};

class BallSimulator {
 public:
  BallSimulator(const BallLaunch& launch, const BallSimConfig& cfg, std::uint64_t seed);

  Eigen::Vector3d true_position(double t) const;
  const std::vector<BallObservation>& observations() const { return obs_; }
  double duration() const { return cfg_.duration; }
  double restitution() const { return restitution_; }

 private:
  BallSimConfig cfg_;
  double restitution_;
  std::vector<Eigen::Vector3d> path_;  // at multiples of cfg.step
  std::vector<BallObservation> obs_;
};

/// Launch state whose drag-and-bounce flight passes through `point` with
/// velocity `vel` at time `t_hit` (integrated backwards).
BallLaunch launch_through(const BallSimConfig& cfg, const Eigen::Vector3d& point,
                          const Eigen::Vector3d& vel, double t_hit);

struct TrialOptions {
  bool replan = true;
  HitTimePrior prior;
  double duration = 0.5;  // movement duration T
  double hit_radius = 0.08;
  int n_grid = 64;
  double t0_window = 0.8;
  double t0_step = 0.01;
  double horizon = 1.6;
  /// No-move when the best hit likelihood is below this; NaN means
  /// 1e-6 / reach^3.
  double threshold = std::numeric_limits<double>::quiet_NaN();
  int single_shot_obs = 12;
  double exec_dt = 1e-3;
  BallModel model;
  LaplaceOptions laplace;
};

struct TrialOutcome {
  bool hit = false;
  bool no_move = false;
  double min_distance = std::numeric_limits<double>::infinity();
  int replans = 0;
  double start_time = std::numeric_limits<double>::quiet_NaN();
  double likelihood = 0.0;
};

/// Wait, observe, predict, pick t0, condition in task space; repeat until
/// the chosen start time arrives (or once without replanning). Then
/// condition on the resting joint state at phase 0 and execute the mean.
TrialOutcome play_trial(const ProMP& p, const ForwardKinematics& fk, const BallSimulator& sim,
                        const TrialOptions& opts);

/// Synthetic striking demonstrations for a 4-joint YawPlanarArm: a yaw sweep
/// with a bent planar posture, randomized offsets and 0.4-0.6 s durations.
std::vector<Demonstration> make_strike_demos(int n, std::uint64_t seed, int samples = 120);

/// Arm and nominal scene matching make_strike_demos.
YawPlanarArm strike_arm();

struct Scene {
  BallSimConfig sim;
  BallLaunch nominal;
  Eigen::Vector3d hit_point;
  double hit_time = 0.75;
};

/// Table below the racket's mid-swing point and a nominal ball through that
/// point at `hit_time` after launch.
Scene make_scene(const ProMP& p, const ForwardKinematics& fk, double hit_time = 0.75);

/// Strike ProMP trained on make_strike_demos, its arm and the matching scene
/// with drag and restitution jitter in the true ball flight.
struct StrikeSetup {
  ProMP promp;
  YawPlanarArm arm = strike_arm();
  Scene scene;
  double mean_duration = 0.5;  // of the demonstrations
};

StrikeSetup make_strike_setup(std::uint64_t seed, int demos = 8);

/// Defaults for play_trial with the scene's ball model (table height) and
/// the mean demonstration duration as movement duration.
TrialOptions trial_options(const StrikeSetup& setup, bool replan = true);

/// Ball for one trial: the nominal launch perturbed with `seed`. With
/// `out_of_reach` the launch is shifted sideways well outside the arm's reach.
BallSimulator trial_ball(const Scene& scene, std::uint64_t seed, bool out_of_reach = false);

/// Launch perturbed around the nominal one.
BallLaunch perturb_launch(const BallLaunch& nominal, std::uint64_t seed, double pos_std = 0.05,
                          double vel_std = 0.15);

}  // namespace promp::tt
