#include "promp/tabletennis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "promp/errors.hpp"
#include "promp/linalg.hpp"

namespace promp::tt {

namespace {

// Constant-acceleration step with continuous white-noise acceleration.
void step(const BallModel& model, BallState& x, BallCov& P, double tau) {
  if (tau <= 0.0) return;
  x.head<3>() += tau * x.tail<3>();
  x[2] -= 0.5 * model.gravity * tau * tau;
  x[5] -= model.gravity * tau;

  BallCov F = BallCov::Identity();
  F.block<3, 3>(0, 3) = tau * Eigen::Matrix3d::Identity();
  const double q = model.process_noise * model.process_noise;
  BallCov Q = BallCov::Zero();
  Q.block<3, 3>(0, 0) = q * tau * tau * tau / 3.0 * Eigen::Matrix3d::Identity();
  Q.block<3, 3>(0, 3) = q * tau * tau / 2.0 * Eigen::Matrix3d::Identity();
  Q.block<3, 3>(3, 0) = Q.block<3, 3>(0, 3);
  Q.block<3, 3>(3, 3) = q * tau * Eigen::Matrix3d::Identity();
  P = F * P * F.transpose() + Q;
}

// Time until the mean reaches the table going down, or +inf.
double time_to_table(const BallModel& model, const BallState& x) {
  const double above = x[2] - model.table_height;
  const double vz = x[5];
  const double g = model.gravity;
  // A filtered state can sit just below the surface; falling means bounce now.
  if (above < -1e-9) return vz < 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  if (g > 0.0) {
    const double disc = vz * vz + 2.0 * g * std::max(above, 0.0);
    const double s = (vz + std::sqrt(disc)) / g;
    return s > 1e-12 ? s : std::numeric_limits<double>::infinity();
  }
  if (vz < 0.0 && above > 0.0) return above / -vz;
  return std::numeric_limits<double>::infinity();
}

}  // namespace

void propagate(const BallModel& model, BallState& x, BallCov& P, double dt) {
  if (dt < 0.0) throw InputError("ball propagation needs dt >= 0");
  double remaining = dt;
  for (int bounces = 0; remaining > 0.0;) {
    const double hit = bounces < 16 ? time_to_table(model, x) : std::numeric_limits<double>::infinity();
    if (hit <= remaining && hit < std::numeric_limits<double>::infinity()) {
      step(model, x, P, hit);
      x[2] = model.table_height;
      x[5] = -model.restitution * x[5];
      P.row(5) *= -model.restitution;
      P.col(5) *= -model.restitution;
      remaining -= hit;
      ++bounces;
    } else {
      step(model, x, P, remaining);
      remaining = 0.0;
    }
  }
}

BallTrajectoryEstimate::BallTrajectoryEstimate(const BallModel& model, double t,
                                               const BallState& x, const BallCov& P,
                                               double horizon, double resolution)
    : t_(t), horizon_(horizon), resolution_(resolution), x_(x), P_(P) {
  if (!(horizon >= 0.0) || !(resolution > 0.0))
    throw InputError("prediction horizon must be >= 0 and resolution > 0");
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / resolution)) + 1;
  means_.reserve(steps + 1);
  covs_.reserve(steps + 1);
  BallState xs = x;
  BallCov ps = P;
  for (std::size_t i = 0; i <= steps; ++i) {
    means_.push_back(xs.head<3>());
    covs_.push_back(ps.block<3, 3>(0, 0));
    propagate(model, xs, ps, resolution);
  }
}

GaussianState BallTrajectoryEstimate::query(double t) const {
  const double rel = (t - t_) / resolution_;
  if (rel < -1e-9 || t > end_time() + 1e-9)
    throw InputError("ball prediction queried at t=" + std::to_string(t) + " outside [" +
                     std::to_string(t_) + ", " + std::to_string(end_time()) + "]");
  const double clamped = std::clamp(rel, 0.0, static_cast<double>(means_.size() - 1));
  const auto i = std::min(static_cast<std::size_t>(clamped), means_.size() - 2);
  const double a = clamped - static_cast<double>(i);
  return {(1.0 - a) * means_[i] + a * means_[i + 1], (1.0 - a) * covs_[i] + a * covs_[i + 1]};
}

BallTrajectoryEstimate kf_predict(std::span<const BallObservation> obs, double horizon,
                                  const BallModel& model) {
  if (obs.size() < 2) throw InputError("ball prediction needs at least two observations");
  const double dt = obs[1].t - obs[0].t;
  if (!(dt > 0.0)) throw TimeOrderError("ball observation times must increase");

  const double r = model.obs_noise * model.obs_noise;
  BallState x;
  x.head<3>() = obs[1].pos;
  x.tail<3>() = (obs[1].pos - obs[0].pos) / dt;
  x[5] -= 0.5 * model.gravity * dt;
  BallCov P = BallCov::Zero();
  P.block<3, 3>(0, 0) = r * Eigen::Matrix3d::Identity();
  P.block<3, 3>(0, 3) = r / dt * Eigen::Matrix3d::Identity();
  P.block<3, 3>(3, 0) = r / dt * Eigen::Matrix3d::Identity();
  P.block<3, 3>(3, 3) = 2.0 * r / (dt * dt) * Eigen::Matrix3d::Identity();

  // Position-only measurement; returns the innovation log density.
  auto update = [&](BallState& xs, BallCov& Ps, const Eigen::Vector3d& y) {
    Eigen::Matrix3d S = Ps.block<3, 3>(0, 0);
    S.diagonal().array() += r;
    const Eigen::Vector3d innov = y - xs.head<3>();
    const Eigen::Matrix<double, 6, 3> K = Ps.block<6, 3>(0, 0) * S.inverse();
    xs += K * innov;
    Ps -= K * Ps.block<3, 6>(0, 0);
    Ps = 0.5 * (Ps + Ps.transpose()).eval();
    return -0.5 * (std::log(S.determinant()) + innov.dot(S.ldlt().solve(innov)));
  };

  double t = obs[1].t;
  for (std::size_t i = 2; i < obs.size(); ++i) {
    if (!(obs[i].t >= t)) throw TimeOrderError("ball observation times must be non-decreasing");
    const double dt_i = obs[i].t - t;
    BallState xa = x;
    BallCov Pa = P;
    propagate(model, xa, Pa, dt_i);
    // Near the table the bounce may fall on either side of the sample, so
    // the opposite bounce decision is also tried and the better fit kept.
    if (std::abs(xa[2] - model.table_height) < 0.1) {
      BallState xb = x;
      BallCov Pb = P;
      const bool bounced = (xa[5] > 0.0) != (x[5] + -model.gravity * dt_i > 0.0);
      if (bounced) {
        BallModel flat = model;
        flat.table_height = -std::numeric_limits<double>::infinity();
        propagate(flat, xb, Pb, dt_i);
      } else {
        propagate(model, xb, Pb, dt_i);
        if (xb[5] < 0.0) {
          xb[5] *= -model.restitution;
          Pb.row(5) *= -model.restitution;
          Pb.col(5) *= -model.restitution;
        }
      }
      BallState xa2 = xa;
      BallCov Pa2 = Pa;
      const double la = update(xa2, Pa2, obs[i].pos);
      const double lb = update(xb, Pb, obs[i].pos);
      if (lb > la) {
        x = xb;
        P = Pb;
      } else {
        x = xa2;
        P = Pa2;
      }
    } else {
      x = xa;
      P = Pa;
      update(x, P, obs[i].pos);
    }
    t = obs[i].t;
  }
  return BallTrajectoryEstimate(model, t, x, P, horizon);
}

double gaussian_overlap(const GaussianState& a, const GaussianState& b) {
  if (a.dim() != b.dim()) throw InputError("overlap needs Gaussians of equal dimension");
  const Eigen::MatrixXd S = a.cov + b.cov;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("overlap covariance is singular: " + linalg::describe(S));
  const Eigen::VectorXd d = a.mean - b.mean;
  const Eigen::VectorXd w = llt.matrixL().solve(d);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return std::exp(-0.5 * (a.dim() * std::log(2.0 * std::numbers::pi) + logdet + w.squaredNorm()));
}

double HitTimePrior::density(double z) const {
  if (uniform) return (z >= 0.0 && z <= 1.0) ? 1.0 : 0.0;
  const double u = (z - mean) / sigma;
  return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

std::vector<GaussianState> racket_distributions(const ProMP& p, const ForwardKinematics& fk,
                                                int n_grid) {
  if (n_grid < 8) throw InputError("hit-likelihood grid needs at least 8 points");
  std::vector<GaussianState> out;
  out.reserve(static_cast<std::size_t>(n_grid));
  for (int i = 0; i < n_grid; ++i)
    out.push_back(task_distribution(p, static_cast<double>(i) / (n_grid - 1), fk));
  return out;
}

double hit_likelihood(std::span<const GaussianState> racket, const BallTrajectoryEstimate& ball,
                      double t0, double T, const HitTimePrior& prior) {
  if (!(T > 0.0)) throw InputError("movement duration must be positive");
  const auto n = static_cast<int>(racket.size());
  if (n < 8) throw InputError("hit-likelihood grid needs at least 8 points");
  const double dz = 1.0 / (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = i * dz;
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    sum += w * gaussian_overlap(racket[static_cast<std::size_t>(i)], ball.query(t0 + z * T)) *
           prior.density(z);
  }
  return sum * dz;
}

double hit_likelihood(const ProMP& p, const ForwardKinematics& fk,
                      const BallTrajectoryEstimate& ball, double t0, double T,
                      const HitTimePrior& prior, int n_grid) {
  const auto racket = racket_distributions(p, fk, n_grid);
  return hit_likelihood(racket, ball, t0, T, prior);
}

std::pair<double, double> optimal_start_time(std::span<const GaussianState> racket,
                                             const BallTrajectoryEstimate& ball, double T,
                                             const HitTimePrior& prior,
                                             const StartTimeRange& range) {
  if (!(range.last >= range.first) || !(range.step > 0.0))
    throw InputError("start-time range is empty");
  const auto count = static_cast<int>(std::floor((range.last - range.first) / range.step + 1e-9));
  double best_t0 = range.first;
  double best = -1.0;
  for (int i = 0; i <= count; ++i) {
    const double t0 = range.first + i * range.step;
    const double h = hit_likelihood(racket, ball, t0, T, prior);
    if (h > best) {
      best = h;
      best_t0 = t0;
    }
  }
  return {best_t0, best};
}

std::pair<double, double> optimal_start_time(const ProMP& p, const ForwardKinematics& fk,
                                             const BallTrajectoryEstimate& ball, double T,
                                             const HitTimePrior& prior,
                                             const StartTimeRange& range, int n_grid) {
  const auto racket = racket_distributions(p, fk, n_grid);
  return optimal_start_time(racket, ball, T, prior, range);
}

namespace {

Eigen::Vector3d ball_accel(const BallSimConfig& cfg, const Eigen::Vector3d& v) {
  Eigen::Vector3d a = -cfg.drag * v.norm() * v;
  a[2] -= cfg.model.gravity;
  return a;
}

// RK4 on (position, velocity); h may be negative.
void rk4(const BallSimConfig& cfg, Eigen::Vector3d& p, Eigen::Vector3d& v, double h) {
  const Eigen::Vector3d k1p = v, k1v = ball_accel(cfg, v);
  const Eigen::Vector3d v2 = v + 0.5 * h * k1v;
  const Eigen::Vector3d k2p = v2, k2v = ball_accel(cfg, v2);
  const Eigen::Vector3d v3 = v + 0.5 * h * k2v;
  const Eigen::Vector3d k3p = v3, k3v = ball_accel(cfg, v3);
  const Eigen::Vector3d v4 = v + h * k3v;
  const Eigen::Vector3d k4p = v4, k4v = ball_accel(cfg, v4);
  p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
}

// One step of h (negative runs backwards). A table crossing inside the step
// is located by bisection; there the vertical velocity is reflected with
// restitution e (undone when running backwards) and the step completed.
void flight_step(const BallSimConfig& cfg, Eigen::Vector3d& p, Eigen::Vector3d& v, double h,
                 double e) {
  const double table = cfg.model.table_height;
  Eigen::Vector3d p1 = p, v1 = v;
  rk4(cfg, p1, v1, h);
  if (!(p[2] >= table && p1[2] < table)) {
    p = p1;
    v = v1;
    return;
  }
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    Eigen::Vector3d pm = p, vm = v;
    rk4(cfg, pm, vm, mid * h);
    (pm[2] >= table ? lo : hi) = mid;
  }
  rk4(cfg, p, v, lo * h);
  p[2] = table;
  v[2] = h > 0.0 ? -e * v[2] : -v[2] / e;
  rk4(cfg, p, v, (1.0 - lo) * h);
}

}  // namespace

BallSimulator::BallSimulator(const BallLaunch& launch, const BallSimConfig& cfg,
                             std::uint64_t seed)
    : cfg_(cfg) {
  if (!(cfg.step > 0.0) || !(cfg.duration > 0.0) || !(cfg.obs_rate > 0.0))
    throw InputError("ball simulator needs positive step, duration and observation rate");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  restitution_ = cfg.model.restitution + cfg.restitution_jitter * normal(rng);

  Eigen::Vector3d p = launch.pos, v = launch.vel;
  const auto steps = static_cast<std::size_t>(std::ceil(cfg.duration / cfg.step));
  path_.reserve(steps + 1);
  path_.push_back(p);
  for (std::size_t i = 0; i < steps; ++i) {
    flight_step(cfg_, p, v, cfg.step, restitution_);
    path_.push_back(p);
  }

  for (int k = 0;; ++k) {
    const double t = k / cfg.obs_rate;
    if (t > cfg.duration) break;
    Eigen::Vector3d noise(normal(rng), normal(rng), normal(rng));
    obs_.push_back({t, true_position(t) + cfg.obs_noise * noise});
  }
}

Eigen::Vector3d BallSimulator::true_position(double t) const {
  const double rel = std::clamp(t / cfg_.step, 0.0, static_cast<double>(path_.size() - 1));
  const auto i = std::min(static_cast<std::size_t>(rel), path_.size() - 2);
  const double a = rel - static_cast<double>(i);
  return (1.0 - a) * path_[i] + a * path_[i + 1];
}

BallLaunch launch_through(const BallSimConfig& cfg, const Eigen::Vector3d& point,
                          const Eigen::Vector3d& vel, double t_hit) {
  Eigen::Vector3d p = point, v = vel;
  const auto steps = static_cast<int>(std::round(t_hit / cfg.step));
  const double dt = t_hit / std::max(steps, 1);
  for (int i = 0; i < steps; ++i) flight_step(cfg, p, v, -dt, cfg.model.restitution);
  return {p, v};
}

TrialOutcome play_trial(const ProMP& p, const ForwardKinematics& fk, const BallSimulator& sim,
                        const TrialOptions& opts) {
  const auto racket = racket_distributions(p, fk, opts.n_grid);
  const double threshold = std::isnan(opts.threshold) ? 1e-6 / std::pow(fk.reach(), 3)
                                                      : opts.threshold;
  const double T = opts.duration;
  const auto& obs = sim.observations();
  TrialOutcome out;

  // Phase of the best overlap for a fixed start time, used as the hit target.
  auto condition_hit = [&](const BallTrajectoryEstimate& ball, double t0) {
    const int n = opts.n_grid;
    int best = 0;
    double best_v = -1.0;
    for (int i = 0; i < n; ++i) {
      const double z = static_cast<double>(i) / (n - 1);
      const double v = gaussian_overlap(racket[static_cast<std::size_t>(i)], ball.query(t0 + z * T)) *
                       opts.prior.density(z);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    const double z = static_cast<double>(best) / (n - 1);
    return condition_task(p, {z, ball.query(t0 + z * T)}, fk, opts.laplace).first;
  };

  std::optional<ProMP> plan;
  double t0 = 0.0;
  double likelihood = 0.0;
  const std::size_t first = opts.replan ? 2 : static_cast<std::size_t>(std::max(opts.single_shot_obs, 2));
  bool committed = false;
  for (std::size_t n = first; n <= obs.size(); ++n) {
    const double now = obs[n - 1].t;
    const auto ball = kf_predict(std::span(obs.data(), n), opts.horizon, opts.model);
    const double last = std::min(now + opts.t0_window, ball.end_time() - T);
    if (last < now) break;
    const auto [best_t0, h] = optimal_start_time(racket, ball, T, opts.prior, {now, last, opts.t0_step});
    ++out.replans;
    t0 = best_t0;
    likelihood = h;
    if (h >= threshold) {
      try {
        plan = condition_hit(ball, t0);
      } catch (const AdaptationError&) {
        plan.reset();
      } catch (const NumericalError&) {
        plan.reset();
      }
    } else {
      plan.reset();
    }
    if (!opts.replan || t0 <= now) {
      committed = true;
      break;
    }
  }

  out.likelihood = likelihood;
  if (!committed || !plan || likelihood < threshold) {
    out.no_move = true;
    return out;
  }

  // Start from the resting posture the arm was moved to.
  const Eigen::VectorXd rest = marginal_at(p, 0.0, 0).mean;
  const ProMP exec = condition_point(*plan, 0.0, rest, 0);
  out.start_time = t0;
  const auto steps = static_cast<int>(std::ceil(T / opts.exec_dt));
  for (int i = 0; i <= steps; ++i) {
    const double z = std::min(1.0, static_cast<double>(i) / steps);
    const double t = t0 + z * T;
    const Eigen::VectorXd q = block_feature_matrix(exec.basis, z, exec.dofs) * exec.mu_w;
    out.min_distance = std::min(out.min_distance, (fk.evaluate(q) - sim.true_position(t)).norm());
  }
  out.hit = out.min_distance < opts.hit_radius;
  return out;
}

YawPlanarArm strike_arm() { return YawPlanarArm({0.45, 0.4, 0.25}); }

std::vector<Demonstration> make_strike_demos(int n, std::uint64_t seed, int samples) {
  if (n < 1 || samples < 2) throw InputError("need at least one demo with two samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> duration(0.4, 0.6);
  const Eigen::Vector3d posture(-0.6, 1.4, -0.6);

  std::vector<Demonstration> demos;
  for (int d = 0; d < n; ++d) {
    const double T = duration(rng);
    const double yaw_offset = 0.05 * normal(rng);
    const double sweep = 1.8 * (1.0 + 0.05 * normal(rng));
    Eigen::Vector3d offset, arc;
    for (int j = 0; j < 3; ++j) {
      offset[j] = 0.05 * normal(rng);
      arc[j] = 0.05 * normal(rng);
    }
    std::vector<double> times(static_cast<std::size_t>(samples));
    Eigen::MatrixXd q(samples, 4);
    for (int i = 0; i < samples; ++i) {
      const double z = static_cast<double>(i) / (samples - 1);
      times[static_cast<std::size_t>(i)] = z * T;
      const double ramp = z - std::sin(2.0 * std::numbers::pi * z) / (2.0 * std::numbers::pi);
      q(i, 0) = yaw_offset - 0.5 * sweep + sweep * ramp;
      for (int j = 0; j < 3; ++j)
        q(i, j + 1) = posture[j] + offset[j] + arc[j] * std::sin(std::numbers::pi * z);
      for (int j = 0; j < 4; ++j) q(i, j) += 1e-3 * normal(rng);
    }
    demos.push_back(Demonstration::from_samples(std::move(times), std::move(q)));
  }
  return demos;
}

Scene make_scene(const ProMP& p, const ForwardKinematics& fk, double hit_time) {
  Scene s;
  s.hit_time = hit_time;
  s.hit_point = task_distribution(p, 0.5, fk).mean;
  s.sim.model.table_height = s.hit_point[2] - 0.3;
  s.sim.drag = 0.05;
  s.sim.restitution_jitter = 0.03;
  s.nominal = launch_through(s.sim, s.hit_point, Eigen::Vector3d(-3.0, 0.0, -0.5), hit_time);
  return s;
}

StrikeSetup make_strike_setup(std::uint64_t seed, int demos) {
  StrikeSetup s;
  const auto data = make_strike_demos(demos, seed);
  const BasisConfig basis = BasisConfig::standard();
  const int dofs = data.front().dofs();
  s.promp = em_train(data, basis, dofs, NIWPrior::standard(basis.num_features() * dofs)).first;
  s.scene = make_scene(s.promp, s.arm);
  double total = 0.0;
  for (const auto& d : data) total += d.duration;
  s.mean_duration = total / static_cast<double>(data.size());
  return s;
}

TrialOptions trial_options(const StrikeSetup& setup, bool replan) {
  TrialOptions o;
  o.replan = replan;
  o.model = setup.scene.sim.model;
  o.duration = setup.mean_duration;
  return o;
}

BallSimulator trial_ball(const Scene& scene, std::uint64_t seed, bool out_of_reach) {
  BallLaunch launch = perturb_launch(scene.nominal, seed);
  if (out_of_reach) launch.pos[1] += 2.5;
  return BallSimulator(launch, scene.sim, seed ^ 0x9e3779b97f4a7c15ULL);
}

BallLaunch perturb_launch(const BallLaunch& nominal, std::uint64_t seed, double pos_std,
                          double vel_std) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  BallLaunch out = nominal;
  for (int i = 0; i < 3; ++i) {
    out.pos[i] += pos_std * normal(rng);
    out.vel[i] += vel_std * normal(rng);
  }
  return out;
}

}  // namespace promp::tt
