#include "promp/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "promp/errors.hpp"

namespace promp {

std::vector<Eigen::MatrixXd> ForwardKinematics::hessians(const Eigen::VectorXd&) const {
  throw InputError("kinematics does not provide second derivatives");
}

PlanarArm::PlanarArm(std::vector<double> link_lengths) : links_(std::move(link_lengths)) {
  if (links_.empty()) throw InputError("planar arm needs at least one link");
  for (double l : links_)
    if (!(l > 0.0) || !std::isfinite(l)) throw InputError("link lengths must be positive");
}

namespace {

void check_dim(const Eigen::VectorXd& y, int expected) {
  if (y.size() != expected)
    throw InputError("joint vector has " + std::to_string(y.size()) + " entries, expected " +
                     std::to_string(expected));
}

}  // namespace

Eigen::VectorXd PlanarArm::evaluate(const Eigen::VectorXd& y) const {
  check_dim(y, input_dim());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  double angle = 0.0;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    angle += y[static_cast<Eigen::Index>(i)];
    x[0] += links_[i] * std::cos(angle);
    x[1] += links_[i] * std::sin(angle);
  }
  return x;
}

Eigen::MatrixXd PlanarArm::jacobian(const Eigen::VectorXd& y) const {
  check_dim(y, input_dim());
  const int n = input_dim();
  // Tail sums: column j collects every link at or after joint j.
  Eigen::VectorXd cs(n), sn(n);
  double angle = 0.0;
  for (int i = 0; i < n; ++i) {
    angle += y[i];
    cs[i] = links_[i] * std::cos(angle);
    sn[i] = links_[i] * std::sin(angle);
  }
  Eigen::MatrixXd J(2, n);
  double tc = 0.0, ts = 0.0;
  for (int j = n - 1; j >= 0; --j) {
    tc += cs[j];
    ts += sn[j];
    J(0, j) = -ts;
    J(1, j) = tc;
  }
  return J;
}

std::vector<Eigen::MatrixXd> PlanarArm::hessians(const Eigen::VectorXd& y) const {
  check_dim(y, input_dim());
  const int n = input_dim();
  Eigen::VectorXd tail_c(n), tail_s(n);
  double angle = 0.0;
  Eigen::VectorXd cs(n), sn(n);
  for (int i = 0; i < n; ++i) {
    angle += y[i];
    cs[i] = links_[i] * std::cos(angle);
    sn[i] = links_[i] * std::sin(angle);
  }
  double tc = 0.0, ts = 0.0;
  for (int j = n - 1; j >= 0; --j) {
    tc += cs[j];
    ts += sn[j];
    tail_c[j] = tc;
    tail_s[j] = ts;
  }
  std::vector<Eigen::MatrixXd> H(2, Eigen::MatrixXd(n, n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const int m = std::max(a, b);
      H[0](a, b) = -tail_c[m];
      H[1](a, b) = -tail_s[m];
    }
  return H;
}

double PlanarArm::reach() const {
  double r = 0.0;
  for (double l : links_) r += l;
  return r;
}

YawPlanarArm::YawPlanarArm(std::vector<double> link_lengths, Eigen::Vector3d base)
    : planar_(std::move(link_lengths)), base_(std::move(base)) {}

Eigen::VectorXd YawPlanarArm::evaluate(const Eigen::VectorXd& y) const {
  check_dim(y, input_dim());
  const Eigen::VectorXd p = planar_.evaluate(y.tail(y.size() - 1));
  const double yaw = y[0];
  Eigen::VectorXd x(3);
  x << p[0] * std::cos(yaw), p[0] * std::sin(yaw), p[1];
  return x + base_;
}

Eigen::MatrixXd YawPlanarArm::jacobian(const Eigen::VectorXd& y) const {
  check_dim(y, input_dim());
  const Eigen::VectorXd q = y.tail(y.size() - 1);
  const Eigen::VectorXd p = planar_.evaluate(q);
  const Eigen::MatrixXd Jp = planar_.jacobian(q);
  const double c = std::cos(y[0]), s = std::sin(y[0]);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, input_dim());
  J(0, 0) = -p[0] * s;
  J(1, 0) = p[0] * c;
  J.block(0, 1, 1, q.size()) = c * Jp.row(0);
  J.block(1, 1, 1, q.size()) = s * Jp.row(0);
  J.block(2, 1, 1, q.size()) = Jp.row(1);
  return J;
}

std::vector<Eigen::MatrixXd> YawPlanarArm::hessians(const Eigen::VectorXd& y) const {
  check_dim(y, input_dim());
  const Eigen::VectorXd q = y.tail(y.size() - 1);
  const Eigen::VectorXd p = planar_.evaluate(q);
  const Eigen::MatrixXd Jp = planar_.jacobian(q);
  const auto Hp = planar_.hessians(q);
  const double c = std::cos(y[0]), s = std::sin(y[0]);
  const auto m = q.size();
  const int n = input_dim();
  std::vector<Eigen::MatrixXd> H(3, Eigen::MatrixXd::Zero(n, n));
  H[0](0, 0) = -p[0] * c;
  H[1](0, 0) = -p[0] * s;
  H[0].block(0, 1, 1, m) = -s * Jp.row(0);
  H[0].block(1, 0, m, 1) = -s * Jp.row(0).transpose();
  H[1].block(0, 1, 1, m) = c * Jp.row(0);
  H[1].block(1, 0, m, 1) = c * Jp.row(0).transpose();
  H[0].block(1, 1, m, m) = c * Hp[0];
  H[1].block(1, 1, m, m) = s * Hp[0];
  H[2].block(1, 1, m, m) = Hp[1];
  return H;
}

LinearKinematics::LinearKinematics(Eigen::MatrixXd A, Eigen::VectorXd offset)
    : A_(std::move(A)), c_(std::move(offset)) {
  if (c_.size() != A_.rows()) throw InputError("linear kinematics offset has wrong length");
}

std::vector<Eigen::MatrixXd> LinearKinematics::hessians(const Eigen::VectorXd&) const {
  return std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(A_.rows()),
                                      Eigen::MatrixXd::Zero(A_.cols(), A_.cols()));
}

double LinearKinematics::reach() const {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(A_).singularValues()(0) * std::sqrt(A_.cols()) *
         std::numbers::pi;
}

Eigen::Vector2d planar_fk(const PlanarArm& arm, const Eigen::VectorXd& y) {
  return arm.evaluate(y);
}

Eigen::MatrixXd planar_jacobian(const PlanarArm& arm, const Eigen::VectorXd& y) {
  return arm.jacobian(y);
}

Eigen::MatrixXd numeric_jacobian(const ForwardKinematics& fk, const Eigen::VectorXd& y,
                                 double step) {
  if (!(step > 0.0)) throw InputError("finite-difference step must be positive");
  Eigen::MatrixXd J(fk.output_dim(), y.size());
  Eigen::VectorXd yp = y, ym = y;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    yp[j] = y[j] + step;
    ym[j] = y[j] - step;
    J.col(j) = (fk.evaluate(yp) - fk.evaluate(ym)) / (2.0 * step);
    yp[j] = ym[j] = y[j];
  }
  return J;
}

double jacobian_consistency_error(const ForwardKinematics& fk, int samples, std::uint64_t seed,
                                  double step) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd y(fk.input_dim());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = angle(rng);
    worst = std::max(worst,
                     (fk.jacobian(y) - numeric_jacobian(fk, y, step)).cwiseAbs().maxCoeff());
  }
  return worst;
}

std::unique_ptr<ForwardKinematics> make_kinematics(const nlohmann::json& cfg, bool verify) {
  if (!cfg.is_object() || !cfg.contains("type") || !cfg.contains("link_lengths"))
    throw InputError("kinematics config needs \"type\" and \"link_lengths\"");
  const auto type = cfg.at("type").get<std::string>();
  const auto links = cfg.at("link_lengths").get<std::vector<double>>();
  std::unique_ptr<ForwardKinematics> fk;
  if (type == "planar") {
    fk = std::make_unique<PlanarArm>(links);
  } else if (type == "yaw_planar") {
    Eigen::Vector3d base = Eigen::Vector3d::Zero();
    if (cfg.contains("base")) {
      const auto b = cfg.at("base").get<std::vector<double>>();
      if (b.size() != 3) throw InputError("\"base\" must have three entries");
      base = Eigen::Vector3d(b[0], b[1], b[2]);
    }
    fk = std::make_unique<YawPlanarArm>(links, base);
  } else {
    throw InputError("unknown kinematics type \"" + type + "\"");
  }
  if (verify) {
    const double err = jacobian_consistency_error(*fk, 100, 0x5eed);
    if (err > 1e-5)
      throw InputError("kinematics Jacobian disagrees with finite differences (max error " +
                       std::to_string(err) + ")");
  }
  return fk;
}

}  // namespace promp
