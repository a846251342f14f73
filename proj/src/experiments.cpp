#include "promp/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "promp/adaptation.hpp"
#include "promp/errors.hpp"
#include "promp/kinematics.hpp"
#include "promp/linalg.hpp"

namespace promp::experiments {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double log_or_inf(double v) { return std::isfinite(v) ? std::log(v) : v; }

Eigen::MatrixXd random_correlation(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = normal(rng);
  Eigen::MatrixXd C = A * A.transpose() + 0.5 * n * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd s = C.diagonal().cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * C * s.asDiagonal();
}

// Neighbouring features co-vary; a squared-exponential over the index.
Eigen::MatrixXd smooth_block(int k) {
  Eigen::MatrixXd B(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) B(i, j) = std::exp(-0.5 * (i - j) * (i - j) / (1.5 * 1.5));
  return B;
}

Eigen::VectorXd random_vector(int n, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

std::vector<double> StudyResult::xs() const {
  std::vector<double> out;
  for (const auto& r : records) out.push_back(r.x);
  return out;
}

std::vector<double> StudyResult::column(const std::string& col) const {
  const auto it = std::find(columns.begin(), columns.end(), col);
  if (it == columns.end()) throw InputError("study '" + name + "' has no column '" + col + "'");
  const auto idx = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& r : records) out.push_back(r.values.at(idx));
  return out;
}

void StudyResult::write_csv(std::ostream& os, bool plot_data) const {
  const char* sep = plot_data ? " " : ",";
  if (plot_data) {
    os << "# " << name << " seed=" << seed;
    for (const auto& [k, v] : config) os << ' ' << k << '=' << v;
    os << "\n# ";
  }
  os << x_label;
  for (const auto& c : columns) os << sep << c;
  os << '\n';
  for (const auto& r : records) {
    os << fmt(r.x);
    for (double v : r.values) os << sep << fmt(v);
    os << '\n';
  }
}

double condition_number(const Eigen::MatrixXd& S) {
  if (S.rows() != S.cols() || S.size() == 0)
    throw InputError("condition number needs a non-empty square matrix");
  if (!linalg::is_symmetric(S)) throw InputError("condition number needs a symmetric matrix");
  const Eigen::VectorXd ev =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly).eigenvalues();
  const double hi = ev.cwiseAbs().maxCoeff();
  const double lo = ev.cwiseAbs().minCoeff();
  if (hi == 0.0 || lo <= S.rows() * std::numeric_limits<double>::epsilon() * hi)
    return std::numeric_limits<double>::infinity();
  return hi / lo;
}

std::vector<Demonstration> Generator::generate(int n, std::uint64_t seed) const {
  if (n < 0 || samples < 2) throw InputError("generator needs n >= 0 and at least two samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd L = linalg::psd_sqrt(truth.Sigma_w, "generator Sigma_w");
  const int K = truth.num_features();
  const int D = truth.dofs;
  Eigen::MatrixXd Phi(samples, K);
  std::vector<double> times(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const double z = static_cast<double>(i) / (samples - 1);
    times[static_cast<std::size_t>(i)] = z;
    Phi.row(i) = features(truth.basis, z).transpose();
  }
  std::vector<Demonstration> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int d = 0; d < n; ++d) {
    Eigen::VectorXd e(L.cols());
    for (auto& v : e) v = normal(rng);
    const Eigen::VectorXd w = truth.mu_w + L * e;
    Eigen::MatrixXd Y(samples, D);
    for (int j = 0; j < D; ++j) Y.col(j) = Phi * w.segment(j * K, K);
    for (int i = 0; i < samples; ++i)
      for (int j = 0; j < D; ++j) Y(i, j) += noise * normal(rng);
    out.push_back(Demonstration::from_samples(times, std::move(Y)));
  }
  return out;
}

Generator correlated_generator(int dofs, std::uint64_t seed, double scale, double floor) {
  std::mt19937_64 rng(seed);
  Generator g;
  g.truth = ProMP::initial(BasisConfig::standard(), dofs);
  const int K = g.truth.num_features();
  const int n = K * dofs;
  g.truth.mu_w = random_vector(n, 0.5, rng);
  g.truth.Sigma_w = scale * (kron_blocks(random_correlation(dofs, rng), smooth_block(K)) +
                             floor * Eigen::MatrixXd::Identity(n, n));
  g.truth.Sigma_y = g.noise * g.noise * Eigen::MatrixXd::Identity(dofs, dofs);
  return g;
}

Generator sum_difference_generator(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Generator g;
  g.truth = ProMP::initial(BasisConfig::standard(), 4);
  const int K = g.truth.num_features();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
  // Weights of joints 3, 4 are linear in those of joints 1, 2.
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(4 * K, 2 * K);
  T.block(0, 0, K, K) = I;
  T.block(K, K, K, K) = I;
  T.block(2 * K, 0, K, K) = I;
  T.block(2 * K, K, K, K) = I;
  T.block(3 * K, 0, K, K) = I;
  T.block(3 * K, K, K, K) = -I;
  const Eigen::MatrixXd base = 1e-2 * kron_blocks(Eigen::Matrix2d::Identity(), smooth_block(K) +
                                                                                0.1 * I);
  g.truth.Sigma_w = T * base * T.transpose();
  g.truth.mu_w = T * random_vector(2 * K, 0.5, rng);
  g.truth.Sigma_y = g.noise * g.noise * Eigen::MatrixXd::Identity(4, 4);
  return g;
}

StudyResult condnum_study(const Generator& gen, const CondnumConfig& cfg) {
  if (cfg.n_max < 1) throw InputError("condnum study needs n_max >= 1");
  StudyResult r;
  r.name = "condnum";
  r.x_label = "N";
  r.seed = cfg.seed;
  r.columns = {"map", "mle"};
  for (double l : cfg.lambdas) r.columns.push_back("ls_" + fmt(l));
  r.config = {{"KD", std::to_string(gen.truth.weight_dim())},
              {"n_max", std::to_string(cfg.n_max)},
              {"samples", std::to_string(gen.samples)},
              {"noise", fmt(gen.noise)}};

  const auto demos = gen.generate(cfg.n_max, cfg.seed);
  const int KD = gen.truth.weight_dim();
  const auto& basis = gen.truth.basis;
  const int D = gen.truth.dofs;
  for (int N = 1; N <= cfg.n_max; ++N) {
    const std::span<const Demonstration> sub(demos.data(), static_cast<std::size_t>(N));
    StudyRecord rec{static_cast<double>(N), {}};
    rec.values.push_back(log_or_inf(
        condition_number(em_train(sub, basis, D, NIWPrior::standard(KD), cfg.train).first.Sigma_w)));
    rec.values.push_back(log_or_inf(condition_number(
        em_train(sub, basis, D, NIWPrior::maximum_likelihood(KD), cfg.train).first.Sigma_w)));
    for (double l : cfg.lambdas)
      rec.values.push_back(
          log_or_inf(condition_number(least_squares_train(sub, basis, D, l).first.Sigma_w)));
    r.records.push_back(std::move(rec));
  }
  return r;
}

StudyResult convergence_study(const Generator& gen, const ConvergenceConfig& cfg) {
  if (cfg.n_max < 1 || cfg.replications < 1)
    throw InputError("convergence study needs n_max >= 1 and replications >= 1");
  const int K = gen.truth.num_features();
  const int KD = gen.truth.weight_dim();
  const int D = gen.truth.dofs;
  const Eigen::MatrixXd truth_bd = blockdiag(gen.truth.Sigma_w, K);
  const Eigen::MatrixXd truth_off = gen.truth.Sigma_w - truth_bd;

  Eigen::MatrixXd err = Eigen::MatrixXd::Zero(cfg.n_max, 3);
  for (int rep = 0; rep < cfg.replications; ++rep) {
    const auto demos = gen.generate(cfg.n_max, cfg.seed + 1000003ULL * static_cast<std::uint64_t>(rep));
    for (int N = 1; N <= cfg.n_max; ++N) {
      const std::span<const Demonstration> sub(demos.data(), static_cast<std::size_t>(N));
      const ProMP p = em_train(sub, gen.truth.basis, D, NIWPrior::standard(KD), cfg.train).first;
      const Eigen::MatrixXd bd = blockdiag(p.Sigma_w, K);
      err(N - 1, 0) += (p.mu_w - gen.truth.mu_w).norm();
      err(N - 1, 1) += (bd - truth_bd).norm();
      err(N - 1, 2) += (p.Sigma_w - bd - truth_off).norm();
    }
  }
  StudyResult r;
  r.name = "convergence";
  r.x_label = "N";
  r.seed = cfg.seed;
  r.columns = {"mean", "blockdiag", "offdiag"};
  r.config = {{"KD", std::to_string(KD)},
              {"n_max", std::to_string(cfg.n_max)},
              {"replications", std::to_string(cfg.replications)}};
  for (int N = 1; N <= cfg.n_max; ++N) {
    StudyRecord rec{static_cast<double>(N), {}};
    for (int c = 0; c < 3; ++c) rec.values.push_back(err(N - 1, c) / err(0, c));
    r.records.push_back(std::move(rec));
  }
  return r;
}

std::vector<double> moving_median(const std::vector<double>& v, int width) {
  if (width < 1) throw InputError("moving median width must be positive");
  const int n = static_cast<int>(v.size());
  const int half = width / 2;
  std::vector<double> out(v.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    std::vector<double> w(v.begin() + lo, v.begin() + hi + 1);
    std::sort(w.begin(), w.end());
    const auto m = w.size();
    out[static_cast<std::size_t>(i)] = m % 2 ? w[m / 2] : 0.5 * (w[m / 2 - 1] + w[m / 2]);
  }
  return out;
}

std::vector<Demonstration> missing_data_demos(const EmCurveConfig& cfg) {
  if (!(cfg.missing >= 0.0 && cfg.missing < 1.0)) throw InputError("missing fraction must be in [0,1)");
  Generator gen = correlated_generator(cfg.dofs, cfg.seed, 1.0, 0.05);
  gen.samples = cfg.samples;
  gen.noise = cfg.noise;
  auto full = gen.generate(cfg.demos, cfg.seed + 17);

  std::mt19937_64 rng(cfg.seed + 29);
  std::uniform_real_distribution<double> start(0.0, 1.0 - cfg.missing);
  std::vector<Demonstration> out;
  for (const auto& d : full) {
    const double a = start(rng), b = a + cfg.missing;
    std::vector<double> t;
    std::vector<int> keep;
    for (int i = 0; i < d.num_samples(); ++i) {
      const double z = d.times[static_cast<std::size_t>(i)];
      if (z < a || z > b) {
        t.push_back(z);
        keep.push_back(i);
      }
    }
    Demonstration m;
    m.times = std::move(t);
    m.joints = d.joints(keep, Eigen::all);
    m.t0 = 0.0;
    m.duration = 1.0;
    m.validate();
    out.push_back(std::move(m));
  }
  return out;
}

StudyResult em_curve_study(const EmCurveConfig& cfg) {
  const auto demos = missing_data_demos(cfg);
  const BasisConfig basis = BasisConfig::standard();
  const int KD = basis.num_features() * cfg.dofs;
  TrainOptions opts;
  opts.tol = 0.0;
  opts.max_iter = cfg.iterations;
  opts.min_iter = cfg.iterations;
  opts.init = TrainInit{Eigen::VectorXd::Zero(KD), Eigen::MatrixXd::Identity(KD, KD), std::nullopt,
                        Eigen::MatrixXd::Identity(cfg.dofs, cfg.dofs)};
  const auto prior = NIWPrior::maximum_likelihood(KD);
  const auto exact = em_train(demos, basis, cfg.dofs, prior, opts).second;
  const auto approx = em_train_approx(demos, basis, cfg.dofs, prior, opts).second;

  StudyResult r;
  r.name = "emcurve";
  r.x_label = "iteration";
  r.seed = cfg.seed;
  r.columns = {"exact", "approx"};
  r.config = {{"demos", std::to_string(cfg.demos)},
              {"dofs", std::to_string(cfg.dofs)},
              {"noise", fmt(cfg.noise)},
              {"missing", fmt(cfg.missing)}};
  const auto n = std::min(exact.objective_trace.size(), approx.objective_trace.size());
  for (std::size_t i = 0; i < n; ++i)
    r.records.push_back({static_cast<double>(i), {exact.objective_trace[i], approx.objective_trace[i]}});
  return r;
}

namespace {

ProMP random_promp(int K, int D, std::mt19937_64& rng) {
  ProMP p = ProMP::initial(BasisConfig::make(K - 2, 1), D);
  const int n = K * D;
  std::normal_distribution<double> normal(0.0, 1.0);
  p.mu_w = random_vector(n, 0.3, rng);
  Eigen::MatrixXd A(n, n);
  for (auto& v : A.reshaped()) v = normal(rng);
  p.Sigma_w = 1e-2 * (A * A.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n));
  p.Sigma_y = 1e-6 * Eigen::MatrixXd::Identity(D, D);
  return p;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(std::max<std::size_t>(v.size() - 1, 1)))};
}

}  // namespace

StudyResult latency_bench(const LatencyConfig& cfg) {
  if (cfg.reps < 1) throw InputError("latency bench needs at least one repetition");
  constexpr int D = 7;
  using clock = std::chrono::steady_clock;
  StudyResult r;
  r.name = "latency";
  r.x_label = "KD";
  r.seed = cfg.seed;
  r.columns = {"joint_mean", "joint_std", "task_mean", "task_std"};
  r.config = {{"reps", std::to_string(cfg.reps)}, {"D", std::to_string(D)}};
  std::mt19937_64 rng(cfg.seed);
  const PlanarArm arm(std::vector<double>(D, 0.15));
  double sink = 0.0;
  for (int kd : cfg.sizes) {
    if (kd % D != 0 || kd / D < 3) throw InputError("latency sizes must be multiples of 7, >= 21");
    const ProMP p = random_promp(kd / D, D, rng);
    const Eigen::VectorXd q = marginal_at(p, 0.5).mean + random_vector(D, 0.05, rng);
    GaussianState x = task_distribution(p, 0.5, arm);
    x.mean += random_vector(2, 0.02, rng);
    x.cov = 1e-4 * Eigen::MatrixXd::Identity(2, 2);

    std::vector<double> joint, task;
    joint.reserve(static_cast<std::size_t>(cfg.reps));
    task.reserve(static_cast<std::size_t>(cfg.reps));
    for (int i = 0; i < cfg.reps; ++i) {
      const auto t0 = clock::now();
      const ProMP c = condition_point(p, 0.5, q);
      const auto t1 = clock::now();
      sink += c.mu_w[0];
      joint.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    for (int i = 0; i < cfg.reps; ++i) {
      const auto t0 = clock::now();
      const ProMP c = condition_task(p, {0.5, x}, arm).first;
      const auto t1 = clock::now();
      sink += c.mu_w[0];
      task.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    const auto [jm, js] = mean_std(joint);
    const auto [tm, ts] = mean_std(task);
    r.records.push_back({static_cast<double>(kd), {jm, js, tm, ts}});
  }
  if (!std::isfinite(sink)) r.config.emplace_back("warning", "non-finite conditioned mean");
  return r;
}

BootstrapResult bootstrap_rates(const std::vector<bool>& outcomes, int n_resamples,
                                int sample_size, std::uint64_t seed) {
  if (outcomes.empty()) throw InputError("bootstrap needs at least one outcome");
  if (n_resamples < 1 || sample_size < 1)
    throw InputError("bootstrap needs positive resample count and sample size");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, outcomes.size() - 1);
  BootstrapResult out;
  out.histogram.assign(static_cast<std::size_t>(sample_size) + 1, 0);
  out.rates.reserve(static_cast<std::size_t>(n_resamples));
  for (int r = 0; r < n_resamples; ++r) {
    int hits = 0;
    for (int i = 0; i < sample_size; ++i) hits += outcomes[pick(rng)] ? 1 : 0;
    ++out.histogram[static_cast<std::size_t>(hits)];
    out.rates.push_back(static_cast<double>(hits) / sample_size);
  }
  std::vector<double> sorted = out.rates;
  std::sort(sorted.begin(), sorted.end());
  for (double v : sorted) out.mean += v;
  out.mean /= static_cast<double>(sorted.size());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double a = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? (1.0 - a) * sorted[i] + a * sorted[i + 1] : sorted[i];
  };
  out.lower = quantile(0.05);
  out.upper = quantile(0.95);
  return out;
}

StudyResult bootstrap_study(const std::vector<bool>& outcomes, int n_resamples, int sample_size,
                            std::uint64_t seed) {
  const auto b = bootstrap_rates(outcomes, n_resamples, sample_size, seed);
  StudyResult r;
  r.name = "bootstrap";
  r.x_label = "rate";
  r.seed = seed;
  r.columns = {"count", "fraction"};
  r.config = {{"resamples", std::to_string(n_resamples)},
              {"sample_size", std::to_string(sample_size)},
              {"mean", fmt(b.mean)},
              {"lower90", fmt(b.lower)},
              {"upper90", fmt(b.upper)}};
  for (std::size_t k = 0; k < b.histogram.size(); ++k)
    r.records.push_back({static_cast<double>(k) / sample_size,
                         {static_cast<double>(b.histogram[k]),
                          static_cast<double>(b.histogram[k]) / n_resamples}});
  return r;
}

}  // namespace promp::experiments
