#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "promp/adaptation.hpp"
#include "promp/errors.hpp"
#include "promp/experiments.hpp"
#include "promp/io.hpp"
#include "promp/kinematics.hpp"
#include "promp/tabletennis.hpp"
#include "promp/training.hpp"

namespace {

using namespace promp;

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitAdaptation = 4;

struct Globals {
  std::uint64_t seed = 1;
  std::string out;
};

// Writes to --out, or stdout when unset.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw InputError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string require_out(const Globals& g, const std::string& verb) {
  if (g.out.empty()) throw InputError(verb + " needs --out");
  return g.out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// n values give a diagonal, n*n a full row-major matrix.
Eigen::MatrixXd to_cov(const std::vector<double>& v, int n, const std::string& what) {
  if (static_cast<int>(v.size()) == n) return to_vector(v).asDiagonal();
  if (static_cast<int>(v.size()) == n * n) {
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = v[static_cast<std::size_t>(i * n + j)];
    return m;
  }
  throw DimensionError(what + " needs " + std::to_string(n) + " (diagonal) or " +
                       std::to_string(n * n) + " (full) values, got " + std::to_string(v.size()));
}

std::vector<double> phase_grid(int steps) {
  if (steps < 2) throw InputError("--steps must be at least 2");
  std::vector<double> z(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) z[static_cast<std::size_t>(i)] = static_cast<double>(i) / (steps - 1);
  return z;
}

std::unique_ptr<ForwardKinematics> load_arm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 1, static_cast<int>(e.byte));
  }
  return make_kinematics(j);
}

// ---- train ----

struct TrainArgs {
  std::vector<std::string> demos;
  std::string prior = "map";
  int k = 5;
  double lambda = 0.0;
  double tol = 1e-6;
  int max_iter = 200;
  double k0 = 0.0;
  double v0 = std::numeric_limits<double>::quiet_NaN();
  bool diagonal_noise = false;
};

int run_train(const TrainArgs& a, const Globals& g) {
  std::vector<std::filesystem::path> paths(a.demos.begin(), a.demos.end());
  const auto demos = io::load_demos(paths);
  if (demos.empty()) throw InputError("no demonstrations loaded");
  if (a.k < 3) throw InputError("--k must be at least 3 (two polynomial terms plus RBFs)");
  const BasisConfig basis = BasisConfig::make(a.k - 2, 1);
  const int dofs = demos.front().dofs();
  const int n = basis.num_features() * dofs;

  TrainOptions opts;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  opts.diagonal_noise = a.diagonal_noise;

  std::pair<ProMP, TrainReport> result;
  if (a.prior == "ls") {
    result = least_squares_train(demos, basis, dofs, a.lambda);
  } else if (a.prior == "map") {
    NIWPrior prior = NIWPrior::standard(n);
    prior.k0 = a.k0;
    if (!std::isnan(a.v0)) prior.v0 = a.v0;
    result = em_train(demos, basis, dofs, prior, opts);
  } else {
    opts.blockdiag_sigma = a.prior == "mle-blockdiag";
    result = em_train(demos, basis, dofs, NIWPrior::maximum_likelihood(n), opts);
  }
  const auto& [model, report] = result;
  io::save_model(require_out(g, "train"), model);
  std::cout << "trained " << a.prior << " on " << demos.size() << " demos, D=" << dofs
            << " KD=" << n << " iterations=" << report.iterations
            << " converged=" << (report.converged ? "yes" : "no");
  if (!report.objective_trace.empty()) std::cout << " objective=" << report.objective_trace.back();
  std::cout << " rank(Sigma_w)=" << report.sigma_w_rank << "\n";
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

// ---- condition ----

struct ConditionArgs {
  std::string model;
  double at = 0.0;
  std::vector<double> joint, cov, task, task_cov;
  int order = 0;
  std::string arm;
};

int run_condition(const ConditionArgs& a, const Globals& g) {
  const ProMP p = io::load_model(a.model);
  ProMP out;
  if (!a.joint.empty() == !a.task.empty())
    throw InputError("give exactly one of --joint or --task");
  if (!a.joint.empty()) {
    JointTarget t{a.at, a.order, to_vector(a.joint), std::nullopt};
    if (!a.cov.empty()) t.cov = to_cov(a.cov, p.dofs, "--cov");
    out = condition(p, t);
  } else {
    if (a.arm.empty()) throw InputError("--task needs --arm <kinematics.json>");
    const auto fk = load_arm(a.arm);
    const int x = static_cast<int>(a.task.size());
    if (a.task_cov.empty()) throw InputError("--task needs --task-cov");
    TaskTarget t{a.at, {to_vector(a.task), to_cov(a.task_cov, x, "--task-cov")}};
    auto [adapted, report] = condition_task(p, t, *fk);
    std::cout << "task conditioning: " << report.iterations << " Newton steps, relative gradient "
              << report.relative_grad_norm << (report.full_hessian ? " (full Hessian)" : " (Gauss-Newton)")
              << "\n";
    out = std::move(adapted);
  }
  io::save_model(require_out(g, "condition"), out);
  return 0;
}

// ---- sample / marginal ----

int run_sample(const std::string& model, int n, int steps, const Globals& g) {
  const ProMP p = io::load_model(model);
  const auto z = phase_grid(steps);
  Output o(g.out);
  auto& os = o.stream();
  os << "sample,z";
  for (int j = 0; j < p.dofs; ++j) os << ",q" << j;
  os << '\n' << std::setprecision(17);
  for (int s = 0; s < n; ++s) {
    const Eigen::MatrixXd y = sample_trajectory(p, z, g.seed + static_cast<std::uint64_t>(s));
    for (std::size_t i = 0; i < z.size(); ++i) {
      os << s << ',' << z[i];
      for (int j = 0; j < p.dofs; ++j) os << ',' << y(static_cast<Eigen::Index>(i), j);
      os << '\n';
    }
  }
  return 0;
}

int run_marginal(const std::string& model, int steps, int order, const Globals& g) {
  const ProMP p = io::load_model(model);
  Output o(g.out);
  auto& os = o.stream();
  os << 'z';
  for (int j = 0; j < p.dofs; ++j) os << ",mean_q" << j;
  for (int j = 0; j < p.dofs; ++j) os << ",std_q" << j;
  os << '\n' << std::setprecision(17);
  for (double z : phase_grid(steps)) {
    const GaussianState m = marginal_at(p, z, order);
    os << z;
    for (int j = 0; j < p.dofs; ++j) os << ',' << m.mean[j];
    for (int j = 0; j < p.dofs; ++j) os << ',' << std::sqrt(m.cov(j, j));
    os << '\n';
  }
  return 0;
}

// ---- segment ----

struct SegmentArgs {
  std::string demo;
  std::vector<double> hits;
  double zero_fraction = 0.01;
  int smoothing = 1;
  int min_segments = 6;
};

int run_segment(const SegmentArgs& a, const Globals& g) {
  const auto demos = io::load_demos(a.demo);
  if (demos.size() != 1) throw InputError("segment expects a file holding one recording");
  io::SegmentOptions opts{a.zero_fraction, a.smoothing};
  const auto rep = io::segment_strikes(demos.front(), a.hits, opts);
  for (const auto& m : rep.messages) std::cerr << m << "\n";
  std::cout << rep.segments.size() << " segments kept, " << rep.dropped.size() << " dropped\n";
  io::require_segments(rep, a.min_segments);
  io::save_demos(require_out(g, "segment"), rep.segments);
  return 0;
}

// ---- tt-sim ----

struct TtArgs {
  std::string model;
  std::string arm;
  int trials = 50;
  std::string replan = "on";
  std::string hit_prior = "gaussian";
  double duration = 0.5;
};

int run_tt(const TtArgs& a, const Globals& g) {
  if (a.trials < 1) throw InputError("--trials must be positive");
  tt::StrikeSetup setup;
  std::unique_ptr<ForwardKinematics> custom_arm;
  tt::TrialOptions opts;
  if (a.model.empty()) {
    setup = tt::make_strike_setup(g.seed);
    opts = tt::trial_options(setup);
  } else {
    setup.promp = io::load_model(a.model);
    setup.mean_duration = a.duration;
  }
  const ForwardKinematics* fk = &setup.arm;
  if (!a.arm.empty()) {
    custom_arm = load_arm(a.arm);
    fk = custom_arm.get();
  }
  if (fk->output_dim() != 3) throw InputError("tt-sim needs a kinematics with 3-D output");
  if (!a.model.empty() || !a.arm.empty()) {
    setup.scene = tt::make_scene(setup.promp, *fk);
    opts.model = setup.scene.sim.model;
    opts.duration = setup.mean_duration;
  }
  if (a.replan != "on" && a.replan != "off") throw InputError("--replan must be on or off");
  opts.replan = a.replan == "on";
  if (a.hit_prior != "gaussian" && a.hit_prior != "uniform")
    throw InputError("--hit-prior must be gaussian or uniform");
  opts.prior.uniform = a.hit_prior == "uniform";

  Output o(g.out);
  auto& os = o.stream();
  os << "trial,hit,no_move,min_distance,t0,replans\n" << std::setprecision(10);
  std::vector<bool> hits;
  for (int i = 0; i < a.trials; ++i) {
    const auto ball = tt::trial_ball(setup.scene, g.seed * 1000003ULL + static_cast<std::uint64_t>(i));
    const auto r = tt::play_trial(setup.promp, *fk, ball, opts);
    hits.push_back(r.hit);
    os << i << ',' << (r.hit ? 1 : 0) << ',' << (r.no_move ? 1 : 0) << ',' << r.min_distance << ','
       << r.start_time << ',' << r.replans << '\n';
  }
  const auto boot = experiments::bootstrap_rates(hits, 5000, 50, g.seed);
  std::size_t n_hit = 0;
  for (bool h : hits) n_hit += h ? 1 : 0;
  std::cerr << "hit rate " << static_cast<double>(n_hit) / static_cast<double>(hits.size())
            << " (bootstrap 90% interval " << boot.lower << " to " << boot.upper << ")\n";
  return 0;
}

// ---- exp / bench ----

std::vector<bool> read_outcomes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty outcome file", 1, 1);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) header.push_back(f);
  }
  std::size_t col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == "hit") col = i;
  if (col == header.size()) throw ParseError("outcome file needs a 'hit' column", 1, 1);
  std::vector<bool> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    for (std::size_t i = 0; i <= col; ++i)
      if (!std::getline(ss, f, ',')) throw ParseError("missing 'hit' field", line_no, 1);
    if (f != "0" && f != "1") throw ParseError("hit must be 0 or 1", line_no, static_cast<int>(col) + 1);
    out.push_back(f == "1");
  }
  return out;
}

struct ExpArgs {
  std::string study;
  bool plot_data = false;
  int n_max = 0;
  std::string input;
  int resamples = 5000;
  int sample_size = 50;
  int reps = 1000;
};

int run_exp(const ExpArgs& a, const Globals& g) {
  experiments::StudyResult r;
  if (a.study == "condnum") {
    experiments::CondnumConfig cfg;
    cfg.seed = g.seed;
    if (a.n_max > 0) cfg.n_max = a.n_max;
    r = experiments::condnum_study(experiments::correlated_generator(7, g.seed), cfg);
  } else if (a.study == "convergence") {
    experiments::ConvergenceConfig cfg;
    cfg.seed = g.seed;
    if (a.n_max > 0) cfg.n_max = a.n_max;
    r = experiments::convergence_study(experiments::sum_difference_generator(g.seed), cfg);
  } else if (a.study == "emcurve") {
    experiments::EmCurveConfig cfg;
    cfg.seed = g.seed;
    r = experiments::em_curve_study(cfg);
  } else if (a.study == "latency") {
    experiments::LatencyConfig cfg;
    cfg.seed = g.seed;
    cfg.reps = a.reps;
    r = experiments::latency_bench(cfg);
  } else if (a.study == "bootstrap") {
    if (a.input.empty()) throw InputError("bootstrap needs --input <trials.csv> with a 'hit' column");
    r = experiments::bootstrap_study(read_outcomes(a.input), a.resamples, a.sample_size, g.seed);
  } else {
    throw InputError("unknown study '" + a.study + "'");
  }
  Output o(g.out);
  r.write_csv(o.stream(), a.plot_data);
  return 0;
}

int run_bench(int reps, const std::vector<int>& sizes, const Globals& g) {
  // Published reference times, milliseconds.
  const std::vector<std::pair<int, std::pair<double, double>>> reference = {
      {35, {0.0448, 0.7212}},  {70, {0.0642, 0.8328}},  {140, {0.1880, 1.0764}},
      {210, {0.5294, 1.4291}}, {280, {0.8686, 1.9267}}, {350, {1.2095, 2.3173}}};
  experiments::LatencyConfig cfg;
  cfg.reps = reps;
  cfg.seed = g.seed;
  if (!sizes.empty()) cfg.sizes = sizes;
  const auto r = experiments::latency_bench(cfg);
  std::cout << std::setw(5) << "KD" << std::setw(14) << "joint ms" << std::setw(14) << "task ms"
            << std::setw(12) << "joint/ref" << std::setw(12) << "task/ref" << "\n";
  for (const auto& rec : r.records) {
    std::cout << std::setw(5) << rec.x << std::setw(14) << rec.values[0] << std::setw(14)
              << rec.values[2];
    for (const auto& [kd, ref] : reference)
      if (kd == static_cast<int>(rec.x))
        std::cout << std::setw(12) << rec.values[0] / ref.first << std::setw(12)
                  << rec.values[2] / ref.second;
    std::cout << "\n";
  }
  if (!g.out.empty()) {
    Output o(g.out);
    r.write_csv(o.stream());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic movement primitives: training, adaptation and experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output file (stdout when omitted for tables)");
  app.set_config("--config", "", "INI/TOML file with option values");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Fit a ProMP to demonstrations");
  train->add_option("demos", ta.demos, "Demo files (.csv or .json)")->required();
  train->add_option("--prior", ta.prior)->check(CLI::IsMember({"map", "mle", "mle-blockdiag", "ls"}));
  train->add_option("--k", ta.k, "Basis functions per joint");
  train->add_option("--lambda", ta.lambda, "Ridge factor for --prior ls");
  train->add_option("--tol", ta.tol);
  train->add_option("--max-iter", ta.max_iter);
  train->add_option("--k0", ta.k0);
  train->add_option("--v0", ta.v0);
  train->add_flag("--diagonal-noise", ta.diagonal_noise);

  ConditionArgs ca;
  auto* cond = app.add_subcommand("condition", "Condition a ProMP on a joint or task target");
  cond->add_option("model", ca.model)->required();
  cond->add_option("--at", ca.at, "Phase in [0,1]")->required();
  cond->add_option("--joint", ca.joint)->delimiter(',');
  cond->add_option("--order", ca.order)->check(CLI::Range(0, 2));
  cond->add_option("--cov", ca.cov)->delimiter(',');
  cond->add_option("--task", ca.task)->delimiter(',');
  cond->add_option("--task-cov", ca.task_cov)->delimiter(',');
  cond->add_option("--arm", ca.arm, "Kinematics JSON");

  std::string model;
  int n_samples = 1, steps = 101, order = 0;
  auto* sample = app.add_subcommand("sample", "Draw trajectories");
  sample->add_option("model", model)->required();
  sample->add_option("--n", n_samples);
  sample->add_option("--steps", steps);

  auto* marginal = app.add_subcommand("marginal", "Per-joint mean and std over the phase");
  marginal->add_option("model", model)->required();
  marginal->add_option("--steps", steps);
  marginal->add_option("--order", order)->check(CLI::Range(0, 2));

  SegmentArgs sa;
  auto* segment = app.add_subcommand("segment", "Cut strikes around hit times");
  segment->add_option("demo", sa.demo)->required();
  segment->add_option("--hits", sa.hits)->delimiter(',')->required();
  segment->add_option("--zero-fraction", sa.zero_fraction);
  segment->add_option("--smoothing", sa.smoothing);
  segment->add_option("--min-segments", sa.min_segments);

  TtArgs tta;
  auto* tts = app.add_subcommand("tt-sim", "Simulated table-tennis trials");
  tts->add_option("--model", tta.model, "Model JSON (default: trained on synthetic strikes)");
  tts->add_option("--arm", tta.arm, "Kinematics JSON with 3-D output");
  tts->add_option("--trials", tta.trials);
  tts->add_option("--replan", tta.replan);
  tts->add_option("--hit-prior", tta.hit_prior);
  tts->add_option("--duration", tta.duration, "Movement duration with --model");

  ExpArgs ea;
  auto* exp = app.add_subcommand("exp", "Reproduction studies");
  exp->add_option("study", ea.study)
      ->required()
      ->check(CLI::IsMember({"condnum", "convergence", "emcurve", "latency", "bootstrap"}));
  exp->add_flag("--plot-data", ea.plot_data);
  exp->add_option("--n-max", ea.n_max);
  exp->add_option("--input", ea.input, "Trial outcomes for bootstrap");
  exp->add_option("--resamples", ea.resamples);
  exp->add_option("--sample-size", ea.sample_size);
  exp->add_option("--reps", ea.reps);

  int bench_reps = 1000;
  std::vector<int> bench_sizes;
  auto* bench = app.add_subcommand("bench", "Conditioning latency");
  bench->add_option("--reps", bench_reps);
  bench->add_option("--sizes", bench_sizes)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*train) return run_train(ta, g);
    if (*cond) return run_condition(ca, g);
    if (*sample) return run_sample(model, n_samples, steps, g);
    if (*marginal) return run_marginal(model, steps, order, g);
    if (*segment) return run_segment(sa, g);
    if (*tts) return run_tt(tta, g);
    if (*exp) return run_exp(ea, g);
    if (*bench) return run_bench(bench_reps, bench_sizes, g);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const AdaptationError& e) {
    std::cerr << "adaptation failed: " << e.what() << "\n";
    return kExitAdaptation;
  }
  return kExitInput;
}
