#include <doctest.h>

#include <sstream>

#include "../oracles.hpp"
#include "promp/experiments.hpp"

using namespace promp;
using namespace promp::experiments;

TEST_SUITE("experiments") {
  TEST_CASE("condition number") {
    CHECK(condition_number(Eigen::Vector3d(1, 4, 10).asDiagonal().toDenseMatrix()) == doctest::Approx(10.0));
    Eigen::Matrix2d s;
    s << 1, 1, 1, 1;
    CHECK(std::isinf(condition_number(s)));
  }

  TEST_CASE("moving median") {
    const std::vector<double> v{5, 1, 4, 2, 3, 100, 0};
    const auto m = moving_median(v, 5);
    REQUIRE(m.size() == v.size());
    CHECK(m[2] == 3.0);  // {5,1,4,2,3}
    CHECK(m[3] == 3.0);  // {1,4,2,3,100}
    CHECK(m[0] == 4.0);  // {5,1,4}
  }

  TEST_CASE("bootstrap of a fixed outcome vector") {
    std::vector<bool> all(40, true);
    const auto r = bootstrap_rates(all, 200, 50, 1);
    CHECK(r.mean == 1.0);
    CHECK(r.lower == 1.0);
    CHECK(r.histogram.back() == 200);

    std::vector<bool> half;
    for (int i = 0; i < 100; ++i) half.push_back(i % 2 == 0);
    const auto h = bootstrap_rates(half, 5000, 50, 2);
    int total = 0;
    for (int c : h.histogram) total += c;
    CHECK(total == 5000);
    CHECK(h.mean == doctest::Approx(0.5).epsilon(0.02));
    // Binomial(50, 0.5) has std 0.0707; the central 90% is about +-1.645 std.
    CHECK(h.lower == doctest::Approx(0.5 - 1.645 * 0.0707).epsilon(0.1));
    CHECK(h.upper == doctest::Approx(0.5 + 1.645 * 0.0707).epsilon(0.1));
    CHECK(h.lower <= h.mean);
    CHECK(h.mean <= h.upper);
  }

  TEST_CASE("generators are seeded and shaped") {
    const auto g = correlated_generator(3, 5);
    CHECK(g.truth.dofs == 3);
    CHECK(g.truth.weight_dim() == 15);
    const auto a = g.generate(4, 9), b = g.generate(4, 9);
    REQUIRE(a.size() == 4);
    CHECK((a[2].joints - b[2].joints).norm() == 0.0);
    CHECK(a[0].num_samples() == g.samples);
    const auto sd = sum_difference_generator(1);
    CHECK(sd.truth.dofs == 4);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sd.truth.Sigma_w);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
  }

  TEST_CASE("missing-data demos leave a gap") {
    EmCurveConfig cfg;
    cfg.demos = 3;
    const auto demos = missing_data_demos(cfg);
    REQUIRE(demos.size() == 3);
    for (const auto& d : demos) {
      d.validate();
      CHECK(d.num_samples() < cfg.samples);
      CHECK(d.num_samples() >= cfg.samples * (1.0 - cfg.missing) - 2);
    }
  }

  TEST_CASE("study output") {
    StudyResult r;
    r.name = "demo";
    r.x_label = "N";
    r.columns = {"a", "b"};
    r.records = {{1, {0.5, 2}}, {2, {0.25, 3}}};
    CHECK(r.xs() == std::vector<double>{1, 2});
    CHECK(r.column("b") == std::vector<double>{2, 3});
    std::ostringstream csv, plot;
    r.write_csv(csv);
    r.write_csv(plot, true);
    CHECK(csv.str().rfind("N,a,b\n", 0) == 0);
    CHECK(plot.str()[0] == '#');
  }

  TEST_CASE("small condition-number sweep behaves") {
    CondnumConfig cfg;
    cfg.n_max = 8;
    const auto r = condnum_study(correlated_generator(2, 1), cfg);
    REQUIRE(r.records.size() == 8);
    const auto ls = r.column("ls_0");
    // KD = 10: least squares has at most N - 1 spread directions.
    for (double v : ls) CHECK(std::isinf(v));
    for (double v : r.column("map")) CHECK(std::isfinite(v));
  }
}
