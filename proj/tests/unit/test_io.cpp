#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "../oracles.hpp"
#include "promp/errors.hpp"
#include "promp/io.hpp"

using namespace promp;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("promp_test_" + name);
}

// Recording with a smooth step around each centre and rest between.
Demonstration strikes(const std::vector<double>& centres, double width, double end) {
  std::vector<double> t;
  Eigen::MatrixXd q(static_cast<int>(end * 100) + 1, 2);
  for (int i = 0; i < q.rows(); ++i) {
    const double s = i / 100.0;
    t.push_back(s);
    double a = 0.0;
    for (double c : centres)
      if (std::abs(s - c) < width) {
        const double u = (s - c + width) / (2.0 * width);
        a += u - std::sin(2.0 * std::numbers::pi * u) / (2.0 * std::numbers::pi);
      } else if (s >= c + width) {
        a += 1.0;
      }
    q(i, 0) = a;
    q(i, 1) = -0.5 * a;
  }
  return Demonstration::from_samples(t, q);
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("CSV demos") {
    const auto d = io::parse_demo_csv("t,q0,q1\n0.0,1,2\n0.5,3,4\n1.0,5,6\n");
    CHECK(d.dofs() == 2);
    CHECK(d.num_samples() == 3);
    CHECK(d.joints(2, 1) == 6.0);
    try {
      io::parse_demo_csv("t,q0\n0,1\n0.5,abc\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == 5);  // character position of the bad field
    }
    CHECK_THROWS_AS(io::parse_demo_csv("t,q0\n0,1\n0.5,1,2\n"), DimensionError);
    CHECK_THROWS_AS(io::parse_demo_csv("t,q0\n0,1\n0,2\n"), TimeOrderError);
    CHECK_THROWS_AS(io::parse_demo_csv("t,q0\n0,1\n"), InputError);
  }

  TEST_CASE("JSON demos round-trip exactly") {
    std::mt19937_64 rng(1);
    ProMP p = ProMP::initial(BasisConfig::standard(), 2);
    p.Sigma_w *= 0.1;
    p.Sigma_y *= 0.01;
    const auto demos = oracle::draw_demos(p, 3, 12, rng);
    const auto path = temp_file("demos.json");
    io::save_demos(path, demos);
    const auto back = io::load_demos(path);
    REQUIRE(back.size() == 3);
    CHECK((back[1].joints - demos[1].joints).norm() == 0.0);
    CHECK(back[1].times == demos[1].times);
    CHECK_THROWS_AS(io::parse_demos_json(R"([{"t":[0,1],"q":[[1],[2]]},{"t":[0,1],"q":[[1,2],[2,3]]}])"),
                    DimensionError);
    CHECK_THROWS_AS(io::parse_demos_json("[{\"t\": [0, 1], "), ParseError);
    std::filesystem::remove(path);
  }

  TEST_CASE("model round-trips exactly") {
    std::mt19937_64 rng(2);
    ProMP p;
    p.basis = BasisConfig::make(4, 1);
    p.dofs = 2;
    p.mu_w = oracle::random_vector(12, rng);
    p.Sigma_w = oracle::random_spd(12, rng);
    p.Sigma_y = oracle::random_spd(2, rng);
    const auto path = temp_file("model.json");
    io::save_model(path, p);
    const ProMP q = io::load_model(path);
    CHECK(q.basis == p.basis);
    CHECK((q.mu_w - p.mu_w).norm() == 0.0);
    CHECK((q.Sigma_w - p.Sigma_w).norm() == 0.0);
    CHECK((q.Sigma_y - p.Sigma_y).norm() == 0.0);
    std::filesystem::remove(path);
    auto j = io::model_to_json(p);
    j["mu_w"].erase(0);
    CHECK_THROWS_AS(io::model_from_json(j), InputError);
  }

  TEST_CASE("joint speed of a linear motion") {
    Eigen::MatrixXd q(5, 2);
    for (int i = 0; i < 5; ++i) q.row(i) << 3.0 * i * 0.1, 4.0 * i * 0.1;
    const auto d = Demonstration::from_samples({0, 0.1, 0.2, 0.3, 0.4}, q);
    const Eigen::VectorXd s = io::joint_speed(d);
    for (int i = 0; i < 5; ++i) CHECK(s[i] == doctest::Approx(5.0));
    const auto z = io::normalize_phase(d);
    CHECK(z.back() == 1.0);
  }

  TEST_CASE("segmentation brackets each strike by rest") {
    const auto rec = strikes({1.0, 2.0, 3.0}, 0.3, 4.0);
    const std::vector<double> hits{1.0, 2.0, 3.0, 5.0};
    const auto rep = io::segment_strikes(rec, hits);
    REQUIRE(rep.segments.size() == 3);
    CHECK(rep.dropped == std::vector<double>{5.0});
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& s = rep.segments[i];
      CHECK(s.times.front() < hits[i]);
      CHECK(s.times.back() > hits[i]);
      CHECK(s.times.front() >= hits[i] - 0.31);
      CHECK(s.times.back() <= hits[i] + 0.31);
      if (i > 0) CHECK(s.times.front() >= rep.segments[i - 1].times.back());
    }
    CHECK_THROWS_AS(io::require_segments(rep, 6), InputError);
    CHECK_NOTHROW(io::require_segments(rep, 3));
  }
}
