#include "core/channel_sim.hpp"

#include "doctest.h"

#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace spoofdet;

namespace {

// Single explicit ray so rss_true has a closed form.
MultipathModel one_ray_model(double gain_re, double gain_im, const Point3& scatterer,
                             double alpha, double noise) {
  MultipathModelConfig cfg;
  ReceiverSpec rx;
  rx.position = {0.0, 0.0, 0.0};
  rx.antenna_offsets = {{0.0, 0.0, 0.0}};
  rx.noise_power = noise;
  cfg.receivers = {rx};
  cfg.alpha = alpha;
  cfg.rays = {{Ray{{gain_re, gain_im}, scatterer}}};
  return MultipathModel(std::move(cfg));
}

MultipathModel two_ray_model(std::complex<double> g0, std::complex<double> g1,
                             const Point3& scatterer) {
  MultipathModelConfig cfg;
  ReceiverSpec rx;
  rx.position = {0.0, 0.0, 0.0};
  rx.antenna_offsets = {{0.0, 0.0, 0.0}};
  rx.noise_power = 0.0;
  cfg.receivers = {rx};
  cfg.alpha = 2.0;
  cfg.rays = {{Ray{g0, scatterer}, Ray{g1, scatterer}}};
  return MultipathModel(std::move(cfg));
}

}  // namespace

TEST_CASE("point arithmetic and distance") {
  Point3 a{1.0, 2.0, 3.0}, b{4.0, 6.0, 3.0};
  CHECK(distance(a, b) == doctest::Approx(5.0));
  CHECK((a + b).y == doctest::Approx(8.0));
  CHECK((b - a).x == doctest::Approx(3.0));
  CHECK((a * 2.0).z == doctest::Approx(6.0));
  CHECK(a.finite());
  CHECK_FALSE(Point3{1.0, std::nan(""), 0.0}.finite());
}

TEST_CASE("rss_true free-space unit case") {
  // Ray from transmitter at distance 1 m: amplitude 1^-1 = 1, power 1.
  auto m = one_ray_model(1.0, 0.0, {0.0, 0.0, 0.0}, 2.0, 0.0);
  CHECK(m.rss_true({1.0, 0.0, 0.0}, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rss_true coherent and destructive two-ray sums") {
  // Both rays share a path, so phases are equal; amplitude at 1 m is 1 each.
  auto constructive = two_ray_model({1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0, 0.0});
  CHECK(constructive.rss_true({1.0, 0.0, 0.0}, 0) == doctest::Approx(4.0).epsilon(1e-12));

  auto destructive = two_ray_model({1.0, 0.0}, {-1.0, 0.0}, {0.0, 0.0, 0.0});
  CHECK(destructive.rss_true({1.0, 0.0, 0.0}, 0) == doctest::Approx(0.0));
}

TEST_CASE("rss_true adds noise power and validates antenna index") {
  auto m = one_ray_model(1.0, 0.0, {0.0, 0.0, 0.0}, 2.0, 0.25);
  const double h2 = std::norm(m.channel_gain({1.0, 0.0, 0.0}, 0));
  CHECK(m.rss_true({1.0, 0.0, 0.0}, 0) == doctest::Approx(h2 + 0.25));
  CHECK_THROWS_AS(m.rss_true({1.0, 0.0, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(m.rss_true({1.0, 0.0, 0.0}, -1), std::invalid_argument);
}

TEST_CASE("model construction rejects bad configs") {
  CHECK_THROWS_AS(one_ray_model(1.0, 0.0, {0, 0, 0}, 1.2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(one_ray_model(1.0, 0.0, {0, 0, 0}, 4.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(one_ray_model(1.0, 0.0, {0, 0, 0}, 2.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(one_ray_model(std::nan(""), 0.0, {0, 0, 0}, 2.0, 0.0), std::invalid_argument);
  MultipathModelConfig cfg;
  CHECK_THROWS_AS(MultipathModel{cfg}, std::invalid_argument);  // no receivers
}

TEST_CASE("sample_block determinism and noise-free exactness") {
  auto m = one_ray_model(1.0, 0.0, {0.0, 0.0, 0.0}, 2.0, 0.0);
  Rng rng1 = make_rng(42);
  Rng rng2 = make_rng(42);
  auto b1 = m.sample_block({2.0, 0.0, 0.0}, 0, 64, rng1);
  auto b2 = m.sample_block({2.0, 0.0, 0.0}, 0, 64, rng2);
  CHECK(b1.values == b2.values);
  // Constant-modulus signal over a deterministic channel: every sample equals
  // the true RSS.
  const double truth = m.rss_true({2.0, 0.0, 0.0}, 0);
  for (double v : b1.values) CHECK(v == doctest::Approx(truth).epsilon(1e-12));
  CHECK_THROWS_AS(m.sample_block({2.0, 0.0, 0.0}, 0, 0, rng1), std::invalid_argument);
}

TEST_CASE("sample mean matches analytic mean and variance") {
  // |h e^{j th} + v|^2 with v ~ CN(0, s2): mean |h|^2 + s2,
  // variance 2 |h|^2 s2 + s2^2.
  auto m = one_ray_model(0.8, 0.3, {0.2, 0.1, 0.0}, 2.5, 0.05);
  const Point3 p{1.3, 0.4, 0.2};
  const double h2 = std::norm(m.channel_gain(p, 0));
  const double s2 = 0.05;
  const double mean = h2 + s2;
  const double var = 2.0 * h2 * s2 + s2 * s2;

  Rng rng = make_rng(7);
  const int n = 100000;
  auto block = m.sample_block(p, 0, n, rng);
  double sum = 0.0;
  for (double v : block.values) {
    CHECK(v >= 0.0);
    sum += v;
  }
  const double emp_mean = sum / n;
  const double stderr_mean = std::sqrt(var / n);
  CHECK(std::abs(emp_mean - mean) < 3.0 * stderr_mean);

  double ss = 0.0;
  for (double v : block.values) ss += (v - emp_mean) * (v - emp_mean);
  CHECK(ss / (n - 1) == doctest::Approx(var).epsilon(0.05));
}

TEST_CASE("rss_estimate is the arithmetic mean") {
  CHECK(rss_estimate({{1.0, 1.0, 1.0, 1.0}, 1e-6}) == doctest::Approx(1.0));
  CHECK(rss_estimate({{0.0, 2.0}, 1e-6}) == doctest::Approx(1.0));
  // Brute-force oracle on a random block.
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  SampleBlock b;
  double sum = 0.0;
  for (int i = 0; i < 16; ++i) {
    b.values.push_back(u(rng));
    sum += b.values.back();
  }
  CHECK(rss_estimate(b) == doctest::Approx(sum / 16.0).epsilon(1e-15));
  CHECK_THROWS_AS(rss_estimate({}), std::invalid_argument);
}

TEST_CASE("rss_vector_estimate shape and convergence") {
  auto m = default_environment(5);
  CHECK(m.feature_count() == 16);
  Rng rng = make_rng(9);
  const Point3 p{5.0, 3.0, 1.2};
  Vec v = m.rss_vector_estimate(p, 100000, rng);
  REQUIRE(v.size() == 16);
  for (int a = 0; a < 16; ++a) {
    CHECK(v(a) >= 0.0);
    CHECK(v(a) == doctest::Approx(m.rss_true(p, a)).epsilon(0.05));
  }
}

TEST_CASE("to_db floors tiny powers") {
  CHECK(to_db(1.0) == doctest::Approx(0.0));
  CHECK(to_db(0.1) == doctest::Approx(-10.0));
  CHECK(to_db(0.0) == doctest::Approx(-150.0));
  CHECK(to_db(1e-300) == doctest::Approx(-150.0));
}

TEST_CASE("spatial_profile basics") {
  auto m = one_ray_model(1.0, 0.0, {0.0, 0.0, 0.0}, 2.0, 0.0);
  SUBCASE("single ray gives monotone decreasing dB away from the source") {
    auto rows = m.spatial_profile({{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, 3.0, 0.1}, 0);
    REQUIRE(rows.size() > 10);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].rss_db < rows[i - 1].rss_db);
  }
  SUBCASE("zero-length request yields a single row") {
    auto rows = m.spatial_profile({{1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, 0.0, 0.1}, 0);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].distance_m == 0.0);
  }
  CHECK_THROWS_AS(m.spatial_profile({{1, 0, 0}, {1, 0, 0}, 1.0, 0.0}, 0), std::invalid_argument);
}

TEST_CASE("default environment exhibits small-scale fading") {
  auto m = default_environment(1);
  // A 5 m line at walking height; with 12 rays at 2.3 GHz some 10 cm step
  // must swing harder than some 2 m step does.
  const LineSpec line{{2.5, 3.0, 1.2}, {1.0, 0.0, 0.0}, 5.0, 0.01};
  bool found_sharp = false;
  for (int antenna : {0, 4, 8, 12}) {
    auto rows = m.spatial_profile(line, antenna);
    REQUIRE(rows.size() == 501);
    double max_gap_10cm = 0.0;
    for (std::size_t i = 0; i + 10 < rows.size(); ++i)
      max_gap_10cm = std::max(max_gap_10cm, std::abs(rows[i].rss_db - rows[i + 10].rss_db));
    double min_gap_2m = 1e300;
    for (std::size_t i = 0; i + 200 < rows.size(); ++i)
      min_gap_2m = std::min(min_gap_2m, std::abs(rows[i].rss_db - rows[i + 200].rss_db));
    if (max_gap_10cm > 6.0 && max_gap_10cm > min_gap_2m) found_sharp = true;
  }
  CHECK(found_sharp);
}

TEST_CASE("environment JSON round trip") {
  auto m = default_environment(77);
  const std::string path = "test_env_roundtrip.json";
  save_environment(m, path);
  auto loaded = load_environment(path);
  for (const Point3& p : {Point3{1.0, 1.0, 1.0}, Point3{7.7, 4.2, 0.3}})
    for (int a = 0; a < m.feature_count(); ++a)
      CHECK(loaded.rss_true(p, a) == doctest::Approx(m.rss_true(p, a)).epsilon(1e-14));
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_environment("no_such_env_file.json"), IoError);
  std::ofstream("test_env_bad.json") << "{not json";
  CHECK_THROWS_AS(load_environment("test_env_bad.json"), ParseError);
  std::filesystem::remove("test_env_bad.json");
}
