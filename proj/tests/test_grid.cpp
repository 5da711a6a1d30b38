#include <cmath>

#include "amv/grid.hpp"
#include "amv/rng.hpp"
#include "doctest.h"

using namespace amv;

TEST_CASE("pressure grid construction") {
  const PressureGrid g =
      build_pressure_grid({1000, 950, 900, 850, 800, 700, 600, 500, 400});
  CHECK(g.K() == 8);
  const std::vector<double> want = {50, 50, 50, 50, 100, 100, 100, 100};
  for (int k = 0; k < 8; ++k) CHECK(g.increments[k] == doctest::Approx(want[k]).epsilon(1e-14));

  const PressureGrid tiny = build_pressure_grid({1000, 500, 0.5});
  CHECK(tiny.K() == 2);
  CHECK(tiny.increments[0] == doctest::Approx(500.0));
  CHECK(tiny.increments[1] == doctest::Approx(499.5));

  CHECK_THROWS_AS(build_pressure_grid({1000, 950, 950}), NonMonotoneLevels);
  CHECK_THROWS_AS(build_pressure_grid({1000, 950}), NonMonotoneLevels);
}

TEST_CASE("grid shape must be power of two") {
  CHECK_THROWS_AS(GridShape(24, 32), InvalidSpec);
  const GridShape s(4, 8);
  CHECK(s.m() == 32);
  CHECK(s.x_of(s.index(3, 2)) == 3);
  CHECK(s.y_of(s.index(3, 2)) == 2);
}

namespace {

ImageStack random_stack(const PressureGrid& grid, const GridShape& shape, Time t,
                        std::uint64_t seed) {
  ImageStack s(grid, shape, t);
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = rng.normal(i);
  return s;
}

}  // namespace

TEST_CASE("observation synthesis") {
  const PressureGrid grid = build_pressure_grid({1000, 700, 400});
  const GridShape shape(64, 64);
  const int m = shape.m();
  const ImageStack t0 = random_stack(grid, shape, Time::T0, 1);
  const ImageStack t1 = random_stack(grid, shape, Time::T1, 2);
  std::vector<std::uint8_t> full(static_cast<std::size_t>(2) * m, 1);

  SUBCASE("zero noise reproduces the truth exactly") {
    const ObservationSet obs = synthesize_observations(t0, t1, full, full, 0.0, 7);
    for (std::size_t i = 0; i < obs.y0.size(); ++i) {
      CHECK(obs.y0[i] == t0.values[i]);
      CHECK(obs.y1[i] == t1.values[i]);
    }
  }

  SUBCASE("fixed seed is bit-reproducible") {
    const ObservationSet a = synthesize_observations(t0, t1, full, full, 1.0, 42);
    const ObservationSet b = synthesize_observations(t0, t1, full, full, 1.0, 42);
    CHECK(a.y0 == b.y0);
    CHECK(a.y1 == b.y1);
  }

  SUBCASE("noise matches its law on 4096 entries") {
    const ObservationSet obs = synthesize_observations(t0, t1, full, full, 1.0, 3);
    double sum = 0.0, sum2 = 0.0;
    for (int j = 0; j < m; ++j) {
      const double e = obs.y0[j] - t0.values[j];  // layer 0, channel 0
      sum += e;
      sum2 += e * e;
    }
    const double mean = sum / m;
    const double stdev = std::sqrt(sum2 / m - mean * mean);
    CHECK(std::fabs(mean) < 5.0 / std::sqrt(static_cast<double>(m)));
    CHECK(stdev == doctest::Approx(1.0).epsilon(0.05));
  }

  SUBCASE("masked entries carry the sentinel and ignore the truth there") {
    std::vector<std::uint8_t> holey = full;
    for (int j = 0; j < m; j += 3) holey[j] = 0;
    const ObservationSet a = synthesize_observations(t0, t1, holey, full, 0.5, 9);
    ImageStack t0b = t0;
    for (int j = 0; j < m; j += 3) t0b.at(0, 1, j) += 100.0;  // masked pixels only
    const ObservationSet b = synthesize_observations(t0b, t1, holey, full, 0.5, 9);
    for (int j = 0; j < m; ++j) {
      if (j % 3 == 0) {
        CHECK(std::isnan(a.y0[m + j]));
        CHECK(std::isnan(b.y0[m + j]));
      } else {
        CHECK(a.y0[m + j] == b.y0[m + j]);
      }
    }
  }

  SUBCASE("shape mismatch is rejected") {
    std::vector<std::uint8_t> bad(static_cast<std::size_t>(2) * m - 1, 1);
    CHECK_THROWS_AS(synthesize_observations(t0, t1, bad, full, 0.1, 1), ShapeMismatch);
  }
}

TEST_CASE("theta packing") {
  SUBCASE("dimension formula") {
    CHECK(theta_dim(8, GridShape(256, 256)) == 3080192u);
    CHECK(theta_dim(2, GridShape(2, 2)) == 44u);
  }

  SUBCASE("round trip and boundary winds") {
    const GridShape shape(8, 8);
    const int K = 3;
    AMVState s(K, shape);
    const CounterRng rng(11);
    std::uint64_t ctr = 0;
    for (auto& v : s.d) v = rng.normal(ctr++);
    for (auto& v : s.c) v = rng.normal(ctr++);
    for (int level = 1; level < K; ++level)
      for (int j = 0; j < shape.m(); ++j) s.w_level(level)[j] = rng.normal(ctr++);

    const std::vector<double> theta = pack_theta(s);
    CHECK(theta.size() == theta_dim(K, shape));
    const AMVState r = unpack_theta(theta, K, shape);
    CHECK(r.d == s.d);
    CHECK(r.c == s.c);
    CHECK(r.w == s.w);
    for (int j = 0; j < shape.m(); ++j) {
      CHECK(r.w_level(0)[j] == 0.0);
      CHECK(r.w_level(K)[j] == 0.0);
    }
    CHECK_THROWS_AS(unpack_theta(theta, K + 1, shape), ShapeMismatch);
  }
}
