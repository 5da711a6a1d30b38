#include <cmath>
#include <numeric>

#include "amv/rng.hpp"
#include "amv/wavelet.hpp"
#include "doctest.h"

using namespace amv;

namespace {

std::vector<double> random_plane(int m, std::uint64_t seed) {
  std::vector<double> v(m);
  const CounterRng rng(seed);
  for (int j = 0; j < m; ++j) v[j] = rng.normal(j);
  return v;
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("filter identities") {
  const double* h = coiflet30_lowpass();
  double sum = 0.0;
  for (int k = 0; k < kFilterTaps; ++k) sum += h[k];
  CHECK(sum == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  for (int shift = 0; shift < kFilterTaps / 2; ++shift) {
    double dot = 0.0;
    for (int k = 0; k + 2 * shift < kFilterTaps; ++k) dot += h[k] * h[k + 2 * shift];
    CHECK(std::fabs(dot - (shift == 0 ? 1.0 : 0.0)) < 1e-14);
  }
}

TEST_CASE("perfect reconstruction and Parseval") {
  for (int n : {16, 32, 64}) {
    const GridShape shape(n, n);
    const WaveletBasis basis(shape);
    const auto x = random_plane(shape.m(), 7 + n);
    std::vector<double> c(shape.m()), back(shape.m());
    fwt2(x.data(), basis, c.data());
    iwt2(c.data(), basis, back.data());
    double worst = 0.0;
    for (int j = 0; j < shape.m(); ++j) worst = std::max(worst, std::fabs(back[j] - x[j]));
    CHECK(worst < 1e-10);
    CHECK(std::fabs(l2(c) - l2(x)) < 1e-10 * std::max(1.0, l2(x)));
  }
}

TEST_CASE("rectangular grids transform too") {
  const GridShape shape(16, 64);
  const WaveletBasis basis(shape);
  const auto x = random_plane(shape.m(), 99);
  std::vector<double> c(shape.m()), back(shape.m());
  fwt2(x.data(), basis, c.data());
  iwt2(c.data(), basis, back.data());
  for (int j = 0; j < shape.m(); ++j) CHECK(std::fabs(back[j] - x[j]) < 1e-10);
}

TEST_CASE("constant image concentrates in the coarse band") {
  const GridShape shape(32, 32);
  const WaveletBasis basis(shape);
  std::vector<double> x(shape.m(), 3.0), c(shape.m());
  fwt2(x.data(), basis, c.data());
  const auto& band = basis.band_map();
  double mass = 0.0;
  for (int j = 0; j < shape.m(); ++j) {
    if (band[j] == 0)
      mass += c[j] * c[j];
    else
      CHECK(std::fabs(c[j]) < 1e-10);
  }
  CHECK(std::sqrt(mass) == doctest::Approx(l2(x)).epsilon(1e-12));
}

TEST_CASE("depth and size validation") {
  CHECK_THROWS_AS(WaveletBasis(GridShape(16, 16), 5), BadDepth);
  CHECK_THROWS_AS(WaveletBasis(GridShape(16, 16), 0), BadDepth);
  GridShape bad;
  bad.rows = 24;
  bad.cols = 32;
  CHECK_THROWS_AS(WaveletBasis(bad, 2), NonPowerOfTwo);
  CHECK(WaveletBasis::default_depth(GridShape(64, 64)) == 4);
  CHECK(WaveletBasis::default_depth(GridShape(16, 16)) == 2);
}

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(5.0, 2.0) == 3.0);
  CHECK(soft_threshold(-1.0, 2.0) == 0.0);
  CHECK(soft_threshold(-5.0, 2.0) == -3.0);
  CHECK_THROWS_AS(soft_threshold(1.0, -0.5), NegativeLambda);

  // brute-force prox oracle: argmin_u lambda |u| + (u - v)^2 / 2
  const CounterRng rng(17);
  double worst = 0.0;
  for (int t = 0; t < 300; ++t) {
    const double v = 20.0 * (rng.uniform(2 * t) - 0.5);
    const double lam = 3.0 * rng.uniform(2 * t + 1);
    double best_u = 0.0, best_f = 1e300;
    for (double u = -14.0; u <= 14.0; u += 1e-3) {
      const double f = lam * std::fabs(u) + 0.5 * (u - v) * (u - v);
      if (f < best_f) {
        best_f = f;
        best_u = u;
      }
    }
    worst = std::max(worst, std::fabs(soft_threshold(v, lam) - best_u));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("prox step") {
  const int K = 3, m = 16;
  std::vector<double> in(static_cast<std::size_t>(K) * 3 * m);
  const CounterRng rng(23);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = rng.normal(i);
  std::vector<double> out(in.size());

  SUBCASE("zero weights are the identity") {
    prox_step(in.data(), K, m, {0.0, 0.0, 0.0}, 2.0, out.data());
    CHECK(out == in);
  }

  SUBCASE("a dominant threshold zeroes everything") {
    prox_step(in.data(), K, m, {100.0, 100.0, 100.0}, 1.0, out.data());
    for (double v : out) CHECK(v == 0.0);
  }

  SUBCASE("entries match the scalar operator with per-layer levels") {
    const std::vector<double> alpha = {0.3, 1.1, 0.02};
    const double rho = 0.7;
    prox_step(in.data(), K, m, alpha, rho, out.data());
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < 3 * m; ++i) {
        const std::size_t idx = static_cast<std::size_t>(k) * 3 * m + i;
        CHECK(out[idx] == soft_threshold(in[idx], alpha[k] / rho));
      }
  }

  SUBCASE("prox point beats random perturbations on the subproblem objective") {
    const std::vector<double> alpha = {0.5, 0.5, 0.5};
    const double rho = 1.3;
    prox_step(in.data(), K, m, alpha, rho, out.data());
    const auto objective = [&](const std::vector<double>& z) {
      double f = 0.0;
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < 3 * m; ++i) {
          const std::size_t idx = static_cast<std::size_t>(k) * 3 * m + i;
          f += alpha[k] * std::fabs(z[idx]) + 0.5 * rho * (z[idx] - in[idx]) * (z[idx] - in[idx]);
        }
      return f;
    };
    const double fstar = objective(out);
    const CounterRng prng(29);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> z = out;
      for (std::size_t i = 0; i < z.size(); ++i)
        z[i] += 1e-3 * prng.normal(static_cast<std::uint64_t>(t) * z.size() + i);
      CHECK(objective(z) >= fstar - 1e-12);
    }
  }

  SUBCASE("rho must be positive") {
    CHECK_THROWS_AS(prox_step(in.data(), K, m, {1.0, 1.0, 1.0}, 0.0, out.data()),
                    NonPositiveRho);
  }
}

TEST_CASE("scale schedules") {
  const GridShape shape(64, 64);
  const WaveletBasis basis(shape);  // 5 bands
  const ScaleSchedule sched = default_schedule(basis.num_bands());
  sched.validate(basis.num_bands());
  CHECK(sched.active_bands.back() == basis.num_bands());

  const auto x = random_plane(shape.m(), 31);

  SUBCASE("final stage touches nothing") {
    auto c = x;
    restrict_to_schedule(c.data(), basis, sched, sched.stages() - 1);
    CHECK(c == x);
  }

  SUBCASE("stage zero keeps only the coarsest bands") {
    auto c = x;
    restrict_to_schedule(c.data(), basis, sched, 0);
    const auto& band = basis.band_map();
    for (int j = 0; j < shape.m(); ++j) {
      if (band[j] >= sched.active_bands[0])
        CHECK(c[j] == 0.0);
      else
        CHECK(c[j] == x[j]);
    }
  }

  SUBCASE("restrictions nest") {
    for (int s = 0; s + 1 < sched.stages(); ++s) {
      auto once = x;
      restrict_to_schedule(once.data(), basis, sched, s);
      auto twice = once;
      restrict_to_schedule(twice.data(), basis, sched, s + 1);
      CHECK(twice == once);  // later stages keep everything an earlier stage kept
      auto again = once;
      restrict_to_schedule(again.data(), basis, sched, s);
      CHECK(again == once);  // idempotent
    }
  }

  SUBCASE("bad stages are rejected") {
    auto c = x;
    CHECK_THROWS_AS(restrict_to_schedule(c.data(), basis, sched, 99), BadStage);
    ScaleSchedule bad;
    bad.active_bands = {3, 2, 5};
    CHECK_THROWS_AS(bad.validate(basis.num_bands()), BadStage);
    ScaleSchedule incomplete;
    incomplete.active_bands = {1, 2};
    CHECK_THROWS_AS(incomplete.validate(basis.num_bands()), BadStage);
  }
}
