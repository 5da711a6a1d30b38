#include <cmath>
#include <cstring>

#include "amv/energy.hpp"
#include "amv/eval.hpp"
#include "amv/rng.hpp"
#include "amv/synth.hpp"
#include "doctest.h"

using namespace amv;

TEST_CASE("generated truth satisfies the model") {
  SyntheticSpec spec;
  spec.rows = spec.cols = 32;
  spec.levels = {1000, 850, 700, 550, 400};
  spec.seed = 11;

  SUBCASE("zero amplitude is a static scene") {
    SyntheticSpec s2 = spec;
    s2.amplitude = 0.0;
    PressureGrid grid;
    AMVState truth;
    ImageStack x0, x1;
    PhysicsConstants gamma;
    generate_truth(s2, &grid, &truth, &x0, &x1, &gamma);
    for (double v : truth.d) CHECK(v == 0.0);
    for (double v : truth.w) CHECK(v == 0.0);
    CHECK(x0.values == x1.values);
  }

  SUBCASE("balanced flows are hydrostatically feasible") {
    PressureGrid grid;
    AMVState truth;
    ImageStack x0, x1;
    PhysicsConstants gamma;
    generate_truth(spec, &grid, &truth, &x0, &x1, &gamma);
    const std::vector<double> res = hydrostatic_residual(truth, grid);
    std::vector<double> dd(res.size());
    apply_D(truth.d.data(), grid.K(), truth.shape, grid, dd.data());
    double rn = 0.0, dn = 0.0;
    for (std::size_t i = 0; i < res.size(); ++i) {
      rn += res[i] * res[i];
      dn += dd[i] * dd[i];
    }
    CHECK(std::sqrt(rn) < 1e-10 * std::sqrt(dn));
  }

  SUBCASE("noise-free full observations at the truth have zero data term") {
    const SyntheticDataset ds = generate_dataset(spec);
    CHECK(data_term(ds.truth, ds.obs, ds.gamma, ds.grid) < 1e-12);
  }

  SUBCASE("images are positive and winds have the requested scale") {
    PressureGrid grid;
    AMVState truth;
    ImageStack x0, x1;
    PhysicsConstants gamma;
    generate_truth(spec, &grid, &truth, &x0, &x1, &gamma);
    for (double v : x1.values) CHECK(v > 0.0);
    double ws = 0.0;
    const int m = truth.shape.m();
    for (int level = 1; level < truth.K; ++level)
      for (int j = 0; j < m; ++j) ws += truth.w_level(level)[j] * truth.w_level(level)[j];
    ws = std::sqrt(ws / ((truth.K - 1) * m));
    CHECK(ws == doctest::Approx(spec.omega_std).epsilon(0.35));
  }
}

TEST_CASE("swath masks cover about the requested fraction") {
  SyntheticSpec spec;
  spec.rows = spec.cols = 64;
  spec.mask_style = "swath";
  const auto mask = make_masks(spec, 4, GridShape(64, 64), Time::T0);
  double frac = 0.0;
  for (auto v : mask) frac += v;
  frac /= static_cast<double>(mask.size());
  CHECK(frac == doctest::Approx(0.55).epsilon(0.08));
  // independent offsets at the two times
  const auto mask1 = make_masks(spec, 4, GridShape(64, 64), Time::T1);
  CHECK(mask != mask1);
}

TEST_CASE("pressure averaging") {
  const PressureGrid grid = build_pressure_grid({1000, 900, 800});
  const int m = 4;

  SUBCASE("constant bands average to the constant") {
    std::vector<double> bands(3 * m, 5.5);
    const std::vector<double> bp = {1000, 950, 880, 800};
    const auto out = pressure_average(bands, bp, m, grid);
    for (double v : out) CHECK(v == doctest::Approx(5.5).epsilon(1e-12));
  }

  SUBCASE("a band exactly spanning a layer hands over its value") {
    std::vector<double> bands(2 * m, 0.0);
    for (int j = 0; j < m; ++j) bands[j] = 7.0;  // band 0 spans [900, 1000]
    const std::vector<double> bp = {1000, 900, 800};
    const auto out = pressure_average(bands, bp, m, grid);
    for (int j = 0; j < m; ++j) {
      CHECK(out[j] == doctest::Approx(7.0).epsilon(1e-12));
      CHECK(out[m + j] == doctest::Approx(0.0).epsilon(1e-12));
    }
  }

  SUBCASE("two half-covering bands blend with overlap weights") {
    std::vector<double> bands(2 * m);
    for (int j = 0; j < m; ++j) {
      bands[j] = 2.0;      // [950, 1000]
      bands[m + j] = 6.0;  // [800, 950]
    }
    const std::vector<double> bp = {1000, 950, 800};
    const auto out = pressure_average(bands, bp, m, grid);
    for (int j = 0; j < m; ++j) {
      CHECK(out[j] == doctest::Approx(0.5 * (2.0 + 6.0)).epsilon(1e-12));  // layer [900,1000]
      CHECK(out[m + j] == doctest::Approx(6.0).epsilon(1e-12));            // layer [800,900]
    }
  }

  SUBCASE("gaps raise CoverageGap") {
    std::vector<double> bands(1 * m, 1.0);
    const std::vector<double> bp = {1000, 950};
    CHECK_THROWS_AS(pressure_average(bands, bp, m, grid), CoverageGap);
  }
}

TEST_CASE("gamma calibration") {
  SyntheticSpec spec;
  spec.rows = spec.cols = 32;
  spec.levels = {1000, 850, 700, 550, 400};
  spec.seed = 17;

  SUBCASE("round-trip identification from exact data") {
    PressureGrid grid;
    AMVState truth;
    ImageStack x0, x1;
    PhysicsConstants gamma;
    generate_truth(spec, &grid, &truth, &x0, &x1, &gamma);
    bool singular = true;
    const PhysicsConstants fit =
        calibrate_gamma(x0, x1, truth, grid, nullptr, nullptr, 1.0, &singular);
    CHECK(!singular);
    for (int b = 1; b < grid.K(); ++b)  // interior boundaries carry wind energy
      for (int ch = 0; ch < 3; ++ch)
        CHECK(fit.at(b, ch) == doctest::Approx(gamma.at(b, ch)).epsilon(1e-6));
    for (int ch = 0; ch < 3; ++ch) {  // unidentifiable boundaries pinned to zero
      CHECK(fit.at(0, ch) == 0.0);
      CHECK(fit.at(grid.K(), ch) == 0.0);
    }
  }

  SUBCASE("zero winds are singular and give zeros") {
    SyntheticSpec s2 = spec;
    s2.amplitude = 0.0;
    PressureGrid grid;
    AMVState truth;
    ImageStack x0, x1;
    PhysicsConstants gamma;
    generate_truth(s2, &grid, &truth, &x0, &x1, &gamma);
    bool singular = false;
    const PhysicsConstants fit =
        calibrate_gamma(x0, x1, truth, grid, nullptr, nullptr, 1.0, &singular);
    CHECK(singular);
    for (double v : fit.gamma) CHECK(v == 0.0);
  }

  SUBCASE("noise shrinks with sample size") {
    auto fit_error = [&](int n, std::uint64_t seed) {
      SyntheticSpec s2 = spec;
      s2.rows = s2.cols = n;
      s2.seed = seed;
      s2.sigma_obs = 0.1;
      const SyntheticDataset ds = generate_dataset(s2);
      ImageStack y0(ds.grid, ds.shape, Time::T0), y1(ds.grid, ds.shape, Time::T1);
      y0.values = ds.obs.y0;
      y1.values = ds.obs.y1;
      bool singular = false;
      const PhysicsConstants fit = calibrate_gamma(y0, y1, ds.truth, ds.grid,
                                                   ds.obs.mask0.data(), ds.obs.mask1.data(), 1.0,
                                                   &singular);
      double err = 0.0;
      int count = 0;
      for (int b = 1; b < ds.grid.K(); ++b)
        for (int ch = 0; ch < 3; ++ch) {
          err += (fit.at(b, ch) - ds.gamma.at(b, ch)) * (fit.at(b, ch) - ds.gamma.at(b, ch));
          ++count;
        }
      return std::sqrt(err / count);
    };
    // quadrupling the sample count should roughly halve the error
    const double small = fit_error(16, 23);
    const double large = fit_error(64, 23);
    CHECK(large < small);
    CHECK(large < small / 1.2);
  }
}

TEST_CASE("error metrics") {
  const GridShape shape(16, 16);
  const int m = shape.m();
  const int K = 3;
  const CounterRng rng(37);

  std::vector<double> d_true(static_cast<std::size_t>(K) * 2 * m);
  for (std::size_t i = 0; i < d_true.size(); ++i) d_true[i] = rng.normal(i);
  std::vector<double> w_true(static_cast<std::size_t>(K + 1) * m, 0.0);
  for (int level = 1; level < K; ++level)
    for (int j = 0; j < m; ++j)
      w_true[static_cast<std::size_t>(level) * m + j] = rng.normal(10000 + level * m + j);
  std::vector<std::uint8_t> full(static_cast<std::size_t>(K) * m, 1);

  SUBCASE("epe formula cases") {
    const auto zero = epe(std::vector<double>(d_true.size(), 0.0), d_true, K, shape, full, full);
    for (double v : zero) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    const auto exact = epe(d_true, d_true, K, shape, full, full);
    for (double v : exact) CHECK(v == 0.0);
    std::vector<double> twice(d_true.size());
    for (std::size_t i = 0; i < d_true.size(); ++i) twice[i] = 2.0 * d_true[i];
    const auto doubled = epe(twice, d_true, K, shape, full, full);
    for (double v : doubled) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("epe is scale-reporting") {
    std::vector<double> d_hat(d_true.size());
    for (std::size_t i = 0; i < d_true.size(); ++i) d_hat[i] = 0.7 * d_true[i] + 0.1;
    const auto base = epe(d_hat, d_true, K, shape, full, full);
    std::vector<double> sh(d_true.size()), st(d_true.size());
    for (std::size_t i = 0; i < d_true.size(); ++i) {
      sh[i] = -3.0 * d_hat[i];
      st[i] = -3.0 * d_true[i];
    }
    const auto scaled = epe(sh, st, K, shape, full, full);
    for (int k = 0; k < K; ++k) CHECK(scaled[k] == doctest::Approx(base[k]).epsilon(1e-12));
  }

  SUBCASE("epe denominator guard") {
    CHECK_THROWS_AS(epe(d_true, std::vector<double>(d_true.size(), 0.0), K, shape, full, full),
                    ZeroDenominator);
  }

  SUBCASE("vrmse formula cases") {
    const auto exact = vrmse(w_true, w_true, K, shape, full, full);
    CHECK(std::isnan(exact[0]));
    CHECK(std::isnan(exact[K]));
    for (int level = 1; level < K; ++level) CHECK(exact[level] == 0.0);
    const auto zero = vrmse(std::vector<double>(w_true.size(), 0.0), w_true, K, shape, full, full);
    for (int level = 1; level < K; ++level) CHECK(zero[level] == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> neg(w_true.size());
    for (std::size_t i = 0; i < w_true.size(); ++i) neg[i] = -w_true[i];
    const auto negated = vrmse(neg, w_true, K, shape, full, full);
    for (int level = 1; level < K; ++level)
      CHECK(negated[level] == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("masked pixels never influence metrics") {
    std::vector<std::uint8_t> holey = full;
    for (std::size_t i = 0; i < holey.size(); i += 2) holey[i] = 0;
    std::vector<double> d_hat = d_true;
    std::vector<double> w_hat = w_true;
    const auto e1 = epe(d_hat, d_true, K, shape, holey, full);
    const auto v1 = vrmse(w_hat, w_true, K, shape, holey, full);
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < m; ++j)
        if (!holey[static_cast<std::size_t>(k) * m + j]) {
          d_hat[(static_cast<std::size_t>(k) * 2) * m + j] += 99.0;
          w_hat[static_cast<std::size_t>(k) * m + j] += 99.0;
        }
    const auto e2 = epe(d_hat, d_true, K, shape, holey, full);
    const auto v2 = vrmse(w_hat, w_true, K, shape, holey, full);
    for (int k = 0; k < K; ++k) CHECK(e1[k] == e2[k]);
    for (int level = 1; level < K; ++level) CHECK(v1[level] == v2[level]);
  }
}

TEST_CASE("evaluate_estimate bookkeeping") {
  SyntheticSpec spec;
  spec.rows = spec.cols = 16;
  spec.levels = {1000, 800, 600, 400};
  const SyntheticDataset ds = generate_dataset(spec);
  const EvalReport rep = evaluate_estimate("truth", ds.truth, ds.truth, ds.obs);
  CHECK(rep.rows.size() == static_cast<std::size_t>(ds.grid.K()));
  for (const auto& row : rep.rows) {
    CHECK(row.epe == 0.0);
    if (row.layer > 0) CHECK(row.vrmse == 0.0);
  }
}
