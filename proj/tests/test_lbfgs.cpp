#include <cmath>
#include <limits>

#include "amv/lbfgs.hpp"
#include "amv/rng.hpp"
#include "doctest.h"

using namespace amv;

TEST_CASE("quadratic bowl converges immediately") {
  const std::vector<double> target = {1.0, -2.0, 3.5, 0.25};
  ObjectiveFn obj = [&](const std::vector<double>& x, std::vector<double>& g) {
    double f = 0.0;
    g.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      g[i] = x[i] - target[i];
      f += 0.5 * g[i] * g[i];
    }
    return f;
  };
  LbfgsOptions opts;
  opts.g_tol = 1e-10;
  opts.g_tol_rel = 0.0;
  const MinimizeResult res = minimize(obj, std::vector<double>(4, 0.0), opts);
  CHECK(res.iterations <= 2);
  CHECK(res.status == SolveStatus::Converged);
  for (std::size_t i = 0; i < target.size(); ++i)
    CHECK(std::fabs(res.x[i] - target[i]) < 1e-8);
}

TEST_CASE("Rosenbrock from the classic start") {
  ObjectiveFn obj = [](const std::vector<double>& x, std::vector<double>& g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  LbfgsOptions opts;
  opts.max_iterations = 200;
  opts.g_tol = 1e-10;
  opts.g_tol_rel = 0.0;
  const MinimizeResult res = minimize(obj, {-1.2, 1.0}, opts);
  CHECK(res.f < 1e-8);
  CHECK(res.iterations <= 200);
  CHECK(std::fabs(res.x[0] - 1.0) < 1e-3);
  CHECK(std::fabs(res.x[1] - 1.0) < 1e-3);
}

TEST_CASE("huge tolerance returns the start") {
  ObjectiveFn obj = [](const std::vector<double>& x, std::vector<double>& g) {
    g.assign(x.size(), 1.0);
    return x[0];
  };
  LbfgsOptions opts;
  opts.g_tol = 1e9;
  const MinimizeResult res = minimize(obj, {5.0}, opts);
  CHECK(res.iterations == 0);
  CHECK(res.x[0] == 5.0);
}

TEST_CASE("objective never increases and runs are deterministic") {
  // non-convex test surface
  ObjectiveFn obj = [](const std::vector<double>& x, std::vector<double>& g) {
    double f = 0.0;
    g.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      f += std::cos(x[i]) + 0.1 * x[i] * x[i];
      g[i] = -std::sin(x[i]) + 0.2 * x[i];
    }
    return f;
  };
  std::vector<double> x0 = {2.0, -3.0, 0.7, 4.0, -1.1};
  LbfgsOptions opts;
  opts.max_iterations = 60;
  std::vector<double> g0(x0.size());
  const double f0 = obj(x0, g0);
  const MinimizeResult a = minimize(obj, x0, opts);
  const MinimizeResult b = minimize(obj, x0, opts);
  CHECK(a.f <= f0);
  CHECK(a.x == b.x);
  CHECK(a.f == b.f);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("non-finite start throws") {
  ObjectiveFn obj = [](const std::vector<double>& x, std::vector<double>& g) {
    g.assign(x.size(), 0.0);
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(minimize(obj, {0.0}, LbfgsOptions{}), NonFiniteObjective);
}

namespace {

// quadratic pulling wavelet coefficients toward a target plane
struct CoeffTarget {
  std::vector<double> t;
  ObjectiveFn fn() const {
    return [this](const std::vector<double>& x, std::vector<double>& g) {
      double f = 0.0;
      g.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = x[i] - t[i];
        f += 0.5 * g[i] * g[i];
      }
      return f;
    };
  }
};

}  // namespace

TEST_CASE("multiscale minimize") {
  const GridShape shape(16, 16);
  const WaveletBasis basis(shape);
  const ScaleSchedule sched = default_schedule(basis.num_bands());
  std::vector<std::uint8_t> bands(basis.band_map().begin(), basis.band_map().end());

  SUBCASE("single-stage schedule equals plain minimize") {
    CoeffTarget tgt;
    tgt.t.resize(shape.m());
    const CounterRng rng(3);
    for (std::size_t i = 0; i < tgt.t.size(); ++i) tgt.t[i] = rng.normal(i);
    ScaleSchedule one;
    one.active_bands = {basis.num_bands()};
    LbfgsOptions opts;
    const MinimizeResult ms =
        multiscale_minimize(tgt.fn(), std::vector<double>(shape.m(), 0.0), bands, one, opts);
    const MinimizeResult plain = minimize(tgt.fn(), std::vector<double>(shape.m(), 0.0), opts);
    CHECK(ms.x == plain.x);
  }

  SUBCASE("coarse-band target is solved by the first stage alone") {
    CoeffTarget tgt;
    tgt.t.assign(shape.m(), 0.0);
    const CounterRng rng(5);
    for (int j = 0; j < shape.m(); ++j)
      if (basis.band_map()[j] < sched.active_bands[0]) tgt.t[j] = rng.normal(j);
    LbfgsOptions opts;
    opts.g_tol = 1e-12;
    opts.g_tol_rel = 0.0;
    // first stage only
    ObjectiveFn masked = [&](const std::vector<double>& x, std::vector<double>& g) {
      const double f = tgt.fn()(x, g);
      for (int j = 0; j < shape.m(); ++j)
        if (bands[j] >= sched.active_bands[0]) g[j] = 0.0;
      return f;
    };
    const MinimizeResult stage0 = minimize(masked, std::vector<double>(shape.m(), 0.0), opts);
    double err = 0.0;
    for (int j = 0; j < shape.m(); ++j) err = std::max(err, std::fabs(stage0.x[j] - tgt.t[j]));
    CHECK(err < 1e-8);
    // the full schedule then has nothing left to do
    const MinimizeResult full =
        multiscale_minimize(tgt.fn(), std::vector<double>(shape.m(), 0.0), bands, sched, opts);
    for (int j = 0; j < shape.m(); ++j) CHECK(std::fabs(full.x[j] - tgt.t[j]) < 1e-8);
  }

  SUBCASE("warm starts never increase the objective across stages") {
    CoeffTarget tgt;
    tgt.t.resize(shape.m());
    const CounterRng rng(9);
    for (std::size_t i = 0; i < tgt.t.size(); ++i) tgt.t[i] = rng.normal(i);
    LbfgsOptions opts;
    opts.max_iterations = 3;  // leave later stages real work
    std::vector<double> x(shape.m(), 0.0);
    std::vector<double> g(x.size());
    double prev = tgt.fn()(x, g);
    for (int s = 0; s < sched.stages(); ++s) {
      ScaleSchedule upto;
      for (int b = 0; b <= s; ++b) upto.active_bands.push_back(sched.active_bands[b]);
      upto.active_bands.back() = sched.active_bands[s];
      // run one stage at a time by reusing multiscale with a single entry
      ScaleSchedule single;
      single.active_bands = {sched.active_bands[s]};
      ObjectiveFn masked = [&](const std::vector<double>& xx, std::vector<double>& gg) {
        const double f = tgt.fn()(xx, gg);
        for (int j = 0; j < shape.m(); ++j)
          if (bands[j] != kAlwaysActive && bands[j] >= single.active_bands[0]) gg[j] = 0.0;
        return f;
      };
      const MinimizeResult r = minimize(masked, x, opts);
      x = r.x;
      CHECK(r.f <= prev + 1e-12);
      prev = r.f;
    }
  }
}

TEST_CASE("gradient checker") {
  SUBCASE("exact gradient of a quadratic") {
    ObjectiveFn obj = [](const std::vector<double>& x, std::vector<double>& g) {
      double f = 0.0;
      g.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = 2.0 * x[i];
        f += x[i] * x[i];
      }
      return f;
    };
    const GradCheckReport rep = gradient_check(obj, {1.0, -0.5, 2.0}, 1e-4, 10);
    CHECK(rep.max_rel_error < 1e-9);
  }

  SUBCASE("a doubled gradient is flagged") {
    ObjectiveFn obj = [](const std::vector<double>& x, std::vector<double>& g) {
      double f = 0.0;
      g.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = 4.0 * x[i];  // wrong by a factor of two
        f += x[i] * x[i];
      }
      return f;
    };
    const GradCheckReport rep = gradient_check(obj, {1.0, -0.5, 2.0}, 1e-4, 10);
    CHECK(rep.max_rel_error > 0.4);
    CHECK(rep.max_rel_error < 0.6);
  }
}
