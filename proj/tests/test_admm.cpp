#include <cmath>
#include <cstring>

#include "amv/admm.hpp"
#include "amv/parallel.hpp"
#include "amv/eval.hpp"
#include "amv/rng.hpp"
#include "amv/synth.hpp"
#include "doctest.h"

using namespace amv;

namespace {

SyntheticDataset small_ds(const char* mask_style, double sigma, int n, std::uint64_t seed,
                          double omega_std = 0.4) {
  SyntheticSpec spec;
  spec.rows = spec.cols = n;
  spec.levels = {1000, 850, 700, 550, 400};
  spec.mask_style = mask_style;
  spec.sigma_obs = sigma;
  spec.seed = seed;
  spec.omega_std = omega_std;
  return generate_dataset(spec);
}

SolverConfig quick_cfg(const SyntheticDataset& ds, int inner = 20) {
  SolverConfig cfg = SolverConfig::defaults(ds.grid.K());
  cfg.gamma = ds.gamma;
  cfg.inner.max_iterations = inner;
  return cfg;
}

}  // namespace

TEST_CASE("variant bookkeeping") {
  CHECK(variant_from_string("2d") == Variant::V2d);
  CHECK(variant_from_string("3d-hydro-hard") == Variant::V3dHydroHard);
  CHECK_THROWS_AS(variant_from_string("4d"), InvalidSpec);
  CHECK(variant_constraint(Variant::V2dIncompressible) == ConstraintKind::Soft);
  CHECK(variant_constraint(Variant::V3d) == ConstraintKind::None);
  CHECK(variant_pins_omega(Variant::V2d));
  CHECK(!variant_pins_omega(Variant::V3dHydroSoft));
}

TEST_CASE("warm start at a feasible truth converges in zero iterations") {
  const SyntheticDataset ds = small_ds("full", 0.0, 32, 21);
  SolverConfig cfg = quick_cfg(ds);
  AdmmOptions opts;
  opts.variant = Variant::V3dHydroHard;
  opts.mode = AdmmMode::Split;
  opts.warm_start = &ds.truth;
  const AdmmResult res = run_split_admm(ds.obs, ds.grid, cfg, opts);
  CHECK(res.trace.converged);
  CHECK(res.trace.records.empty());
  // the state passes through unchanged up to the standardization round trip
  double dmax = 0.0;
  for (std::size_t i = 0; i < ds.truth.d.size(); ++i)
    dmax = std::max(dmax, std::fabs(res.state.d[i] - ds.truth.d[i]));
  CHECK(dmax < 1e-12);
  double cmax = 0.0;
  for (std::size_t i = 0; i < ds.truth.c.size(); ++i)
    cmax = std::max(cmax, std::fabs(res.state.c[i] - ds.truth.c[i]));
  CHECK(cmax < 1e-8);
}

TEST_CASE("2d variant pins the winds to zero") {
  const SyntheticDataset ds = small_ds("full", 0.05, 16, 22);
  SolverConfig cfg = quick_cfg(ds, 10);
  AdmmOptions opts;
  opts.variant = Variant::V2d;
  opts.max_outer = 3;
  const AdmmResult res = run_variant(ds.obs, ds.grid, cfg, opts);
  for (double v : res.state.w) CHECK(v == 0.0);
  CHECK(res.trace.records.size() >= 1);
}

TEST_CASE("dominant l1 weight thresholds every coefficient copy") {
  const SyntheticDataset ds = small_ds("full", 0.05, 16, 23);
  SolverConfig cfg = quick_cfg(ds, 10);
  cfg.alpha_x.assign(ds.grid.K(), 1e4);
  AdmmOptions opts;
  opts.variant = Variant::V3d;
  opts.max_outer = 2;
  const AdmmResult res = run_variant(ds.obs, ds.grid, cfg, opts);
  for (double v : res.duals.c_tilde) CHECK(v == 0.0);
}

TEST_CASE("dual update identity") {
  // u_d^(i+1) - u_d^(i) must equal the primal constraint residual, bitwise
  const SyntheticDataset ds = small_ds("full", 0.02, 16, 24);
  SolverConfig cfg = quick_cfg(ds, 8);
  AdmmOptions opts;
  opts.variant = Variant::V3dHydroHard;
  opts.mode = AdmmMode::Joint;
  opts.max_outer = 1;
  const AdmmResult res = run_joint_admm(ds.obs, ds.grid, cfg, opts);
  // after one iteration u_d = (D d - L w) of the current state
  const std::vector<double> h = hydrostatic_residual(res.state, ds.grid);
  REQUIRE(res.duals.u_d.size() == h.size());
  for (std::size_t i = 0; i < h.size(); ++i)
    CHECK(res.duals.u_d[i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("split results are independent of thread count") {
  const SyntheticDataset ds = small_ds("swath", 0.05, 16, 25);
  SolverConfig cfg = quick_cfg(ds, 8);
  AdmmOptions opts;
  opts.variant = Variant::V3dHydroHard;
  opts.max_outer = 2;
  const int saved = max_threads();
  set_threads(1);
  const AdmmResult a = run_split_admm(ds.obs, ds.grid, cfg, opts);
  set_threads(saved);
  const AdmmResult b = run_split_admm(ds.obs, ds.grid, cfg, opts);
  CHECK(a.state.d == b.state.d);
  CHECK(a.state.w == b.state.w);
  CHECK(a.state.c == b.state.c);
}

TEST_CASE("hard constraint is enforced on a feasible synthetic") {
  const SyntheticDataset ds = small_ds("full", 0.02, 32, 26);
  SolverConfig cfg = quick_cfg(ds, 50);
  AdmmOptions opts;
  opts.variant = Variant::V3dHydroHard;
  opts.mode = AdmmMode::Joint;
  opts.max_outer = 50;
  const AdmmResult res = run_joint_admm(ds.obs, ds.grid, cfg, opts);
  REQUIRE(!res.trace.records.empty());
  const auto& last = res.trace.records.back();
  CHECK(last.pri_hydro < 1e-3);
  // final primal residual below the best of the first three iterations
  double early = 1e300;
  for (std::size_t i = 0; i < res.trace.records.size() && i < 3; ++i)
    early = std::min(early, res.trace.records[i].pri_hydro);
  CHECK(last.pri_hydro <= early);
}

TEST_CASE("split mode drives the constraint and the copies together") {
  const SyntheticDataset ds = small_ds("full", 0.02, 32, 26);
  SolverConfig cfg = quick_cfg(ds, 50);
  AdmmOptions opts;
  opts.variant = Variant::V3dHydroHard;
  opts.max_outer = 30;
  const AdmmResult res = run_split_admm(ds.obs, ds.grid, cfg, opts);
  REQUIRE(!res.trace.records.empty());
  const auto& last = res.trace.records.back();
  CHECK(last.pri_hydro < 2e-2);
  CHECK(last.pri_w < 2e-2);
  CHECK(res.w_disagreement_inf < 0.5);
  double early = 1e300;
  for (std::size_t i = 0; i < res.trace.records.size() && i < 3; ++i)
    early = std::min(early, res.trace.records[i].pri_hydro);
  CHECK(last.pri_hydro <= early);
}

TEST_CASE("split and joint agree on a small unconstrained problem") {
  const SyntheticDataset ds = small_ds("full", 0.05, 32, 27);
  SolverConfig cfg = quick_cfg(ds, 50);
  AdmmOptions opts;
  opts.variant = Variant::V3d;
  opts.max_outer = 30;
  opts.eps_pri = opts.eps_dual = 1e-4;
  opts.mode = AdmmMode::Split;
  const AdmmResult split = run_split_admm(ds.obs, ds.grid, cfg, opts);
  opts.mode = AdmmMode::Joint;
  const AdmmResult joint = run_joint_admm(ds.obs, ds.grid, cfg, opts);
  const double fs = split.trace.records.back().objective;
  const double fj = joint.trace.records.back().objective;
  CHECK(std::fabs(fs - fj) / std::max(std::fabs(fj), 1e-12) < 0.01);
}

TEST_CASE("odd layer count needs the padding flag in split mode") {
  SyntheticSpec spec;
  spec.rows = spec.cols = 16;
  spec.levels = {1000, 800, 600, 400};  // K = 3
  spec.seed = 3;
  const SyntheticDataset ds = generate_dataset(spec);
  SolverConfig cfg = quick_cfg(ds, 5);
  AdmmOptions opts;
  opts.variant = Variant::V3dHydroHard;
  opts.max_outer = 1;
  opts.odd_layer_padding = false;
  CHECK_THROWS_AS(run_split_admm(ds.obs, ds.grid, cfg, opts), OddLayerCount);
  opts.odd_layer_padding = true;
  const AdmmResult res = run_split_admm(ds.obs, ds.grid, cfg, opts);
  CHECK(res.trace.records.size() == 1);
}
