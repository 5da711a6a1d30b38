// Command-line front end: synthetic dataset generation, AMV estimation with
// the benchmark variants, evaluation, gamma calibration and self tests.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "amv/diffops.hpp"
#include "amv/eval.hpp"
#include "amv/io.hpp"
#include "amv/rng.hpp"

namespace {

using nlohmann::json;

constexpr int kExitInvalidInput = 2;
constexpr int kExitSolverFailure = 3;
constexpr int kExitSelfTestFailure = 4;

amv::SyntheticSpec spec_from_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw amv::IoError("cannot open " + path);
  json j;
  in >> j;
  amv::SyntheticSpec spec;
  spec.rows = j.value("rows", spec.rows);
  spec.cols = j.value("cols", spec.cols);
  if (j.contains("levels")) spec.levels = j.at("levels").get<std::vector<double>>();
  spec.spectral_slope = j.value("spectral_slope", spec.spectral_slope);
  spec.flow_slope = j.value("flow_slope", spec.flow_slope);
  spec.amplitude = j.value("amplitude", spec.amplitude);
  spec.vertical_corr = j.value("vertical_corr", spec.vertical_corr);
  spec.divergent_fraction = j.value("divergent_fraction", spec.divergent_fraction);
  spec.chi_bands = j.value("chi_bands", spec.chi_bands);
  spec.balanced = j.value("balanced", spec.balanced);
  spec.omega_std = j.value("omega_std", spec.omega_std);
  spec.mask_style = j.value("mask_style", spec.mask_style);
  spec.swath_width = j.value("swath_width", spec.swath_width);
  spec.swath_period = j.value("swath_period", spec.swath_period);
  spec.random_coverage = j.value("random_coverage", spec.random_coverage);
  spec.sigma_obs = j.value("sigma_obs", spec.sigma_obs);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("gamma")) {
    const auto g = j.at("gamma").get<std::vector<std::vector<double>>>();
    spec.gamma.clear();
    for (const auto& row : g)
      for (double v : row) spec.gamma.push_back(v);
  }
  return spec;
}

int cmd_generate(const std::string& spec_path, const std::string& out_dir) {
  amv::SyntheticSpec spec;
  if (!spec_path.empty()) spec = spec_from_json(spec_path);
  const amv::SyntheticDataset ds = amv::generate_dataset(spec);
  amv::save_dataset(out_dir, ds, spec);
  std::printf("wrote dataset K=%d %dx%d (%s masks) to %s\n", ds.grid.K(), ds.shape.rows,
              ds.shape.cols, spec.mask_style.c_str(), out_dir.c_str());
  return 0;
}

int cmd_estimate(const std::string& data_dir, const std::string& variant_name,
                 const std::string& config_path, const std::string& out_dir) {
  const amv::LoadedDataset ds = amv::load_dataset(data_dir);
  const int K = ds.grid.K();
  amv::SolverConfig cfg = amv::SolverConfig::defaults(K);
  cfg.gamma = ds.gamma;
  amv::AdmmOptions opts;
  if (!config_path.empty()) amv::load_config(config_path, K, &cfg, &opts);
  opts.variant = amv::variant_from_string(variant_name);

  const amv::AdmmResult res = amv::run_variant(ds.obs, ds.grid, cfg, opts);
  amv::save_estimate(out_dir, amv::variant_name(opts.variant), res.state, res.trace);
  const auto& recs = res.trace.records;
  std::printf("%s: %zu outer iterations, %s, final objective %.9g\n",
              amv::variant_name(opts.variant).c_str(), recs.size(),
              res.trace.converged ? "converged" : "budget exhausted",
              recs.empty() ? 0.0 : recs.back().objective);
  return 0;
}

int cmd_evaluate(const std::string& data_dir, const std::string& estimate_dir,
                 const std::string& out_csv) {
  const amv::LoadedDataset ds = amv::load_dataset(data_dir);
  if (ds.truth_d.empty() || ds.truth_w.empty())
    throw amv::InvalidSpec("dataset has no ground truth to evaluate against");
  std::string variant;
  const amv::AMVState est = amv::load_estimate(estimate_dir, &variant);
  amv::AMVState truth(ds.grid.K(), ds.shape);
  truth.d = ds.truth_d;
  truth.w = ds.truth_w;
  const amv::EvalReport rep = amv::evaluate_estimate(variant, est, truth, ds.obs);
  rep.write_csv(out_csv);
  for (const auto& row : rep.rows)
    std::printf("%s,layer %d: epe %.9g vrmse %.9g\n", row.variant.c_str(), row.layer, row.epe,
                row.vrmse);
  return 0;
}

int cmd_calibrate(const std::string& data_dir, const std::string& out_path) {
  const amv::LoadedDataset ds = amv::load_dataset(data_dir);
  if (ds.truth_d.empty() || ds.truth_w.empty())
    throw amv::InvalidSpec("gamma calibration needs ground-truth AMVs");
  const int K = ds.grid.K();
  amv::AMVState truth(K, ds.shape);
  truth.d = ds.truth_d;
  truth.w = ds.truth_w;
  amv::ImageStack x0(ds.grid, ds.shape, amv::Time::T0), x1(ds.grid, ds.shape, amv::Time::T1);
  const int m = ds.shape.m();
  for (int k = 0; k < K; ++k)
    for (int ch = 0; ch < 3; ++ch)
      for (int j = 0; j < m; ++j) {
        x0.at(k, ch, j) = ds.obs.mask0[static_cast<std::size_t>(k) * m + j]
                              ? ds.obs.y_layer(amv::Time::T0, k, ch)[j]
                              : 0.0;
        x1.at(k, ch, j) = ds.obs.mask1[static_cast<std::size_t>(k) * m + j]
                              ? ds.obs.y_layer(amv::Time::T1, k, ch)[j]
                              : 0.0;
      }
  bool singular = false;
  const amv::PhysicsConstants gamma =
      amv::calibrate_gamma(x0, x1, truth, ds.grid, ds.obs.mask0.data(), ds.obs.mask1.data(), 1.0,
                           &singular);
  if (singular) std::fprintf(stderr, "warning: winds carry no energy, gamma fit is singular\n");
  json out;
  out["singular"] = singular;
  json rows = json::array();
  for (int b = 0; b <= K; ++b)
    rows.push_back({gamma.at(b, 0), gamma.at(b, 1), gamma.at(b, 2)});
  out["gamma"] = rows;
  std::ofstream f(out_path);
  f << out.dump(2) << "\n";
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

// small built-in verification pass: operator adjoints, prox oracle, gradient
// of the hard-constraint subproblem
int cmd_check() {
  int failures = 0;
  const auto check = [&](const char* name, bool ok) {
    std::printf("%-34s %s\n", name, ok ? "ok" : "FAIL");
    if (!ok) ++failures;
  };
  const amv::GridShape shape(16, 16);
  const int m = shape.m();
  const amv::CounterRng rng(99);

  {  // divergence / Laplacian adjoints
    double worst_div = 0.0, worst_lap = 0.0;
    for (int t = 0; t < 20; ++t) {
      std::vector<double> du(m), dv(m), r(m), out(m), au(m), av(m);
      for (int j = 0; j < m; ++j) {
        du[j] = rng.normal(static_cast<std::uint64_t>(t) * 4 * m + j);
        dv[j] = rng.normal(static_cast<std::uint64_t>(t) * 4 * m + m + j);
        r[j] = rng.normal(static_cast<std::uint64_t>(t) * 4 * m + 2 * m + j);
      }
      amv::divergence(du.data(), dv.data(), shape, out.data());
      amv::divergence_adjoint(r.data(), shape, au.data(), av.data());
      double lhs = 0.0, rhs = 0.0, scale = 0.0;
      for (int j = 0; j < m; ++j) {
        lhs += out[j] * r[j];
        rhs += du[j] * au[j] + dv[j] * av[j];
        scale += std::fabs(out[j] * r[j]);
      }
      worst_div = std::max(worst_div, std::fabs(lhs - rhs) / std::max(scale, 1e-12));
      std::vector<double> lu(m), lv(m);
      amv::laplacian(du.data(), shape, lu.data());
      amv::laplacian(r.data(), shape, lv.data());
      lhs = rhs = scale = 0.0;
      for (int j = 0; j < m; ++j) {
        lhs += lu[j] * r[j];
        rhs += du[j] * lv[j];
        scale += std::fabs(lu[j] * r[j]);
      }
      worst_lap = std::max(worst_lap, std::fabs(lhs - rhs) / std::max(scale, 1e-12));
    }
    check("divergence adjoint", worst_div < 1e-10);
    check("laplacian self-adjoint", worst_lap < 1e-10);
  }

  {  // prox against a grid-search argmin
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const double v = 16.0 * (rng.uniform(1000 + 2 * t) - 0.5);
      const double lam = 2.0 * rng.uniform(1000 + 2 * t + 1);
      const double got = amv::soft_threshold(v, lam);
      double best_u = -12.0, best_f = 1e300;
      for (double u = -12.0; u <= 12.0; u += 5e-4) {
        const double f = lam * std::fabs(u) + 0.5 * (u - v) * (u - v);
        if (f < best_f) {
          best_f = f;
          best_u = u;
        }
      }
      worst = std::max(worst, std::fabs(got - best_u));
    }
    check("soft-threshold prox oracle", worst < 1e-3);
  }

  {  // analytic gradient of the hard subproblem vs finite differences
    amv::SyntheticSpec spec;
    spec.rows = spec.cols = 16;
    spec.levels = {1000, 850, 700, 550, 400};
    spec.sigma_obs = 0.05;
    spec.mask_style = "random";
    spec.seed = 5;
    const amv::SyntheticDataset ds = amv::generate_dataset(spec);
    amv::SolverConfig cfg = amv::SolverConfig::defaults(ds.grid.K());
    cfg.gamma = ds.gamma;
    cfg.standardize = false;
    const amv::WaveletBasis basis(ds.shape);
    amv::EnergyModel model;
    model.obs = &ds.obs;
    model.grid = &ds.grid;
    model.cfg = &cfg;
    model.basis = &basis;
    model.constraint = amv::ConstraintKind::Hard;
    amv::DualState duals(ds.grid.K(), m, true);
    for (std::size_t i = 0; i < duals.u_d.size(); ++i) duals.u_d[i] = 0.1 * rng.normal(7000 + i);
    const amv::SplitLayout layout(model, 1);
    std::vector<double> x(layout.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.2 * rng.normal(9000 + i);
    amv::ObjectiveFn obj = [&](const std::vector<double>& xx, std::vector<double>& gg) {
      return amv::layer_objective(model, 1, amv::SubproblemMode::SplitEven, duals, nullptr, xx,
                                  &gg);
    };
    const amv::GradCheckReport rep = amv::gradient_check(obj, x, 1e-5, 10);
    check("subproblem gradient vs FD", rep.max_rel_error < 1e-5);
  }

  if (failures) std::printf("%d self-test(s) failed\n", failures);
  return failures == 0 ? 0 : kExitSelfTestFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vertical profiles of 3D atmospheric motion vectors from masked tri-variate "
               "image stacks"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, data_dir, variant = "3d-hydro-hard", config_path, estimate_dir,
              out_csv, out_path;

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->add_option("--spec", spec_path, "synthetic spec JSON (defaults when omitted)");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* est = app.add_subcommand("estimate", "estimate AMVs from a dataset");
  est->add_option("--data", data_dir, "dataset directory")->required();
  est->add_option("--variant", variant,
                  "2d | 2d-inc | 3d | 3d-hydro-soft | 3d-hydro-hard");
  est->add_option("--config", config_path, "solver config JSON");
  est->add_option("--out", out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "per-layer EPE / vertical RMSE of an estimate");
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--estimate", estimate_dir, "estimate directory")->required();
  eval->add_option("--out", out_csv, "report CSV path")->required();

  auto* cal = app.add_subcommand("calibrate-gamma", "least-squares gamma fit from a dataset");
  cal->add_option("--data", data_dir, "dataset directory")->required();
  cal->add_option("--out", out_path, "output JSON path")->required();

  app.add_subcommand("check", "run gradient/adjoint/prox self-tests");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(spec_path, out_dir);
    if (est->parsed()) return cmd_estimate(data_dir, variant, config_path, out_dir);
    if (eval->parsed()) return cmd_evaluate(data_dir, estimate_dir, out_csv);
    if (cal->parsed()) return cmd_calibrate(data_dir, out_path);
    return cmd_check();
  } catch (const amv::DivergenceDetected& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolverFailure;
  } catch (const amv::NonFiniteObjective& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolverFailure;
  } catch (const amv::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalidInput;
  }
}
