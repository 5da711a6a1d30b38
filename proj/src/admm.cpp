#include "amv/admm.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace amv {

namespace {

double rel_gap(const double* a, const double* b, std::size_t n) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    diff += d * d;
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(std::max(na, nb)), 1e-12);
  return std::sqrt(diff) / denom;
}

struct Standardizer {
  double mean[3] = {0, 0, 0};
  double scale[3] = {1, 1, 1};

  static Standardizer fit(const ObservationSet& obs) {
    Standardizer st;
    for (int ch = 0; ch < 3; ++ch) {
      double sum = 0.0, sum2 = 0.0;
      std::size_t count = 0;
      for (int t = 0; t < 2; ++t) {
        const Time time = t ? Time::T1 : Time::T0;
        for (int k = 0; k < obs.K; ++k) {
          const double* y = obs.y_layer(time, k, ch);
          const std::uint8_t* mk = obs.mask_layer(time, k);
          for (int j = 0; j < obs.shape.m(); ++j) {
            if (!mk[j]) continue;
            sum += y[j];
            sum2 += y[j] * y[j];
            ++count;
          }
        }
      }
      if (count > 0) {
        st.mean[ch] = sum / count;
        const double var = std::max(sum2 / count - st.mean[ch] * st.mean[ch], 0.0);
        st.scale[ch] = var > 1e-24 ? std::sqrt(var) : 1.0;
      }
    }
    return st;
  }

  ObservationSet apply(const ObservationSet& obs) const {
    ObservationSet out = obs;
    for (int t = 0; t < 2; ++t) {
      const Time time = t ? Time::T1 : Time::T0;
      for (int k = 0; k < obs.K; ++k) {
        for (int ch = 0; ch < 3; ++ch) {
          double* y = out.y_layer(time, k, ch);
          const std::uint8_t* mk = out.mask_layer(time, k);
          for (int j = 0; j < obs.shape.m(); ++j)
            y[j] = mk[j] ? (y[j] - mean[ch]) / scale[ch] : kMaskedSentinel;
        }
      }
    }
    return out;
  }

  // x_std = (x - mean)/scale, so c transforms per channel through the basis
  void state_to_internal(AMVState* state, const WaveletBasis& basis) const {
    rescale(state, basis, true);
  }
  void state_to_physical(AMVState* state, const WaveletBasis& basis) const {
    rescale(state, basis, false);
  }

 private:
  void rescale(AMVState* state, const WaveletBasis& basis, bool forward) const {
    const int m = state->shape.m();
    std::vector<double> x(m);
    for (int k = 0; k < state->K; ++k) {
      for (int ch = 0; ch < 3; ++ch) {
        iwt2(state->c_layer(k, ch), basis, x.data());
        for (int j = 0; j < m; ++j)
          x[j] = forward ? (x[j] - mean[ch]) / scale[ch] : scale[ch] * x[j] + mean[ch];
        fwt2(x.data(), basis, state->c_layer(k, ch));
      }
    }
  }
};

struct Residuals {
  double pri_hydro = 0.0, pri_c = 0.0, pri_w = 0.0;
};

Residuals primal_residuals(const AMVState& state, const DualState& duals,
                           const PressureGrid& grid, bool split) {
  Residuals r;
  const int K = state.K;
  const int m = state.shape.m();
  std::vector<double> dd(static_cast<std::size_t>(K) * m);
  apply_D(state.d.data(), K, state.shape, grid, dd.data());
  std::vector<double> lw(static_cast<std::size_t>(K) * m);
  apply_L(state.w_level(1), K, state.shape, lw.data());
  r.pri_hydro = rel_gap(dd.data(), lw.data(), dd.size());
  r.pri_c = rel_gap(state.c.data(), duals.c_tilde.data(), state.c.size());
  if (split && K > 1)
    r.pri_w = rel_gap(state.w_level(1), duals.w_tilde.data(), static_cast<std::size_t>(K - 1) * m);
  return r;
}

double problem_objective(const EnergyModel& model, const AMVState& state,
                         const DualState& duals) {
  const SolverConfig& cfg = *model.cfg;
  double obj = data_term(state, *model.obs, cfg.gamma, *model.grid, cfg.dt);
  obj += reg_d(state.d, state.K, state.shape, cfg.alpha_d, cfg.tikhonov);
  const int m = model.m();
  // l1 weight matches the prox level alpha_x^k / rho of the consensus step
  for (int k = 0; k < state.K; ++k) {
    const double* ct = duals.c_tilde.data() + static_cast<std::size_t>(k) * 3 * m;
    double l1 = 0.0;
    for (int i = 0; i < 3 * m; ++i) l1 += std::fabs(ct[i]);
    obj += cfg.alpha_x[k] * l1;
  }
  if (model.constraint == ConstraintKind::Soft) {
    const std::vector<double> h = hydrostatic_residual(state, *model.grid);
    double s = 0.0;
    for (double v : h) s += v * v;
    obj += 0.5 * cfg.rho * s;
  }
  return obj;
}

// objective in the curvature-balanced coordinates z, with x = S z
ObjectiveFn scaled_objective(ObjectiveFn obj, std::vector<double> scales) {
  return [obj = std::move(obj), s = std::move(scales)](const std::vector<double>& z,
                                                       std::vector<double>& g) {
    std::vector<double> x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) x[i] = s[i] * z[i];
    const double f = obj(x, g);
    for (std::size_t i = 0; i < z.size(); ++i) g[i] *= s[i];
    return f;
  };
}

AMVState init_state(const EnergyModel& model, const AdmmOptions& opts,
                    const Standardizer* st) {
  const int K = model.K();
  if (opts.warm_start) {
    AMVState s = *opts.warm_start;
    if (s.K != K || !(s.shape == model.shape())) throw ShapeMismatch("warm start shape mismatch");
    if (st) st->state_to_internal(&s, *model.basis);
    s.zero_boundary_winds();
    return s;
  }
  AMVState s(K, model.shape());
  if (model.cfg->init_from_obs) {
    const int m = model.m();
    std::vector<double> x(m);
    for (int k = 0; k < K; ++k) {
      const std::uint8_t* mk = model.obs->mask_layer(Time::T1, k);
      for (int ch = 0; ch < 3; ++ch) {
        const double* y = model.obs->y_layer(Time::T1, k, ch);
        double mean = 0.0;
        int count = 0;
        for (int j = 0; j < m; ++j)
          if (mk[j]) {
            mean += y[j];
            ++count;
          }
        mean = count ? mean / count : 0.0;
        for (int j = 0; j < m; ++j) x[j] = mk[j] ? y[j] : mean;
        fwt2(x.data(), *model.basis, s.c_layer(k, ch));
      }
    }
  }
  return s;
}

AdmmResult run_admm(const ObservationSet& raw_obs, const PressureGrid& grid,
                    const SolverConfig& raw_cfg, const AdmmOptions& opts) {
  opts.validate();
  const bool split = opts.mode == AdmmMode::Split;
  const int K = grid.K();
  if (split && K % 2 != 0 && !opts.odd_layer_padding)
    throw OddLayerCount("split mode needs an even layer count (or odd_layer_padding)");

  // internal working copies in standardized units
  SolverConfig cfg = raw_cfg;
  Standardizer st;
  ObservationSet obs;
  if (cfg.standardize) {
    st = Standardizer::fit(raw_obs);
    obs = st.apply(raw_obs);
    for (int b = 0; b <= K; ++b)
      for (int ch = 0; ch < 3; ++ch) cfg.gamma.at(b, ch) = raw_cfg.gamma.at(b, ch) / st.scale[ch];
  } else {
    obs = raw_obs;
  }

  const WaveletBasis basis(obs.shape);
  EnergyModel model;
  model.obs = &obs;
  model.grid = &grid;
  model.cfg = &cfg;
  model.basis = &basis;
  model.constraint = variant_constraint(opts.variant);
  model.pin_omega = variant_pins_omega(opts.variant);
  model.validate();
  if (!(cfg.rho > 0.0)) throw NonPositiveRho("ADMM needs rho > 0 for the l1 consensus");

  const ScaleSchedule schedule = cfg.schedule.active_bands.empty()
                                     ? default_schedule(basis.num_bands(), cfg.schedule_stages)
                                     : cfg.schedule;
  schedule.validate(basis.num_bands());

  const int m = model.m();
  AdmmResult result;
  result.state = init_state(model, opts, cfg.standardize ? &st : nullptr);
  AMVState& state = result.state;
  DualState duals(K, m, split);
  duals.c_tilde = state.c;
  if (split)
    std::memcpy(duals.w_tilde.data(), state.w_level(1), sizeof(double) * (K - 1) * m);

  // A warm start already satisfying every consensus/constraint tolerance is a
  // fixed point: report convergence without spending an iteration.
  if (opts.warm_start) {
    const Residuals r = primal_residuals(state, duals, grid, split);
    const bool hydro_ok = model.constraint != ConstraintKind::Hard || r.pri_hydro <= opts.eps_pri;
    if (hydro_ok && r.pri_c <= opts.eps_pri && (!split || r.pri_w <= opts.eps_pri)) {
      result.trace.converged = true;
      result.duals = std::move(duals);
      if (cfg.standardize) st.state_to_physical(&result.state, basis);
      return result;
    }
  }

  const double initial_objective = problem_objective(model, state, duals);

  std::vector<int> even_layers, odd_layers;
  for (int k = 0; k < K; k += 2) even_layers.push_back(k);
  for (int k = 1; k < K; k += 2) odd_layers.push_back(k);

  std::vector<double> w_tilde_old;
  for (int iter = 0; iter < opts.max_outer; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool use_multiscale = (iter == 0) && !opts.warm_start;
    int inner_count = 0;
    if (split) w_tilde_old = duals.w_tilde;

    if (!split) {
      const std::vector<double> scales = joint_precond_scales(model);
      ObjectiveFn obj =
          scaled_objective([&](const std::vector<double>& x, std::vector<double>& g) {
            return joint_objective(model, duals, x, &g);
          }, scales);
      std::vector<double> z = pack_joint(model, state);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] /= scales[i];
      MinimizeResult mr;
      if (use_multiscale)
        mr = multiscale_minimize(obj, std::move(z), joint_coord_bands(model), schedule, cfg.inner);
      else
        mr = minimize(obj, std::move(z), cfg.inner);
      inner_count += mr.iterations;
      for (std::size_t i = 0; i < mr.x.size(); ++i) mr.x[i] *= scales[i];
      unpack_joint(model, mr.x, &state);
      if (!model.pin_omega && K > 1)
        exact_wind_update_joint(model, duals, state, state.w_level(1));
    } else {
      // even half-step minimizes G over (d^k, w^k, w^{k+1}, c^k), then the odd
      // half-step minimizes G~ over the w~ copies; the barrier between them is
      // the end of the first parallel loop.
      for (int half = 0; half < 2; ++half) {
        const auto& layers = half == 0 ? even_layers : odd_layers;
        const SubproblemMode mode =
            half == 0 ? SubproblemMode::SplitEven : SubproblemMode::SplitOdd;
        std::vector<int> inner_per(layers.size(), 0);
#pragma omp parallel for schedule(dynamic, 1)
        for (std::size_t idx = 0; idx < layers.size(); ++idx) {
          const int k = layers[idx];
          const SplitLayout layout(model, k);
          const std::vector<double> scales = split_precond_scales(model, layout, mode);
          ObjectiveFn obj =
              scaled_objective([&, k](const std::vector<double>& x, std::vector<double>& g) {
                return layer_objective(model, k, mode, duals, state.w.data(), x, &g);
              }, scales);
          std::vector<double> z = pack_split(model, state, duals, layout, mode);
          for (std::size_t i = 0; i < z.size(); ++i) z[i] /= scales[i];
          MinimizeResult mr;
          if (use_multiscale)
            mr = multiscale_minimize(obj, std::move(z), split_coord_bands(model, layout), schedule,
                                     cfg.inner);
          else
            mr = minimize(obj, std::move(z), cfg.inner);
          inner_per[idx] = mr.iterations;
          for (std::size_t i = 0; i < mr.x.size(); ++i) mr.x[i] *= scales[i];
          unpack_split(model, mr.x, layout, mode, &state, &duals);
          const bool odd = mode == SubproblemMode::SplitOdd;
          double* w_lo =
              layout.lo_free
                  ? (odd ? duals.w_tilde.data() + static_cast<std::size_t>(k - 1) * m
                         : state.w_level(k))
                  : nullptr;
          double* w_hi = layout.hi_free
                             ? (odd ? duals.w_tilde.data() + static_cast<std::size_t>(k) * m
                                    : state.w_level(k + 1))
                             : nullptr;
          exact_wind_update(model, k, mode, duals, state.w.data(), state.d_layer(k, 0),
                            state.c_layer(k, 0), w_lo, w_hi);
        }
        for (int n : inner_per) inner_count += n;
      }
    }
    state.zero_boundary_winds();

    // prox step on the coefficient consensus copies
    std::vector<double> cin(state.c.size());
    for (std::size_t i = 0; i < cin.size(); ++i) cin[i] = state.c[i] + duals.u_c[i];
    std::vector<double> c_tilde_new(cin.size());
    prox_step(cin.data(), K, m, cfg.alpha_x, cfg.rho, c_tilde_new.data());

    // dual updates; the hydrostatic dual freezes at zero in soft mode
    if (model.constraint == ConstraintKind::Hard) {
      std::vector<double> h(static_cast<std::size_t>(K) * m);
      apply_D(state.d.data(), K, state.shape, grid, h.data());
      if (!split) {
        std::vector<double> lw(static_cast<std::size_t>(K) * m);
        apply_L(state.w_level(1), K, state.shape, lw.data());
        for (std::size_t i = 0; i < h.size(); ++i) duals.u_d[i] += h[i] - lw[i];
      } else {
        // even layers consume w, odd layers their w~ copies
        for (int k = 0; k < K; ++k) {
          const bool odd = (k % 2 == 1);
          const double* lo =
              k == 0 ? nullptr
                     : (odd ? duals.w_tilde.data() + static_cast<std::size_t>(k - 1) * m
                            : state.w_level(k));
          const double* hi =
              k + 1 == K ? nullptr
                         : (odd ? duals.w_tilde.data() + static_cast<std::size_t>(k) * m
                                : state.w_level(k + 1));
          double* ud = duals.u_d.data() + static_cast<std::size_t>(k) * m;
          const double* hk = h.data() + static_cast<std::size_t>(k) * m;
          for (int j = 0; j < m; ++j)
            ud[j] += hk[j] - (lo ? lo[j] : 0.0) + (hi ? hi[j] : 0.0);
        }
      }
    }
    double dual_c, dual_w = 0.0;
    {
      dual_c = rel_gap(c_tilde_new.data(), duals.c_tilde.data(), c_tilde_new.size());
      for (std::size_t i = 0; i < state.c.size(); ++i)
        duals.u_c[i] += state.c[i] - c_tilde_new[i];
      duals.c_tilde = std::move(c_tilde_new);
    }
    if (split && K > 1) {
      const std::size_t nw = static_cast<std::size_t>(K - 1) * m;
      dual_w = rel_gap(duals.w_tilde.data(), w_tilde_old.data(), nw);
      for (std::size_t i = 0; i < nw; ++i)
        duals.u_w[i] += state.w_level(1)[i] - duals.w_tilde[i];
    }

    const Residuals r = primal_residuals(state, duals, grid, split);
    AdmmIterationRecord rec;
    rec.iteration = iter;
    rec.objective = problem_objective(model, state, duals);
    rec.pri_hydro = r.pri_hydro;
    rec.pri_c = r.pri_c;
    rec.pri_w = r.pri_w;
    rec.dual_c = dual_c;
    rec.dual_w = dual_w;
    rec.inner_iterations = inner_count;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.records.push_back(rec);

    if (rec.objective > 1e6 * std::max(initial_objective, 1e-12))
      throw DivergenceDetected("objective exceeded 1e6x its initial value");

    const bool hydro_ok = model.constraint != ConstraintKind::Hard || r.pri_hydro <= opts.eps_pri;
    const bool pri_ok = hydro_ok && r.pri_c <= opts.eps_pri && (!split || r.pri_w <= opts.eps_pri);
    const bool dual_ok = dual_c <= opts.eps_dual && dual_w <= opts.eps_dual;
    if (pri_ok && dual_ok) {
      result.trace.converged = true;
      break;
    }
  }

  if (split && K > 1) {
    double winf = 0.0;
    const double* w = state.w_level(1);
    for (std::size_t i = 0; i < static_cast<std::size_t>(K - 1) * m; ++i)
      winf = std::max(winf, std::fabs(w[i] - duals.w_tilde[i]));
    result.w_disagreement_inf = winf;
  }

  result.duals = std::move(duals);
  if (cfg.standardize) st.state_to_physical(&result.state, basis);
  return result;
}

}  // namespace

void AdmmOptions::validate() const {
  if (!(eps_pri > 0.0) || !(eps_dual > 0.0)) throw InvalidSpec("tolerances must be positive");
  if (max_outer < 1) throw InvalidSpec("need at least one outer iteration");
}

Variant variant_from_string(const std::string& name) {
  if (name == "2d") return Variant::V2d;
  if (name == "2d-inc" || name == "2d_incompressible") return Variant::V2dIncompressible;
  if (name == "3d") return Variant::V3d;
  if (name == "3d-hydro-soft" || name == "3d_hydro_soft") return Variant::V3dHydroSoft;
  if (name == "3d-hydro-hard" || name == "3d_hydro_hard") return Variant::V3dHydroHard;
  throw InvalidSpec("unknown variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::V2d: return "2d";
    case Variant::V2dIncompressible: return "2d-inc";
    case Variant::V3d: return "3d";
    case Variant::V3dHydroSoft: return "3d-hydro-soft";
    case Variant::V3dHydroHard: return "3d-hydro-hard";
  }
  return "?";
}

ConstraintKind variant_constraint(Variant v) {
  switch (v) {
    case Variant::V2d:
    case Variant::V3d: return ConstraintKind::None;
    case Variant::V2dIncompressible:
    case Variant::V3dHydroSoft: return ConstraintKind::Soft;
    case Variant::V3dHydroHard: return ConstraintKind::Hard;
  }
  return ConstraintKind::None;
}

bool variant_pins_omega(Variant v) {
  return v == Variant::V2d || v == Variant::V2dIncompressible;
}

void AdmmTrace::write_csv(const std::string& path) const {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open " + path);
  std::fprintf(f,
               "iteration,objective,pri_hydro,pri_c,pri_w,dual_c,dual_w,inner_iterations,"
               "wall_seconds\n");
  for (const auto& r : records)
    std::fprintf(f, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%.9g\n", r.iteration, r.objective,
                 r.pri_hydro, r.pri_c, r.pri_w, r.dual_c, r.dual_w, r.inner_iterations,
                 r.wall_seconds);
  std::fclose(f);
}

AdmmResult run_joint_admm(const ObservationSet& obs, const PressureGrid& grid,
                          const SolverConfig& cfg, const AdmmOptions& opts) {
  if (opts.mode != AdmmMode::Joint) throw InvalidSpec("run_joint_admm needs mode = joint");
  return run_admm(obs, grid, cfg, opts);
}

AdmmResult run_split_admm(const ObservationSet& obs, const PressureGrid& grid,
                          const SolverConfig& cfg, const AdmmOptions& opts) {
  if (opts.mode != AdmmMode::Split) throw InvalidSpec("run_split_admm needs mode = split");
  return run_admm(obs, grid, cfg, opts);
}

AdmmResult run_variant(const ObservationSet& obs, const PressureGrid& grid,
                       const SolverConfig& cfg, const AdmmOptions& opts) {
  return opts.mode == AdmmMode::Split ? run_split_admm(obs, grid, cfg, opts)
                                      : run_joint_admm(obs, grid, cfg, opts);
}

}  // namespace amv
