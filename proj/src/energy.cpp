#include "amv/energy.hpp"

#include <cmath>
#include <cstring>

#include "amv/rng.hpp"

namespace amv {

void SolverConfig::validate(int K) const {
  if (alpha_d.size() != static_cast<std::size_t>(K) ||
      alpha_x.size() != static_cast<std::size_t>(K))
    throw ShapeMismatch("alpha_d / alpha_x must have one entry per layer");
  for (double a : alpha_d)
    if (!(a > 0.0)) throw InvalidSpec("alpha_d entries must be positive");
  for (double a : alpha_x)
    if (!(a > 0.0)) throw InvalidSpec("alpha_x entries must be positive");
  if (!(tikhonov > 2.3e-16)) throw InvalidSpec("tikhonov delta must exceed machine epsilon");
  if (rho < 0.0) throw InvalidSpec("rho must be nonnegative");
  if (gamma.boundaries() != K + 1) throw ShapeMismatch("gamma needs K+1 boundary rows");
}

SolverConfig SolverConfig::defaults(int K) {
  SolverConfig cfg;
  cfg.alpha_d.assign(K, 3e-3);
  cfg.alpha_x.assign(K, 2e-3);
  cfg.gamma = PhysicsConstants(K);
  return cfg;
}

DualState::DualState(int K, int m, bool split) {
  u_d.assign(static_cast<std::size_t>(K) * m, 0.0);
  u_c.assign(static_cast<std::size_t>(K) * 3 * m, 0.0);
  c_tilde.assign(static_cast<std::size_t>(K) * 3 * m, 0.0);
  if (split) {
    u_w.assign(static_cast<std::size_t>(K - 1) * m, 0.0);
    w_tilde.assign(static_cast<std::size_t>(K - 1) * m, 0.0);
  }
}

void EnergyModel::validate() const {
  if (!obs || !grid || !cfg || !basis) throw InvalidSpec("energy model is missing a component");
  if (obs->K != grid->K()) throw ShapeMismatch("observation layers != pressure layers");
  if (!(obs->shape == basis->shape())) throw ShapeMismatch("observation grid != wavelet grid");
  cfg->validate(grid->K());
  if (constraint != ConstraintKind::None && !(cfg->rho > 0.0))
    throw NonPositiveRho("constrained modes need rho > 0");
}

std::vector<double> residual(const AMVState& state, const ObservationSet& obs,
                             const PhysicsConstants& gamma, const PressureGrid& grid, double dt) {
  const int K = state.K;
  const int m = state.shape.m();
  if (obs.K != K || !(obs.shape == state.shape)) throw ShapeMismatch("state/observation mismatch");
  if (gamma.boundaries() != K + 1) throw ShapeMismatch("gamma needs K+1 boundary rows");
  if (grid.K() != K) throw ShapeMismatch("pressure grid layer mismatch");
  const WaveletBasis basis(state.shape);

  std::vector<double> res(static_cast<std::size_t>(2) * K * 3 * m, 0.0);
  double* r0 = res.data();
  double* r1 = res.data() + static_cast<std::size_t>(K) * 3 * m;

#pragma omp parallel for
  for (int k = 0; k < K; ++k) {
    std::vector<double> x1(static_cast<std::size_t>(3) * m);
    for (int ch = 0; ch < 3; ++ch)
      iwt2(state.c_layer(k, ch), basis, x1.data() + static_cast<std::size_t>(ch) * m);

    std::vector<double> warped(static_cast<std::size_t>(3) * m);
    warp_layer(x1.data(), state.d_layer(k, 0), state.w_level(k), state.w_level(k + 1),
               &gamma.gamma[static_cast<std::size_t>(k) * 3],
               &gamma.gamma[static_cast<std::size_t>(k + 1) * 3], dt, state.shape, warped.data());

    const std::uint8_t* m0 = obs.mask_layer(Time::T0, k);
    const std::uint8_t* m1 = obs.mask_layer(Time::T1, k);
    for (int ch = 0; ch < 3; ++ch) {
      const double* y0 = obs.y_layer(Time::T0, k, ch);
      const double* y1 = obs.y_layer(Time::T1, k, ch);
      double* o0 = r0 + (static_cast<std::size_t>(k) * 3 + ch) * m;
      double* o1 = r1 + (static_cast<std::size_t>(k) * 3 + ch) * m;
      for (int j = 0; j < m; ++j) {
        o0[j] = m0[j] ? warped[static_cast<std::size_t>(ch) * m + j] - y0[j] : 0.0;
        o1[j] = m1[j] ? x1[static_cast<std::size_t>(ch) * m + j] - y1[j] : 0.0;
      }
    }
  }
  return res;
}

double data_term(const AMVState& state, const ObservationSet& obs, const PhysicsConstants& gamma,
                 const PressureGrid& grid, double dt) {
  const std::vector<double> res = residual(state, obs, gamma, grid, dt);
  double s = 0.0;
  for (double v : res) s += v * v;
  return 0.5 * s;
}

double reg_d(const std::vector<double>& d, int K, const GridShape& shape,
             const std::vector<double>& alpha_d, double tikhonov) {
  const int m = shape.m();
  if (d.size() != static_cast<std::size_t>(K) * 2 * m) throw ShapeMismatch("bad displacement size");
  std::vector<double> lap(m);
  double val = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int comp = 0; comp < 2; ++comp) {
      const double* dc = d.data() + (static_cast<std::size_t>(k) * 2 + comp) * m;
      laplacian(dc, shape, lap.data());
      double s2 = 0.0, t2 = 0.0;
      for (int j = 0; j < m; ++j) {
        s2 += lap[j] * lap[j];
        t2 += dc[j] * dc[j];
      }
      val += 0.5 * alpha_d[k] * s2 + tikhonov * t2;
    }
  }
  return val;
}

SplitLayout::SplitLayout(const EnergyModel& model, int layer)
    : k(layer), m(model.m()), lo_free(model.wind_free(layer)),
      hi_free(model.wind_free(layer + 1)) {}

namespace {

struct LayerGrads {
  double* d = nullptr;     // 2m, pixel domain
  double* w_lo = nullptr;  // m
  double* w_hi = nullptr;  // m
  double* c = nullptr;     // 3m, coefficient domain
};

// Value and gradient accumulation for one layer-pair objective.  Null wind
// pointers stand for the pinned zero boundary planes.
double eval_layer(const EnergyModel& model, int k, SubproblemMode mode, const DualState& duals,
                  const double* w_new, const double* d, const double* w_lo, const double* w_hi,
                  const double* c, const LayerGrads& g) {
  const int m = model.m();
  const GridShape& shape = model.shape();
  const SolverConfig& cfg = *model.cfg;
  const ObservationSet& obs = *model.obs;
  const double dt = cfg.dt;
  const double rho = cfg.rho;
  const double* gk = &cfg.gamma.gamma[static_cast<std::size_t>(k) * 3];
  const double* gk1 = &cfg.gamma.gamma[static_cast<std::size_t>(k + 1) * 3];

  double value = 0.0;

  // x_t1 synthesis and spline coefficients
  std::vector<double> x1(static_cast<std::size_t>(3) * m);
  SplinePlane planes[3];
  for (int ch = 0; ch < 3; ++ch) {
    iwt2(c + static_cast<std::size_t>(ch) * m, *model.basis,
         x1.data() + static_cast<std::size_t>(ch) * m);
    planes[ch] = prefilter(x1.data() + static_cast<std::size_t>(ch) * m, shape);
  }

  // t0 data term through the warp; the pixel loop stays serial because the
  // splat writes overlap, parallelism lives at the layer/subproblem level.
  std::vector<double> xgrad(static_cast<std::size_t>(3) * m, 0.0);  // d(data)/d(x1 pixels)
  const std::uint8_t* m0 = obs.mask_layer(Time::T0, k);
  const std::uint8_t* m1 = obs.mask_layer(Time::T1, k);
  const double* du = d;
  const double* dv = d + m;
  SplineTaps taps;
  for (int j = 0; j < m; ++j) {
    if (!m0[j]) continue;
    make_taps(shape, shape.x_of(j) + du[j], shape.y_of(j) + dv[j], taps);
    const double lo_j = w_lo ? w_lo[j] : 0.0;
    const double hi_j = w_hi ? w_hi[j] : 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      const double* cp = planes[ch].coeffs.data();
      double v = 0.0, gx = 0.0, gy = 0.0;
      for (int b = 0; b < 4; ++b) {
        const double* row = cp + static_cast<std::size_t>(taps.iy[b]) * shape.cols;
        double rv = 0.0, rd = 0.0;
        for (int a = 0; a < 4; ++a) {
          rv += row[taps.ix[a]] * taps.wx[a];
          rd += row[taps.ix[a]] * taps.dwx[a];
        }
        v += rv * taps.wy[b];
        gx += rd * taps.wy[b];
        gy += rv * taps.dwy[b];
      }
      const double w = v - 0.5 * dt * (gk[ch] * lo_j + gk1[ch] * hi_j);
      const double r0 = w - obs.y_layer(Time::T0, k, ch)[j];
      value += 0.5 * r0 * r0;
      if (g.d) {
        g.d[j] += r0 * gx;
        g.d[m + j] += r0 * gy;
      }
      if (g.w_lo) g.w_lo[j] -= 0.5 * dt * gk[ch] * r0;
      if (g.w_hi) g.w_hi[j] -= 0.5 * dt * gk1[ch] * r0;
      if (g.c) {
        double* sp = xgrad.data() + static_cast<std::size_t>(ch) * m;
        for (int b = 0; b < 4; ++b) {
          double* row = sp + static_cast<std::size_t>(taps.iy[b]) * shape.cols;
          const double wyb = r0 * taps.wy[b];
          for (int a = 0; a < 4; ++a) row[taps.ix[a]] += wyb * taps.wx[a];
        }
      }
    }
  }

  if (g.c)  // adjoint of the (symmetric) prefilter applied to the splat
    for (int ch = 0; ch < 3; ++ch)
      prefilter_inplace(xgrad.data() + static_cast<std::size_t>(ch) * m, shape);

  // t1 data term, linear in x1
  for (int ch = 0; ch < 3; ++ch) {
    const double* y1 = obs.y_layer(Time::T1, k, ch);
    const double* xc = x1.data() + static_cast<std::size_t>(ch) * m;
    double* xg = xgrad.data() + static_cast<std::size_t>(ch) * m;
    for (int j = 0; j < m; ++j) {
      if (!m1[j]) continue;
      const double r1 = xc[j] - y1[j];
      value += 0.5 * r1 * r1;
      if (g.c) xg[j] += r1;
    }
  }

  if (g.c) {  // chain to coefficients through the orthonormal synthesis
    std::vector<double> tmp(m);
    for (int ch = 0; ch < 3; ++ch) {
      fwt2(xgrad.data() + static_cast<std::size_t>(ch) * m, *model.basis, tmp.data());
      double* gc = g.c + static_cast<std::size_t>(ch) * m;
      for (int j = 0; j < m; ++j) gc[j] += tmp[j];
    }
  }

  // Laplacian regularizer + Tikhonov coercivity term
  {
    const double alpha = cfg.alpha_d[k];
    std::vector<double> lap(m), lap2(m);
    for (int comp = 0; comp < 2; ++comp) {
      const double* dc = d + static_cast<std::size_t>(comp) * m;
      laplacian(dc, shape, lap.data());
      double s2 = 0.0, t2 = 0.0;
      for (int j = 0; j < m; ++j) {
        s2 += lap[j] * lap[j];
        t2 += dc[j] * dc[j];
      }
      value += 0.5 * alpha * s2 + cfg.tikhonov * t2;
      if (g.d) {
        laplacian(lap.data(), shape, lap2.data());
        double* gd = g.d + static_cast<std::size_t>(comp) * m;
        for (int j = 0; j < m; ++j) gd[j] += alpha * lap2[j] + 2.0 * cfg.tikhonov * dc[j];
      }
    }
  }

  // hydrostatic-constraint penalty rho/2 ||dp div d - w_lo + w_hi + u_d||^2
  if (model.constraint != ConstraintKind::None) {
    if (!(rho > 0.0)) throw NonPositiveRho("constraint penalty needs rho > 0");
    const double dp = model.grid->increments[k];
    std::vector<double> res(m);
    divergence(du, dv, shape, res.data());
    const double* ud = duals.u_d.data() + static_cast<std::size_t>(k) * m;
    for (int j = 0; j < m; ++j) {
      res[j] = dp * res[j] - (w_lo ? w_lo[j] : 0.0) + (w_hi ? w_hi[j] : 0.0) + ud[j];
      value += 0.5 * rho * res[j] * res[j];
    }
    if (g.d) {
      std::vector<double> au(m), av(m);
      divergence_adjoint(res.data(), shape, au.data(), av.data());
      for (int j = 0; j < m; ++j) {
        g.d[j] += rho * dp * au[j];
        g.d[m + j] += rho * dp * av[j];
      }
    }
    if (g.w_lo)
      for (int j = 0; j < m; ++j) g.w_lo[j] -= rho * res[j];
    if (g.w_hi)
      for (int j = 0; j < m; ++j) g.w_hi[j] += rho * res[j];
  }

  // coefficient consensus rho/2 ||c - c~ + u_c||^2
  if (rho > 0.0) {
    const double* ct = duals.c_tilde.data() + static_cast<std::size_t>(k) * 3 * m;
    const double* uc = duals.u_c.data() + static_cast<std::size_t>(k) * 3 * m;
    for (int i = 0; i < 3 * m; ++i) {
      const double r = c[i] - ct[i] + uc[i];
      value += 0.5 * rho * r * r;
      if (g.c) g.c[i] += rho * r;
    }
  }

  // wind consensus terms of the split recursions
  if (mode != SubproblemMode::Joint && rho > 0.0) {
    const int levels[2] = {k, k + 1};
    const double* winds[2] = {w_lo, w_hi};
    double* wgrads[2] = {g.w_lo, g.w_hi};
    for (int s = 0; s < 2; ++s) {
      const int level = levels[s];
      if (!model.wind_free(level)) continue;
      const std::size_t off = static_cast<std::size_t>(level - 1) * m;
      const double* uw = duals.u_w.data() + off;
      if (mode == SubproblemMode::SplitEven) {
        const double* wt = duals.w_tilde.data() + off;
        const double* w = winds[s];
        for (int j = 0; j < m; ++j) {
          const double r = (w ? w[j] : 0.0) - wt[j] + uw[j];
          value += 0.5 * rho * r * r;
          if (wgrads[s]) wgrads[s][j] += rho * r;
        }
      } else {  // SplitOdd: unknown is the w~ copy, anchored at the fresh w
        const double* wn = w_new + static_cast<std::size_t>(level) * m;
        const double* wt = winds[s];
        for (int j = 0; j < m; ++j) {
          const double r = wn[j] - (wt ? wt[j] : 0.0) + uw[j];
          value += 0.5 * rho * r * r;
          if (wgrads[s]) wgrads[s][j] -= rho * r;
        }
      }
    }
  }

  return value;
}

}  // namespace

double layer_objective(const EnergyModel& model, int k, SubproblemMode mode,
                       const DualState& duals, const double* w_new, const std::vector<double>& x,
                       std::vector<double>* grad) {
  const SplitLayout layout(model, k);
  if (x.size() != layout.size()) throw ShapeMismatch("subproblem vector size mismatch");
  if (mode == SubproblemMode::SplitOdd && !w_new)
    throw InvalidSpec("SplitOdd needs the updated winds");
  const int m = layout.m;

  std::vector<double> d(static_cast<std::size_t>(2) * m);
  iwt2(x.data() + layout.wd_off(), *model.basis, d.data());
  iwt2(x.data() + layout.wd_off() + m, *model.basis, d.data() + m);

  const double* w_lo = layout.lo_free ? x.data() + layout.w_lo_off() : nullptr;
  const double* w_hi = layout.hi_free ? x.data() + layout.w_hi_off() : nullptr;
  const double* c = x.data() + layout.c_off();

  LayerGrads g;
  std::vector<double> gd;
  if (grad) {
    grad->assign(x.size(), 0.0);
    gd.assign(static_cast<std::size_t>(2) * m, 0.0);
    g.d = gd.data();
    g.w_lo = layout.lo_free ? grad->data() + layout.w_lo_off() : nullptr;
    g.w_hi = layout.hi_free ? grad->data() + layout.w_hi_off() : nullptr;
    g.c = grad->data() + layout.c_off();
  }

  const double value = eval_layer(model, k, mode, duals, w_new, d.data(), w_lo, w_hi, c, g);

  if (grad) {
    fwt2(gd.data(), *model.basis, grad->data() + layout.wd_off());
    fwt2(gd.data() + m, *model.basis, grad->data() + layout.wd_off() + m);
  }
  return value;
}

std::size_t joint_size(const EnergyModel& model) {
  const int K = model.K();
  const int m = model.m();
  std::size_t n = static_cast<std::size_t>(K) * 2 * m + static_cast<std::size_t>(K) * 3 * m;
  if (!model.pin_omega) n += static_cast<std::size_t>(K - 1) * m;
  return n;
}

double joint_objective(const EnergyModel& model, const DualState& duals,
                       const std::vector<double>& x, std::vector<double>* grad) {
  const int K = model.K();
  const int m = model.m();
  if (x.size() != joint_size(model)) throw ShapeMismatch("joint vector size mismatch");
  const std::size_t w_off = static_cast<std::size_t>(K) * 2 * m;
  const std::size_t c_off = w_off + (model.pin_omega ? 0 : static_cast<std::size_t>(K - 1) * m);

  if (grad) grad->assign(x.size(), 0.0);

  std::vector<double> values(K, 0.0);
  // per-layer wind-gradient planes, merged serially afterwards
  std::vector<double> wlo_grad, whi_grad;
  if (grad && !model.pin_omega) {
    wlo_grad.assign(static_cast<std::size_t>(K) * m, 0.0);
    whi_grad.assign(static_cast<std::size_t>(K) * m, 0.0);
  }

#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < K; ++k) {
    std::vector<double> d(static_cast<std::size_t>(2) * m);
    iwt2(x.data() + (static_cast<std::size_t>(k) * 2 + 0) * m, *model.basis, d.data());
    iwt2(x.data() + (static_cast<std::size_t>(k) * 2 + 1) * m, *model.basis, d.data() + m);

    const double* w_lo =
        (!model.pin_omega && k > 0) ? x.data() + w_off + static_cast<std::size_t>(k - 1) * m
                                    : nullptr;
    const double* w_hi =
        (!model.pin_omega && k + 1 < K) ? x.data() + w_off + static_cast<std::size_t>(k) * m
                                        : nullptr;
    const double* c = x.data() + c_off + static_cast<std::size_t>(k) * 3 * m;

    LayerGrads g;
    std::vector<double> gd;
    if (grad) {
      gd.assign(static_cast<std::size_t>(2) * m, 0.0);
      g.d = gd.data();
      g.w_lo = w_lo ? wlo_grad.data() + static_cast<std::size_t>(k) * m : nullptr;
      g.w_hi = w_hi ? whi_grad.data() + static_cast<std::size_t>(k) * m : nullptr;
      g.c = grad->data() + c_off + static_cast<std::size_t>(k) * 3 * m;
    }

    values[k] =
        eval_layer(model, k, SubproblemMode::Joint, duals, nullptr, d.data(), w_lo, w_hi, c, g);

    if (grad) {
      fwt2(gd.data(), *model.basis, grad->data() + (static_cast<std::size_t>(k) * 2 + 0) * m);
      fwt2(gd.data() + m, *model.basis,
           grad->data() + (static_cast<std::size_t>(k) * 2 + 1) * m);
    }
  }

  if (grad && !model.pin_omega) {
    for (int level = 1; level < K; ++level) {
      double* gw = grad->data() + w_off + static_cast<std::size_t>(level - 1) * m;
      const double* from_lo = wlo_grad.data() + static_cast<std::size_t>(level) * m;
      const double* from_hi = whi_grad.data() + static_cast<std::size_t>(level - 1) * m;
      for (int j = 0; j < m; ++j) gw[j] += from_lo[j] + from_hi[j];
    }
  }

  double total = 0.0;
  for (int k = 0; k < K; ++k) total += values[k];
  return total;
}

namespace {

// warped spline values minus y0 per channel at every pixel of layer k
void warp_discrepancy(const EnergyModel& model, int k, const double* d, const double* c,
                      std::vector<double>& out) {
  const int m = model.m();
  const GridShape& shape = model.shape();
  std::vector<double> x1(m);
  SplinePlane planes[3];
  for (int ch = 0; ch < 3; ++ch) {
    iwt2(c + static_cast<std::size_t>(ch) * m, *model.basis, x1.data());
    planes[ch] = prefilter(x1.data(), shape);
  }
  out.assign(static_cast<std::size_t>(3) * m, 0.0);
  const std::uint8_t* m0 = model.obs->mask_layer(Time::T0, k);
#pragma omp parallel for
  for (int j = 0; j < m; ++j) {
    if (!m0[j]) continue;
    const double px = shape.x_of(j) + d[j];
    const double py = shape.y_of(j) + d[m + j];
    for (int ch = 0; ch < 3; ++ch)
      out[static_cast<std::size_t>(ch) * m + j] =
          interp(planes[ch], px, py) - model.obs->y_layer(Time::T0, k, ch)[j];
  }
}

}  // namespace

void exact_wind_update(const EnergyModel& model, int k, SubproblemMode mode,
                       const DualState& duals, const double* w_new, const double* d,
                       const double* c, double* w_lo, double* w_hi) {
  if (!w_lo && !w_hi) return;
  if (mode == SubproblemMode::Joint) throw InvalidSpec("joint mode has its own wind update");
  const int m = model.m();
  const SolverConfig& cfg = *model.cfg;
  const double rho = cfg.rho;
  const double dt = cfg.dt;
  const double* gk = &cfg.gamma.gamma[static_cast<std::size_t>(k) * 3];
  const double* gk1 = &cfg.gamma.gamma[static_cast<std::size_t>(k + 1) * 3];

  std::vector<double> disc;
  warp_discrepancy(model, k, d, c, disc);

  const bool con = model.constraint != ConstraintKind::None;
  std::vector<double> q;
  if (con) {
    q.resize(m);
    divergence(d, d + m, model.shape(), q.data());
    const double dp = model.grid->increments[k];
    const double* ud = duals.u_d.data() + static_cast<std::size_t>(k) * m;
    for (int j = 0; j < m; ++j) q[j] = dp * q[j] + ud[j];
  }

  const std::uint8_t* m0 = model.obs->mask_layer(Time::T0, k);
  const double* uw = duals.u_w.data();
  const double* wt = duals.w_tilde.data();
#pragma omp parallel for
  for (int j = 0; j < m; ++j) {
    double Haa = 0.0, Hbb = 0.0, Hab = 0.0, ra = 0.0, rb = 0.0;
    if (m0[j]) {
      for (int ch = 0; ch < 3; ++ch) {
        const double e = 0.5 * dt * gk[ch];
        const double f = 0.5 * dt * gk1[ch];
        const double p = disc[static_cast<std::size_t>(ch) * m + j];
        Haa += e * e;
        Hbb += f * f;
        Hab += e * f;
        ra += e * p;
        rb += f * p;
      }
    }
    if (con) {
      Haa += rho;
      Hbb += rho;
      Hab -= rho;
      ra += rho * q[j];
      rb -= rho * q[j];
    }
    if (w_lo) {
      const std::size_t off = static_cast<std::size_t>(k - 1) * m + j;
      const double anchor = (mode == SubproblemMode::SplitEven) ? wt[off] - uw[off]
                                                                : w_new[static_cast<std::size_t>(k) * m + j] + uw[off];
      Haa += rho;
      ra += rho * anchor;
    }
    if (w_hi) {
      const std::size_t off = static_cast<std::size_t>(k) * m + j;
      const double anchor = (mode == SubproblemMode::SplitEven)
                                ? wt[off] - uw[off]
                                : w_new[static_cast<std::size_t>(k + 1) * m + j] + uw[off];
      Hbb += rho;
      rb += rho * anchor;
    }
    if (w_lo && w_hi) {
      const double det = Haa * Hbb - Hab * Hab;
      if (det > 1e-300) {
        w_lo[j] = (Hbb * ra - Hab * rb) / det;
        w_hi[j] = (Haa * rb - Hab * ra) / det;
      }
    } else if (w_lo) {
      if (Haa > 1e-300) w_lo[j] = ra / Haa;
    } else if (w_hi) {
      if (Hbb > 1e-300) w_hi[j] = rb / Hbb;
    }
  }
}

void exact_wind_update_joint(const EnergyModel& model, const DualState& duals,
                             const AMVState& state, double* w_interior) {
  const int K = model.K();
  const int m = model.m();
  if (K < 2 || model.pin_omega) return;
  const SolverConfig& cfg = *model.cfg;
  const double rho = cfg.rho;
  const double dt = cfg.dt;
  const bool con = model.constraint != ConstraintKind::None;

  // per-layer ingredients: warp discrepancies and constraint anchors
  std::vector<std::vector<double>> disc(K), q(K);
  for (int k = 0; k < K; ++k) {
    warp_discrepancy(model, k, state.d_layer(k, 0), state.c_layer(k, 0), disc[k]);
    if (con) {
      q[k].resize(m);
      divergence(state.d_layer(k, 0), state.d_layer(k, 1), model.shape(), q[k].data());
      const double dp = model.grid->increments[k];
      const double* ud = duals.u_d.data() + static_cast<std::size_t>(k) * m;
      for (int j = 0; j < m; ++j) q[k][j] = dp * q[k][j] + ud[j];
    }
  }

  const int n = K - 1;
#pragma omp parallel for
  for (int j = 0; j < m; ++j) {
    // symmetric tridiagonal normal matrix over the interior levels
    std::vector<double> diag(n, 0.0), off(n - 1, 0.0), rhs(n, 0.0);
    for (int k = 0; k < K; ++k) {
      const int ilo = k - 1;   // index of w^k among the unknowns
      const int ihi = k;       // index of w^{k+1}
      const bool lo = k > 0;
      const bool hi = k + 1 < K;
      if (model.obs->mask_layer(Time::T0, k)[j]) {
        const double* gk = &cfg.gamma.gamma[static_cast<std::size_t>(k) * 3];
        const double* gk1 = &cfg.gamma.gamma[static_cast<std::size_t>(k + 1) * 3];
        for (int ch = 0; ch < 3; ++ch) {
          const double e = 0.5 * dt * gk[ch];
          const double f = 0.5 * dt * gk1[ch];
          const double p = disc[k][static_cast<std::size_t>(ch) * m + j];
          if (lo) {
            diag[ilo] += e * e;
            rhs[ilo] += e * p;
          }
          if (hi) {
            diag[ihi] += f * f;
            rhs[ihi] += f * p;
          }
          if (lo && hi) off[ilo] += e * f;
        }
      }
      if (con) {
        if (lo) {
          diag[ilo] += rho;
          rhs[ilo] += rho * q[k][j];
        }
        if (hi) {
          diag[ihi] += rho;
          rhs[ihi] -= rho * q[k][j];
        }
        if (lo && hi) off[ilo] -= rho;
      }
    }
    for (int i = 0; i < n; ++i)
      if (diag[i] <= 1e-300) {  // untouched unknown, hold its value
        diag[i] = 1.0;
        rhs[i] = w_interior[static_cast<std::size_t>(i) * m + j];
      }
    // Thomas solve
    std::vector<double> cp(n, 0.0), dp2(n, 0.0);
    cp[0] = (n > 1) ? off[0] / diag[0] : 0.0;
    dp2[0] = rhs[0] / diag[0];
    for (int i = 1; i < n; ++i) {
      const double denom = diag[i] - off[i - 1] * cp[i - 1];
      if (i < n - 1) cp[i] = off[i] / denom;
      dp2[i] = (rhs[i] - off[i - 1] * dp2[i - 1]) / denom;
    }
    w_interior[static_cast<std::size_t>(n - 1) * m + j] = dp2[n - 1];
    for (int i = n - 2; i >= 0; --i)
      w_interior[static_cast<std::size_t>(i) * m + j] =
          dp2[i] - cp[i] * w_interior[static_cast<std::size_t>(i + 1) * m + j];
  }
}

std::vector<double> pack_split(const EnergyModel& model, const AMVState& state,
                               const DualState& duals, const SplitLayout& layout,
                               SubproblemMode mode) {
  const int m = layout.m;
  const int k = layout.k;
  std::vector<double> x(layout.size());
  fwt2(state.d_layer(k, 0), *model.basis, x.data() + layout.wd_off());
  fwt2(state.d_layer(k, 1), *model.basis, x.data() + layout.wd_off() + m);
  const bool from_tilde = (mode == SubproblemMode::SplitOdd);
  if (layout.lo_free) {
    const double* src = from_tilde ? duals.w_tilde.data() + static_cast<std::size_t>(k - 1) * m
                                   : state.w_level(k);
    std::memcpy(x.data() + layout.w_lo_off(), src, sizeof(double) * m);
  }
  if (layout.hi_free) {
    const double* src = from_tilde ? duals.w_tilde.data() + static_cast<std::size_t>(k) * m
                                   : state.w_level(k + 1);
    std::memcpy(x.data() + layout.w_hi_off(), src, sizeof(double) * m);
  }
  std::memcpy(x.data() + layout.c_off(), state.c_layer(k, 0), sizeof(double) * 3 * m);
  return x;
}

void unpack_split(const EnergyModel& model, const std::vector<double>& x,
                  const SplitLayout& layout, SubproblemMode mode, AMVState* state,
                  DualState* duals) {
  const int m = layout.m;
  const int k = layout.k;
  if (x.size() != layout.size()) throw ShapeMismatch("subproblem vector size mismatch");
  iwt2(x.data() + layout.wd_off(), *model.basis, state->d_layer(k, 0));
  iwt2(x.data() + layout.wd_off() + m, *model.basis, state->d_layer(k, 1));
  const bool to_tilde = (mode == SubproblemMode::SplitOdd);
  if (layout.lo_free) {
    double* dst = to_tilde ? duals->w_tilde.data() + static_cast<std::size_t>(k - 1) * m
                           : state->w_level(k);
    std::memcpy(dst, x.data() + layout.w_lo_off(), sizeof(double) * m);
  }
  if (layout.hi_free) {
    double* dst =
        to_tilde ? duals->w_tilde.data() + static_cast<std::size_t>(k) * m : state->w_level(k + 1);
    std::memcpy(dst, x.data() + layout.w_hi_off(), sizeof(double) * m);
  }
  std::memcpy(state->c_layer(k, 0), x.data() + layout.c_off(), sizeof(double) * 3 * m);
}

std::vector<double> pack_joint(const EnergyModel& model, const AMVState& state) {
  const int K = model.K();
  const int m = model.m();
  std::vector<double> x(joint_size(model));
  for (int k = 0; k < K; ++k) {
    fwt2(state.d_layer(k, 0), *model.basis, x.data() + (static_cast<std::size_t>(k) * 2 + 0) * m);
    fwt2(state.d_layer(k, 1), *model.basis, x.data() + (static_cast<std::size_t>(k) * 2 + 1) * m);
  }
  std::size_t off = static_cast<std::size_t>(K) * 2 * m;
  if (!model.pin_omega) {
    for (int level = 1; level < K; ++level, off += m)
      std::memcpy(x.data() + off, state.w_level(level), sizeof(double) * m);
  }
  std::memcpy(x.data() + off, state.c.data(), sizeof(double) * state.c.size());
  return x;
}

void unpack_joint(const EnergyModel& model, const std::vector<double>& x, AMVState* state) {
  const int K = model.K();
  const int m = model.m();
  if (x.size() != joint_size(model)) throw ShapeMismatch("joint vector size mismatch");
  for (int k = 0; k < K; ++k) {
    iwt2(x.data() + (static_cast<std::size_t>(k) * 2 + 0) * m, *model.basis, state->d_layer(k, 0));
    iwt2(x.data() + (static_cast<std::size_t>(k) * 2 + 1) * m, *model.basis, state->d_layer(k, 1));
  }
  std::size_t off = static_cast<std::size_t>(K) * 2 * m;
  if (!model.pin_omega) {
    for (int level = 1; level < K; ++level, off += m)
      std::memcpy(state->w_level(level), x.data() + off, sizeof(double) * m);
  } else {
    std::fill(state->w.begin(), state->w.end(), 0.0);
  }
  std::memcpy(state->c.data(), x.data() + off, sizeof(double) * state->c.size());
  state->zero_boundary_winds();
}

std::vector<std::uint8_t> split_coord_bands(const EnergyModel& model, const SplitLayout& layout) {
  const int m = layout.m;
  const auto& band = model.basis->band_map();
  std::vector<std::uint8_t> out(layout.size(), kAlwaysActive);
  for (int j = 0; j < m; ++j) {
    out[layout.wd_off() + j] = band[j];
    out[layout.wd_off() + m + j] = band[j];
    for (int ch = 0; ch < 3; ++ch) out[layout.c_off() + static_cast<std::size_t>(ch) * m + j] = band[j];
  }
  return out;
}

namespace {

// Average diagonal curvature of alpha*Lap^2 + 2*delta + rho*dp^2*div'div over
// the wavelet atoms of one band, estimated with a Rademacher probe.
double band_curvature(const WaveletBasis& basis, int band, double alpha, double delta,
                      double rho_dp2) {
  const GridShape& shape = basis.shape();
  const int m = shape.m();
  const auto& bmap = basis.band_map();
  std::vector<double> z(m, 0.0);
  const CounterRng rng(4242 + 131 * band);
  int count = 0;
  for (int j = 0; j < m; ++j)
    if (bmap[j] == band) {
      z[j] = rng.uniform(count) < 0.5 ? -1.0 : 1.0;
      ++count;
    }
  if (count == 0) return delta;
  std::vector<double> w(m), lap(m), gx(m), gy(m);
  iwt2(z.data(), basis, w.data());
  laplacian(w.data(), shape, lap.data());
  gradient_x(w.data(), shape, gx.data());
  gradient_y(w.data(), shape, gy.data());
  double nl = 0.0, nw = 0.0, ng = 0.0;
  for (int j = 0; j < m; ++j) {
    nl += lap[j] * lap[j];
    nw += w[j] * w[j];
    ng += 0.5 * (gx[j] * gx[j] + gy[j] * gy[j]);
  }
  return (alpha * nl + 2.0 * delta * nw + rho_dp2 * ng) / count;
}

double observed_fraction(const ObservationSet& obs, Time t, int k) {
  const std::uint8_t* mk = obs.mask_layer(t, k);
  double s = 0.0;
  for (int j = 0; j < obs.shape.m(); ++j) s += mk[j];
  return s / obs.shape.m();
}

// crude but balanced diagonal estimates per variable kind
struct DiagModel {
  std::vector<double> wd_band;  // per band, for one layer
  double w_lo = 1.0, w_hi = 1.0;
  double c = 1.0;
};

DiagModel layer_diag(const EnergyModel& model, int k, SubproblemMode mode) {
  const SolverConfig& cfg = *model.cfg;
  const double rho = cfg.rho;
  const bool con = model.constraint != ConstraintKind::None;
  const double dp = model.grid->increments[k];
  const double frac0 = observed_fraction(*model.obs, Time::T0, k);
  const double frac1 = observed_fraction(*model.obs, Time::T1, k);
  DiagModel dm;
  const int B = model.basis->num_bands();
  dm.wd_band.resize(B);
  const double data_floor = 0.25 * frac0;
  for (int b = 0; b < B; ++b)
    dm.wd_band[b] = data_floor + band_curvature(*model.basis, b, cfg.alpha_d[k], cfg.tikhonov,
                                                con ? rho * dp * dp : 0.0);
  const auto wind_diag = [&](int level) {
    const double* g = &cfg.gamma.gamma[static_cast<std::size_t>(level) * 3];
    double data = 0.0;
    for (int ch = 0; ch < 3; ++ch) data += 0.25 * cfg.dt * cfg.dt * g[ch] * g[ch];
    double v = frac0 * data;
    if (con) v += rho;
    if (mode != SubproblemMode::Joint) v += rho;  // consensus copy
    if (mode == SubproblemMode::Joint && con) v += rho;  // second constraint row
    return std::max(v, 1e-8);
  };
  dm.w_lo = wind_diag(k);
  dm.w_hi = wind_diag(k + 1);
  dm.c = frac0 + frac1 + rho;
  return dm;
}

}  // namespace

std::vector<double> split_precond_scales(const EnergyModel& model, const SplitLayout& layout,
                                         SubproblemMode mode) {
  const int m = layout.m;
  const auto& bmap = model.basis->band_map();
  const DiagModel dm = layer_diag(model, layout.k, mode);
  std::vector<double> s(layout.size(), 1.0);
  for (int j = 0; j < m; ++j) {
    const double sd = 1.0 / std::sqrt(dm.wd_band[bmap[j]]);
    s[layout.wd_off() + j] = sd;
    s[layout.wd_off() + m + j] = sd;
    const double sc = 1.0 / std::sqrt(dm.c);
    for (int ch = 0; ch < 3; ++ch) s[layout.c_off() + static_cast<std::size_t>(ch) * m + j] = sc;
  }
  if (layout.lo_free)
    std::fill_n(s.begin() + layout.w_lo_off(), m, 1.0 / std::sqrt(dm.w_lo));
  if (layout.hi_free)
    std::fill_n(s.begin() + layout.w_hi_off(), m, 1.0 / std::sqrt(dm.w_hi));
  return s;
}

std::vector<double> joint_precond_scales(const EnergyModel& model) {
  const int K = model.K();
  const int m = model.m();
  const auto& bmap = model.basis->band_map();
  std::vector<double> s(joint_size(model), 1.0);
  const std::size_t w_off = static_cast<std::size_t>(K) * 2 * m;
  const std::size_t c_off = joint_size(model) - static_cast<std::size_t>(K) * 3 * m;
  for (int k = 0; k < K; ++k) {
    const DiagModel dm = layer_diag(model, k, SubproblemMode::Joint);
    for (int j = 0; j < m; ++j) {
      const double sd = 1.0 / std::sqrt(dm.wd_band[bmap[j]]);
      s[(static_cast<std::size_t>(k) * 2 + 0) * m + j] = sd;
      s[(static_cast<std::size_t>(k) * 2 + 1) * m + j] = sd;
      const double sc = 1.0 / std::sqrt(dm.c);
      for (int ch = 0; ch < 3; ++ch)
        s[c_off + (static_cast<std::size_t>(k) * 3 + ch) * m + j] = sc;
    }
    if (!model.pin_omega && k > 0)
      std::fill_n(s.begin() + w_off + static_cast<std::size_t>(k - 1) * m, m,
                  1.0 / std::sqrt(dm.w_lo));
  }
  return s;
}

std::vector<std::uint8_t> joint_coord_bands(const EnergyModel& model) {
  const int K = model.K();
  const int m = model.m();
  const auto& band = model.basis->band_map();
  std::vector<std::uint8_t> out(joint_size(model), kAlwaysActive);
  for (int k = 0; k < K; ++k)
    for (int comp = 0; comp < 2; ++comp)
      for (int j = 0; j < m; ++j)
        out[(static_cast<std::size_t>(k) * 2 + comp) * m + j] = band[j];
  const std::size_t c_off = joint_size(model) - static_cast<std::size_t>(K) * 3 * m;
  for (int k = 0; k < K; ++k)
    for (int ch = 0; ch < 3; ++ch)
      for (int j = 0; j < m; ++j)
        out[c_off + (static_cast<std::size_t>(k) * 3 + ch) * m + j] = band[j];
  return out;
}

}  // namespace amv
