#include "amv/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "amv/rng.hpp"

namespace amv {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::fabs(v));
  return s;
}

struct Pair {
  std::vector<double> s, y;
  double rho;  // 1 / y.s
};

// Cubic interpolation of a step inside [lo, hi] from endpoint values and
// slopes; falls back to bisection when the fit is degenerate.
double interp_step(double alo, double flo, double glo, double ahi, double fhi, double ghi) {
  const double d1 = glo + ghi - 3.0 * (flo - fhi) / (alo - ahi);
  const double disc = d1 * d1 - glo * ghi;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), ahi - alo);
    double t = ahi - (ahi - alo) * (ghi + d2 - d1) / (ghi - glo + 2.0 * d2);
    const double lo = std::min(alo, ahi), hi = std::max(alo, ahi);
    const double margin = 0.1 * (hi - lo);
    if (std::isfinite(t) && t > lo + margin && t < hi - margin) return t;
  }
  return 0.5 * (alo + ahi);
}

struct LineSearchResult {
  double alpha = 0.0;
  double f = 0.0;
  bool ok = false;
  int evals = 0;
};

// Strong Wolfe search (bracket + zoom).  phi(a) = f(x + a p).
LineSearchResult wolfe_search(const ObjectiveFn& obj, const std::vector<double>& x,
                              const std::vector<double>& p, double f0, double dphi0,
                              std::vector<double>& xtrial, std::vector<double>& gtrial,
                              const LbfgsOptions& opts) {
  LineSearchResult res;
  const double c1 = opts.wolfe_c1, c2 = opts.wolfe_c2;
  const std::size_t n = x.size();

  auto phi = [&](double a, double* dphi) {
    for (std::size_t i = 0; i < n; ++i) xtrial[i] = x[i] + a * p[i];
    const double f = obj(xtrial, gtrial);
    ++res.evals;
    *dphi = dot(gtrial, p);
    return f;
  };

  auto zoom = [&](double alo, double flo, double glo, double ahi, double fhi, double ghi) {
    for (int it = 0; it < opts.max_line_search; ++it) {
      const double a = interp_step(alo, flo, glo, ahi, fhi, ghi);
      double g;
      const double f = phi(a, &g);
      if (!std::isfinite(f)) {
        ahi = a;
        fhi = f;
        ghi = g;
        continue;
      }
      if (f > f0 + c1 * a * dphi0 || f >= flo) {
        ahi = a;
        fhi = f;
        ghi = g;
      } else {
        if (std::fabs(g) <= -c2 * dphi0) {
          res.alpha = a;
          res.f = f;
          res.ok = true;
          return;
        }
        if (g * (ahi - alo) >= 0.0) {
          ahi = alo;
          fhi = flo;
          ghi = glo;
        }
        alo = a;
        flo = f;
        glo = g;
      }
      if (std::fabs(ahi - alo) < 1e-16 * std::max(1.0, std::fabs(alo))) break;
    }
  };

  double aprev = 0.0, fprev = f0, gprev = dphi0;
  double a = 1.0;
  for (int it = 0; it < opts.max_line_search; ++it) {
    double g;
    const double f = phi(a, &g);
    if (!std::isfinite(f)) {  // step overshot into non-finite territory
      zoom(aprev, fprev, gprev, a, f, g);
      return res;
    }
    if (f > f0 + c1 * a * dphi0 || (it > 0 && f >= fprev)) {
      zoom(aprev, fprev, gprev, a, f, g);
      return res;
    }
    if (std::fabs(g) <= -c2 * dphi0) {
      res.alpha = a;
      res.f = f;
      res.ok = true;
      return res;
    }
    if (g >= 0.0) {
      zoom(a, f, g, aprev, fprev, gprev);
      return res;
    }
    aprev = a;
    fprev = f;
    gprev = g;
    a *= 2.0;
  }
  return res;
}

}  // namespace

MinimizeResult minimize(const ObjectiveFn& objective, std::vector<double> x0,
                        const LbfgsOptions& opts) {
  MinimizeResult out;
  const std::size_t n = x0.size();
  std::vector<double> g(n), xtrial(n), gtrial(n), p(n);
  double f = objective(x0, g);
  out.evaluations = 1;
  if (!std::isfinite(f)) throw NonFiniteObjective("objective non-finite at starting point");

  const double g0_norm = inf_norm(g);
  const double tol = std::max(opts.g_tol, opts.g_tol_rel * g0_norm);

  std::deque<Pair> pairs;
  std::vector<double> x = std::move(x0);
  double gamma = 1.0;

  for (int iter = 0;; ++iter) {
    out.iterations = iter;
    const double gn = inf_norm(g);
    out.grad_inf_norm = gn;
    if (gn <= tol) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (iter >= opts.max_iterations) {
      out.status = SolveStatus::MaxIterations;
      break;
    }

    // two-loop recursion
    p = g;
    std::vector<double> alpha(pairs.size());
    for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
      alpha[i] = pairs[i].rho * dot(pairs[i].s, p);
      for (std::size_t j = 0; j < n; ++j) p[j] -= alpha[i] * pairs[i].y[j];
    }
    for (std::size_t j = 0; j < n; ++j) p[j] *= gamma;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double beta = pairs[i].rho * dot(pairs[i].y, p);
      for (std::size_t j = 0; j < n; ++j) p[j] += (alpha[i] - beta) * pairs[i].s[j];
    }
    for (std::size_t j = 0; j < n; ++j) p[j] = -p[j];

    double dphi0 = dot(g, p);
    if (!(dphi0 < 0.0)) {  // not a descent direction, restart from steepest descent
      pairs.clear();
      gamma = 1.0;
      for (std::size_t j = 0; j < n; ++j) p[j] = -g[j];
      dphi0 = dot(g, p);
      if (!(dphi0 < 0.0)) {
        out.status = SolveStatus::Converged;  // gradient numerically zero
        break;
      }
    }

    const LineSearchResult ls = wolfe_search(objective, x, p, f, dphi0, xtrial, gtrial, opts);
    out.evaluations += ls.evals;
    if (!ls.ok) {
      out.status = SolveStatus::LineSearchFailure;
      break;
    }

    Pair pr;
    pr.s.resize(n);
    pr.y.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      pr.s[j] = ls.alpha * p[j];
      pr.y[j] = gtrial[j] - g[j];
    }
    x = xtrial;
    f = ls.f;
    g = gtrial;

    const double ys = dot(pr.y, pr.s);
    const double yn = std::sqrt(dot(pr.y, pr.y));
    const double sn = std::sqrt(dot(pr.s, pr.s));
    if (ys > 1e-10 * yn * sn) {  // reject indefinite curvature pairs
      pr.rho = 1.0 / ys;
      gamma = ys / (yn * yn);
      pairs.push_back(std::move(pr));
      if (static_cast<int>(pairs.size()) > opts.memory) pairs.pop_front();
    }
  }

  out.x = std::move(x);
  out.f = f;
  return out;
}

MinimizeResult multiscale_minimize(const ObjectiveFn& objective, std::vector<double> x0,
                                   const std::vector<std::uint8_t>& coord_band,
                                   const ScaleSchedule& schedule, const LbfgsOptions& opts) {
  if (coord_band.size() != x0.size()) throw ShapeMismatch("coord_band size mismatch");
  MinimizeResult res;
  std::vector<double> x = std::move(x0);
  for (int stage = 0; stage < schedule.stages(); ++stage) {
    const int active = schedule.active_bands[stage];
    ObjectiveFn masked = [&, active](const std::vector<double>& xx, std::vector<double>& gg) {
      const double f = objective(xx, gg);
      for (std::size_t i = 0; i < gg.size(); ++i)
        if (coord_band[i] != kAlwaysActive && coord_band[i] >= active) gg[i] = 0.0;
      return f;
    };
    res = minimize(masked, std::move(x), opts);
    x = std::move(res.x);
  }
  res.x = std::move(x);
  return res;
}

GradCheckReport gradient_check(const ObjectiveFn& objective, const std::vector<double>& point,
                               double step, int trials, std::uint64_t seed) {
  GradCheckReport rep;
  rep.trials = trials;
  const std::size_t n = point.size();
  std::vector<double> g(n), gtmp(n), xp(n), xm(n), dir(n);
  objective(point, g);
  const CounterRng rng(seed);
  for (int t = 0; t < trials; ++t) {
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dir[i] = rng.normal(static_cast<std::uint64_t>(t) * n + i);
      norm += dir[i] * dir[i];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) {
      dir[i] /= norm;
      xp[i] = point[i] + step * dir[i];
      xm[i] = point[i] - step * dir[i];
    }
    const double fp = objective(xp, gtmp);
    const double fm = objective(xm, gtmp);
    const double fd = (fp - fm) / (2.0 * step);
    const double an = dot(g, dir);
    const double err = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-12});
    rep.max_rel_error = std::max(rep.max_rel_error, err);
  }
  return rep;
}

}  // namespace amv
