#include "amv/spline.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace amv {

namespace {

struct FftContext {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::vector<double> symbol;  // 1 / (m * Hx * Hy) on the r2c half-plane
  int rows = 0, cols = 0;
};

// Plan creation is not thread-safe in FFTW; executions through the new-array
// interface are.  Plans are cached per grid size and never destroyed.
FftContext& fft_context(const GridShape& shape) {
  static std::map<std::pair<int, int>, FftContext> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(shape.rows, shape.cols);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  FftContext& ctx = cache[key];
  ctx.rows = shape.rows;
  ctx.cols = shape.cols;
  const int hc = shape.cols / 2 + 1;
  std::vector<double> scratch_r(shape.m());
  std::vector<fftw_complex> scratch_c(static_cast<std::size_t>(shape.rows) * hc);
  ctx.fwd = fftw_plan_dft_r2c_2d(shape.rows, shape.cols, scratch_r.data(), scratch_c.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  ctx.bwd = fftw_plan_dft_c2r_2d(shape.rows, shape.cols, scratch_c.data(), scratch_r.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  ctx.symbol.resize(scratch_c.size());
  const double two_pi = 6.283185307179586476925286766559;
  for (int ky = 0; ky < shape.rows; ++ky) {
    const double hy = (2.0 + std::cos(two_pi * ky / shape.rows)) / 3.0;
    for (int kx = 0; kx < hc; ++kx) {
      const double hx = (2.0 + std::cos(two_pi * kx / shape.cols)) / 3.0;
      ctx.symbol[static_cast<std::size_t>(ky) * hc + kx] = 1.0 / (hy * hx * shape.m());
    }
  }
  return ctx;
}

inline double wrap(double v, int n) {
  v = std::fmod(v, static_cast<double>(n));
  return v < 0.0 ? v + n : v;
}

}  // namespace

void prefilter_inplace(double* plane, const GridShape& shape) {
  FftContext& ctx = fft_context(shape);
  const int hc = shape.cols / 2 + 1;
  std::vector<fftw_complex> spec(static_cast<std::size_t>(shape.rows) * hc);
  fftw_execute_dft_r2c(ctx.fwd, plane, spec.data());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    spec[i][0] *= ctx.symbol[i];
    spec[i][1] *= ctx.symbol[i];
  }
  fftw_execute_dft_c2r(ctx.bwd, spec.data(), plane);
}

SplinePlane prefilter(const double* plane, const GridShape& shape) {
  SplinePlane s;
  s.shape = shape;
  s.coeffs.assign(plane, plane + shape.m());
  prefilter_inplace(s.coeffs.data(), shape);
  return s;
}

void make_taps(const GridShape& shape, double px, double py, SplineTaps& taps) {
  const double x = wrap(px, shape.cols);
  const double y = wrap(py, shape.rows);
  const int ix = static_cast<int>(x);
  const int iy = static_cast<int>(y);
  const double tx = x - ix;
  const double ty = y - iy;

  for (int a = 0; a < 4; ++a) {
    int cx = ix - 1 + a;
    if (cx < 0) cx += shape.cols;
    if (cx >= shape.cols) cx -= shape.cols;
    taps.ix[a] = cx;
    int cy = iy - 1 + a;
    if (cy < 0) cy += shape.rows;
    if (cy >= shape.rows) cy -= shape.rows;
    taps.iy[a] = cy;
  }

  const auto weights = [](double t, std::array<double, 4>& w, std::array<double, 4>& dw) {
    const double s = 1.0 - t;
    w[0] = s * s * s / 6.0;
    w[1] = 2.0 / 3.0 - t * t + 0.5 * t * t * t;
    w[2] = 2.0 / 3.0 - s * s + 0.5 * s * s * s;
    w[3] = t * t * t / 6.0;
    dw[0] = -0.5 * s * s;
    dw[1] = -2.0 * t + 1.5 * t * t;
    dw[2] = 2.0 * s - 1.5 * s * s;
    dw[3] = 0.5 * t * t;
  };
  weights(tx, taps.wx, taps.dwx);
  weights(ty, taps.wy, taps.dwy);
}

double interp(const SplinePlane& spline, double px, double py) {
  SplineTaps t;
  make_taps(spline.shape, px, py, t);
  const double* c = spline.coeffs.data();
  const int cols = spline.shape.cols;
  double v = 0.0;
  for (int b = 0; b < 4; ++b) {
    const double* row = c + static_cast<std::size_t>(t.iy[b]) * cols;
    double rv = 0.0;
    for (int a = 0; a < 4; ++a) rv += row[t.ix[a]] * t.wx[a];
    v += rv * t.wy[b];
  }
  return v;
}

void interp_grad(const SplinePlane& spline, double px, double py, double* value, double* gx,
                 double* gy) {
  SplineTaps t;
  make_taps(spline.shape, px, py, t);
  const double* c = spline.coeffs.data();
  const int cols = spline.shape.cols;
  double v = 0.0, dx = 0.0, dy = 0.0;
  for (int b = 0; b < 4; ++b) {
    const double* row = c + static_cast<std::size_t>(t.iy[b]) * cols;
    double rv = 0.0, rd = 0.0;
    for (int a = 0; a < 4; ++a) {
      rv += row[t.ix[a]] * t.wx[a];
      rd += row[t.ix[a]] * t.dwx[a];
    }
    v += rv * t.wy[b];
    dx += rd * t.wy[b];
    dy += rv * t.dwy[b];
  }
  *value = v;
  *gx = dx;
  *gy = dy;
}

void warp_layer(const double* x1k, const double* dk, const double* wk, const double* wk1,
                const double* gk, const double* gk1, double dt, const GridShape& shape,
                double* out) {
  const int m = shape.m();
  SplinePlane planes[3];
  for (int ch = 0; ch < 3; ++ch)
    planes[ch] = prefilter(x1k + static_cast<std::size_t>(ch) * m, shape);
  const double* du = dk;
  const double* dv = dk + m;
#pragma omp parallel for
  for (int j = 0; j < m; ++j) {
    const double px = shape.x_of(j) + du[j];
    const double py = shape.y_of(j) + dv[j];
    SplineTaps t;
    make_taps(shape, px, py, t);
    const double vert_k = 0.5 * dt * wk[j];
    const double vert_k1 = 0.5 * dt * wk1[j];
    for (int ch = 0; ch < 3; ++ch) {
      const double* c = planes[ch].coeffs.data();
      double v = 0.0;
      for (int b = 0; b < 4; ++b) {
        const double* row = c + static_cast<std::size_t>(t.iy[b]) * shape.cols;
        double rv = 0.0;
        for (int a = 0; a < 4; ++a) rv += row[t.ix[a]] * t.wx[a];
        v += rv * t.wy[b];
      }
      out[static_cast<std::size_t>(ch) * m + j] = v - gk[ch] * vert_k - gk1[ch] * vert_k1;
    }
  }
}

void warp_jvp(const double* x1k, const double* dk, const double* gk, const double* gk1, double dt,
              const GridShape& shape, const double* tx, const double* td, const double* tw,
              const double* tw1, double* out) {
  const int m = shape.m();
  SplinePlane base[3], tangent[3];
  for (int ch = 0; ch < 3; ++ch) {
    if (td) base[ch] = prefilter(x1k + static_cast<std::size_t>(ch) * m, shape);
    if (tx) tangent[ch] = prefilter(tx + static_cast<std::size_t>(ch) * m, shape);
  }
  const double* du = dk;
  const double* dv = dk + m;
#pragma omp parallel for
  for (int j = 0; j < m; ++j) {
    const double px = shape.x_of(j) + du[j];
    const double py = shape.y_of(j) + dv[j];
    for (int ch = 0; ch < 3; ++ch) {
      double acc = 0.0;
      if (tx) acc += interp(tangent[ch], px, py);
      if (td) {
        double v, gx, gy;
        interp_grad(base[ch], px, py, &v, &gx, &gy);
        acc += gx * td[j] + gy * td[m + j];
      }
      if (tw) acc -= 0.5 * dt * gk[ch] * tw[j];
      if (tw1) acc -= 0.5 * dt * gk1[ch] * tw1[j];
      out[static_cast<std::size_t>(ch) * m + j] = acc;
    }
  }
}

}  // namespace amv
