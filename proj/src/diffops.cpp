#include "amv/diffops.hpp"

namespace amv {

void gradient_x(const double* u, const GridShape& shape, double* out) {
  const int rows = shape.rows, cols = shape.cols;
#pragma omp parallel for
  for (int y = 0; y < rows; ++y) {
    const double* row = u + static_cast<std::size_t>(y) * cols;
    double* o = out + static_cast<std::size_t>(y) * cols;
    for (int x = 0; x < cols; ++x) {
      const int xp = (x + 1 == cols) ? 0 : x + 1;
      const int xm = (x == 0) ? cols - 1 : x - 1;
      o[x] = 0.5 * (row[xp] - row[xm]);
    }
  }
}

void gradient_y(const double* u, const GridShape& shape, double* out) {
  const int rows = shape.rows, cols = shape.cols;
#pragma omp parallel for
  for (int y = 0; y < rows; ++y) {
    const int yp = (y + 1 == rows) ? 0 : y + 1;
    const int ym = (y == 0) ? rows - 1 : y - 1;
    const double* rp = u + static_cast<std::size_t>(yp) * cols;
    const double* rm = u + static_cast<std::size_t>(ym) * cols;
    double* o = out + static_cast<std::size_t>(y) * cols;
    for (int x = 0; x < cols; ++x) o[x] = 0.5 * (rp[x] - rm[x]);
  }
}

void divergence(const double* du, const double* dv, const GridShape& shape, double* out) {
  const int rows = shape.rows, cols = shape.cols;
#pragma omp parallel for
  for (int y = 0; y < rows; ++y) {
    const int yp = (y + 1 == rows) ? 0 : y + 1;
    const int ym = (y == 0) ? rows - 1 : y - 1;
    const double* u = du + static_cast<std::size_t>(y) * cols;
    const double* vp = dv + static_cast<std::size_t>(yp) * cols;
    const double* vm = dv + static_cast<std::size_t>(ym) * cols;
    double* o = out + static_cast<std::size_t>(y) * cols;
    for (int x = 0; x < cols; ++x) {
      const int xp = (x + 1 == cols) ? 0 : x + 1;
      const int xm = (x == 0) ? cols - 1 : x - 1;
      o[x] = 0.5 * (u[xp] - u[xm]) + 0.5 * (vp[x] - vm[x]);
    }
  }
}

void divergence_adjoint(const double* r, const GridShape& shape, double* out_du, double* out_dv) {
  const int rows = shape.rows, cols = shape.cols;
#pragma omp parallel for
  for (int y = 0; y < rows; ++y) {
    const int yp = (y + 1 == rows) ? 0 : y + 1;
    const int ym = (y == 0) ? rows - 1 : y - 1;
    const double* rr = r + static_cast<std::size_t>(y) * cols;
    const double* rp = r + static_cast<std::size_t>(yp) * cols;
    const double* rm = r + static_cast<std::size_t>(ym) * cols;
    double* ou = out_du + static_cast<std::size_t>(y) * cols;
    double* ov = out_dv + static_cast<std::size_t>(y) * cols;
    for (int x = 0; x < cols; ++x) {
      const int xp = (x + 1 == cols) ? 0 : x + 1;
      const int xm = (x == 0) ? cols - 1 : x - 1;
      ou[x] = -0.5 * (rr[xp] - rr[xm]);
      ov[x] = -0.5 * (rp[x] - rm[x]);
    }
  }
}

void laplacian(const double* u, const GridShape& shape, double* out) {
  const int rows = shape.rows, cols = shape.cols;
#pragma omp parallel for
  for (int y = 0; y < rows; ++y) {
    const int yp = (y + 1 == rows) ? 0 : y + 1;
    const int ym = (y == 0) ? rows - 1 : y - 1;
    const double* rr = u + static_cast<std::size_t>(y) * cols;
    const double* rp = u + static_cast<std::size_t>(yp) * cols;
    const double* rm = u + static_cast<std::size_t>(ym) * cols;
    double* o = out + static_cast<std::size_t>(y) * cols;
    for (int x = 0; x < cols; ++x) {
      const int xp = (x + 1 == cols) ? 0 : x + 1;
      const int xm = (x == 0) ? cols - 1 : x - 1;
      o[x] = rr[xp] + rr[xm] + rp[x] + rm[x] - 4.0 * rr[x];
    }
  }
}

void apply_D(const double* d, int K, const GridShape& shape, const PressureGrid& grid,
             double* out) {
  if (grid.K() != K) throw ShapeMismatch("pressure grid has wrong layer count");
  const int m = shape.m();
  for (int k = 0; k < K; ++k) {
    const double* du = d + (static_cast<std::size_t>(k) * 2 + 0) * m;
    const double* dv = d + (static_cast<std::size_t>(k) * 2 + 1) * m;
    double* o = out + static_cast<std::size_t>(k) * m;
    divergence(du, dv, shape, o);
    const double dp = grid.increments[k];
    for (int j = 0; j < m; ++j) o[j] *= dp;
  }
}

void apply_D_adjoint(const double* r, int K, const GridShape& shape, const PressureGrid& grid,
                     double* out_d) {
  const int m = shape.m();
  std::vector<double> scaled(m);
  for (int k = 0; k < K; ++k) {
    const double dp = grid.increments[k];
    const double* rk = r + static_cast<std::size_t>(k) * m;
    for (int j = 0; j < m; ++j) scaled[j] = dp * rk[j];
    divergence_adjoint(scaled.data(), shape, out_d + (static_cast<std::size_t>(k) * 2 + 0) * m,
                       out_d + (static_cast<std::size_t>(k) * 2 + 1) * m);
  }
}

void apply_L(const double* w_interior, int K, const GridShape& shape, double* out) {
  const int m = shape.m();
  for (int k = 0; k < K; ++k) {
    const double* lo = (k == 0) ? nullptr : w_interior + static_cast<std::size_t>(k - 1) * m;
    const double* hi = (k == K - 1) ? nullptr : w_interior + static_cast<std::size_t>(k) * m;
    double* o = out + static_cast<std::size_t>(k) * m;
    for (int j = 0; j < m; ++j) o[j] = (lo ? lo[j] : 0.0) - (hi ? hi[j] : 0.0);
  }
}

void apply_L_adjoint(const double* r, int K, const GridShape& shape, double* out_w) {
  const int m = shape.m();
  for (int k = 1; k < K; ++k) {
    const double* rk = r + static_cast<std::size_t>(k) * m;
    const double* rkm = r + static_cast<std::size_t>(k - 1) * m;
    double* o = out_w + static_cast<std::size_t>(k - 1) * m;
    for (int j = 0; j < m; ++j) o[j] = rk[j] - rkm[j];
  }
}

std::vector<double> hydrostatic_residual(const AMVState& state, const PressureGrid& grid) {
  const int K = state.K;
  const int m = state.shape.m();
  std::vector<double> res(static_cast<std::size_t>(K) * m);
  apply_D(state.d.data(), K, state.shape, grid, res.data());
  std::vector<double> lw(static_cast<std::size_t>(K) * m);
  apply_L(state.w_level(1), K, state.shape, lw.data());
  for (std::size_t i = 0; i < res.size(); ++i) res[i] -= lw[i];
  return res;
}

std::vector<double> solve_vertical(const double* d, int K, const GridShape& shape,
                                   const PressureGrid& grid) {
  const int m = shape.m();
  const int n = K - 1;
  std::vector<double> dd(static_cast<std::size_t>(K) * m);
  apply_D(d, K, shape, grid, dd.data());

  // rhs = L^T (D d), one plane per interior level
  std::vector<double> rhs(static_cast<std::size_t>(n) * m);
  apply_L_adjoint(dd.data(), K, shape, rhs.data());

  // L^T L = tridiag(-1, 2, -1): the Thomas elimination coefficients are the
  // same scalars at every pixel, so the sweeps vectorize over the plane.
  std::vector<double> cp(n);
  cp[0] = -0.5;
  for (int i = 1; i < n; ++i) cp[i] = -1.0 / (2.0 + cp[i - 1]);

  std::vector<double> w(static_cast<std::size_t>(n) * m);
  double* wp = w.data();
#pragma omp parallel for
  for (int j = 0; j < m; ++j) wp[j] = rhs[j] * 0.5;
  for (int i = 1; i < n; ++i) {
    const double inv = 1.0 / (2.0 + cp[i - 1]);
    const double* prev = wp + static_cast<std::size_t>(i - 1) * m;
    const double* r = rhs.data() + static_cast<std::size_t>(i) * m;
    double* cur = wp + static_cast<std::size_t>(i) * m;
#pragma omp parallel for
    for (int j = 0; j < m; ++j) cur[j] = (r[j] + prev[j]) * inv;
  }
  for (int i = n - 2; i >= 0; --i) {
    const double ci = cp[i];
    const double* nxt = wp + static_cast<std::size_t>(i + 1) * m;
    double* cur = wp + static_cast<std::size_t>(i) * m;
#pragma omp parallel for
    for (int j = 0; j < m; ++j) cur[j] -= ci * nxt[j];
  }
  return w;
}

}  // namespace amv
