#include "amv/reference.hpp"

#include <cmath>
#include <cstring>

#include "amv/spline.hpp"

namespace amv::ref {

void divergence(const double* du, const double* dv, const GridShape& shape, double* out) {
  for (int y = 0; y < shape.rows; ++y) {
    for (int x = 0; x < shape.cols; ++x) {
      const double dudx = 0.5 * (du[shape.index(pmod(x + 1, shape.cols), y)] -
                                 du[shape.index(pmod(x - 1, shape.cols), y)]);
      const double dvdy = 0.5 * (dv[shape.index(x, pmod(y + 1, shape.rows))] -
                                 dv[shape.index(x, pmod(y - 1, shape.rows))]);
      out[shape.index(x, y)] = dudx + dvdy;
    }
  }
}

void laplacian(const double* u, const GridShape& shape, double* out) {
  for (int y = 0; y < shape.rows; ++y) {
    for (int x = 0; x < shape.cols; ++x) {
      out[shape.index(x, y)] = u[shape.index(pmod(x + 1, shape.cols), y)] +
                               u[shape.index(pmod(x - 1, shape.cols), y)] +
                               u[shape.index(x, pmod(y + 1, shape.rows))] +
                               u[shape.index(x, pmod(y - 1, shape.rows))] -
                               4.0 * u[shape.index(x, y)];
    }
  }
}

double bspline3(double t) {
  const double a = std::fabs(t);
  if (a < 1.0) return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
  if (a < 2.0) {
    const double b = 2.0 - a;
    return b * b * b / 6.0;
  }
  return 0.0;
}

double bspline_eval(const double* coeffs, const GridShape& shape, double px, double py) {
  px = std::fmod(px, static_cast<double>(shape.cols));
  if (px < 0) px += shape.cols;
  py = std::fmod(py, static_cast<double>(shape.rows));
  if (py < 0) py += shape.rows;
  const int ix = static_cast<int>(std::floor(px));
  const int iy = static_cast<int>(std::floor(py));
  double v = 0.0;
  for (int b = -1; b <= 2; ++b) {
    for (int a = -1; a <= 2; ++a) {
      const int cx = pmod(ix + a, shape.cols);
      const int cy = pmod(iy + b, shape.rows);
      v += coeffs[shape.index(cx, cy)] * bspline3(px - (ix + a)) * bspline3(py - (iy + b));
    }
  }
  return v;
}

void warp_layer(const double* x1k, const double* dk, const double* wk, const double* wk1,
                const double* gk, const double* gk1, double dt, const GridShape& shape,
                double* out) {
  const int m = shape.m();
  for (int ch = 0; ch < 3; ++ch) {
    const SplinePlane plane = prefilter(x1k + static_cast<std::size_t>(ch) * m, shape);
    for (int j = 0; j < m; ++j) {
      const double px = shape.x_of(j) + dk[j];
      const double py = shape.y_of(j) + dk[m + j];
      out[static_cast<std::size_t>(ch) * m + j] =
          bspline_eval(plane.coeffs.data(), shape, px, py) -
          0.5 * dt * (gk[ch] * wk[j] + gk1[ch] * wk1[j]);
    }
  }
}

std::vector<double> solve_vertical(const double* d, int K, const GridShape& shape,
                                   const PressureGrid& grid) {
  const int m = shape.m();
  const int n = K - 1;
  std::vector<double> w(static_cast<std::size_t>(n) * m, 0.0);

  // per-pixel rhs r_k = dp^k div(d^k)
  std::vector<double> r(static_cast<std::size_t>(K) * m);
  std::vector<double> div(m);
  for (int k = 0; k < K; ++k) {
    divergence(d + (static_cast<std::size_t>(k) * 2 + 0) * m,
               d + (static_cast<std::size_t>(k) * 2 + 1) * m, shape, div.data());
    for (int j = 0; j < m; ++j) r[static_cast<std::size_t>(k) * m + j] = grid.increments[k] * div[j];
  }

  // explicit K x (K-1) matrix L, normal equations, Gaussian elimination
  std::vector<double> L(static_cast<std::size_t>(K) * n, 0.0);
  for (int k = 0; k < K; ++k) {
    if (k > 0) L[static_cast<std::size_t>(k) * n + (k - 1)] = 1.0;
    if (k < n) L[static_cast<std::size_t>(k) * n + k] = -1.0;
  }
  std::vector<double> A(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j2 = 0; j2 < n; ++j2) {
      double s = 0.0;
      for (int k = 0; k < K; ++k)
        s += L[static_cast<std::size_t>(k) * n + i] * L[static_cast<std::size_t>(k) * n + j2];
      A[static_cast<std::size_t>(i) * n + j2] = s;
    }

  std::vector<double> M(A.size()), b(n);
  for (int j = 0; j < m; ++j) {
    M = A;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < K; ++k)
        s += L[static_cast<std::size_t>(k) * n + i] * r[static_cast<std::size_t>(k) * m + j];
      b[i] = s;
    }
    for (int col = 0; col < n; ++col) {  // no pivoting needed, SPD tridiagonal
      const double piv = M[static_cast<std::size_t>(col) * n + col];
      for (int row = col + 1; row < n; ++row) {
        const double f = M[static_cast<std::size_t>(row) * n + col] / piv;
        for (int c2 = col; c2 < n; ++c2)
          M[static_cast<std::size_t>(row) * n + c2] -= f * M[static_cast<std::size_t>(col) * n + c2];
        b[row] -= f * b[col];
      }
    }
    for (int row = n - 1; row >= 0; --row) {
      double s = b[row];
      for (int c2 = row + 1; c2 < n; ++c2)
        s -= M[static_cast<std::size_t>(row) * n + c2] * w[static_cast<std::size_t>(c2) * m + j];
      w[static_cast<std::size_t>(row) * m + j] = s / M[static_cast<std::size_t>(row) * n + row];
    }
  }
  return w;
}

void prox_step(const double* c_plus_u, int K, int m, const std::vector<double>& alpha_x,
               double rho, double* out) {
  for (int k = 0; k < K; ++k) {
    const double lam = alpha_x[k] / rho;
    for (int i = 0; i < 3 * m; ++i) {
      const std::size_t idx = static_cast<std::size_t>(k) * 3 * m + i;
      out[idx] = soft_threshold(c_plus_u[idx], lam);
    }
  }
}

namespace {

void filters(std::vector<double>& h, std::vector<double>& g) {
  h.assign(coiflet30_lowpass(), coiflet30_lowpass() + kFilterTaps);
  g.assign(coiflet30_highpass(), coiflet30_highpass() + kFilterTaps);
}

}  // namespace

void fwt2(const double* image, const WaveletBasis& basis, double* coeffs) {
  std::vector<double> h, g;
  filters(h, g);
  const GridShape& s = basis.shape();
  std::vector<double> cur(image, image + s.m());
  for (int level = 0; level < basis.depth(); ++level) {
    const int br = s.rows >> level;
    const int bc = s.cols >> level;
    std::vector<double> next = cur;
    // rows
    for (int y = 0; y < br; ++y) {
      for (int i = 0; i < bc / 2; ++i) {
        double lo = 0.0, hi = 0.0;
        for (int k = 0; k < 30; ++k) {
          const double v = cur[static_cast<std::size_t>(y) * s.cols + pmod(2 * i + k, bc)];
          lo += h[k] * v;
          hi += g[k] * v;
        }
        next[static_cast<std::size_t>(y) * s.cols + i] = lo;
        next[static_cast<std::size_t>(y) * s.cols + bc / 2 + i] = hi;
      }
    }
    cur = next;
    // columns
    for (int x = 0; x < bc; ++x) {
      for (int i = 0; i < br / 2; ++i) {
        double lo = 0.0, hi = 0.0;
        for (int k = 0; k < 30; ++k) {
          const double v = cur[static_cast<std::size_t>(pmod(2 * i + k, br)) * s.cols + x];
          lo += h[k] * v;
          hi += g[k] * v;
        }
        next[static_cast<std::size_t>(i) * s.cols + x] = lo;
        next[static_cast<std::size_t>(br / 2 + i) * s.cols + x] = hi;
      }
    }
    cur = next;
  }
  std::memcpy(coeffs, cur.data(), sizeof(double) * s.m());
}

void iwt2(const double* coeffs, const WaveletBasis& basis, double* image) {
  std::vector<double> h, g;
  filters(h, g);
  const GridShape& s = basis.shape();
  std::vector<double> cur(coeffs, coeffs + s.m());
  for (int level = basis.depth() - 1; level >= 0; --level) {
    const int br = s.rows >> level;
    const int bc = s.cols >> level;
    std::vector<double> next = cur;
    // columns
    for (int x = 0; x < bc; ++x) {
      std::vector<double> col(br, 0.0);
      for (int i = 0; i < br / 2; ++i) {
        const double lo = cur[static_cast<std::size_t>(i) * s.cols + x];
        const double hi = cur[static_cast<std::size_t>(br / 2 + i) * s.cols + x];
        for (int k = 0; k < 30; ++k) col[pmod(2 * i + k, br)] += h[k] * lo + g[k] * hi;
      }
      for (int y = 0; y < br; ++y) next[static_cast<std::size_t>(y) * s.cols + x] = col[y];
    }
    cur = next;
    // rows
    for (int y = 0; y < br; ++y) {
      std::vector<double> row(bc, 0.0);
      for (int i = 0; i < bc / 2; ++i) {
        const double lo = cur[static_cast<std::size_t>(y) * s.cols + i];
        const double hi = cur[static_cast<std::size_t>(y) * s.cols + bc / 2 + i];
        for (int k = 0; k < 30; ++k) row[pmod(2 * i + k, bc)] += h[k] * lo + g[k] * hi;
      }
      for (int x = 0; x < bc; ++x) next[static_cast<std::size_t>(y) * s.cols + x] = row[x];
    }
    cur = next;
  }
  std::memcpy(image, cur.data(), sizeof(double) * s.m());
}

}  // namespace amv::ref
