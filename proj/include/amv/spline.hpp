#pragma once

#include <array>
#include <vector>

#include "amv/grid.hpp"

namespace amv {

// Cardinal cubic spline coefficients for one channel of one layer.
struct SplinePlane {
  std::vector<double> coeffs;
  GridShape shape;
};

// 4x4 tap footprint of the cubic B-spline around a (periodically wrapped)
// evaluation point, with value and derivative weights per axis.
struct SplineTaps {
  std::array<int, 4> ix, iy;
  std::array<double, 4> wx, wy;    // B-spline weights
  std::array<double, 4> dwx, dwy;  // d/dx, d/dy of the weights
};

void make_taps(const GridShape& shape, double px, double py, SplineTaps& taps);

// Convert samples to cardinal-spline coefficients.  The separable [1/6 4/6
// 1/6] kernel is inverted in the Fourier domain under periodic boundary, so
// interpolation is exact at every node.
SplinePlane prefilter(const double* plane, const GridShape& shape);
void prefilter_inplace(double* plane, const GridShape& shape);  // symmetric, equals its adjoint

double interp(const SplinePlane& spline, double px, double py);
void interp_grad(const SplinePlane& spline, double px, double py, double* value, double* gx,
                 double* gy);

// Warp of one tri-variate layer: channel ch of output pixel j is the spline
// value of x1k[ch] at kappa(j)+dk(j) minus (dt/2)(gk[ch] wk(j) + gk1[ch]
// wk1(j)).
void warp_layer(const double* x1k, const double* dk, const double* wk, const double* wk1,
                const double* gk, const double* gk1, double dt, const GridShape& shape,
                double* out);

// Action of the warp Jacobian on tangents (any of tx, td, tw, tw1 may be
// null, meaning a zero tangent).
void warp_jvp(const double* x1k, const double* dk, const double* gk, const double* gk1, double dt,
              const GridShape& shape, const double* tx, const double* td, const double* tw,
              const double* tw1, double* out);

}  // namespace amv
