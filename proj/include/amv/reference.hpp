#pragma once

#include <vector>

#include "amv/grid.hpp"
#include "amv/wavelet.hpp"

// Plain serial implementations written independently of the OpenMP kernels.
// They are the comparison baseline for the parallel code paths (tests assert
// agreement, the bench target reports speedups) and double as direct oracles
// for the stencil and interpolation math.
namespace amv::ref {

inline int pmod(int a, int n) { return ((a % n) + n) % n; }

void divergence(const double* du, const double* dv, const GridShape& shape, double* out);
void laplacian(const double* u, const GridShape& shape, double* out);

// Direct 4x4-neighborhood evaluation of the cubic B-spline surface from a
// coefficient plane, using the closed-form kernel.
double bspline3(double t);
double bspline_eval(const double* coeffs, const GridShape& shape, double px, double py);

void warp_layer(const double* x1k, const double* dk, const double* wk, const double* wk1,
                const double* gk, const double* gk1, double dt, const GridShape& shape,
                double* out);

// Dense per-pixel pseudo-inverse solve of L w = D d via normal equations
// assembled as explicit matrices (Gaussian elimination).
std::vector<double> solve_vertical(const double* d, int K, const GridShape& shape,
                                   const PressureGrid& grid);

void prox_step(const double* c_plus_u, int K, int m, const std::vector<double>& alpha_x,
               double rho, double* out);

void fwt2(const double* image, const WaveletBasis& basis, double* coeffs);
void iwt2(const double* coeffs, const WaveletBasis& basis, double* image);

}  // namespace amv::ref
