#pragma once

#include <vector>

#include "amv/grid.hpp"

namespace amv {

// Centered second-order first differences on the periodic grid.
void gradient_x(const double* u, const GridShape& shape, double* out);
void gradient_y(const double* u, const GridShape& shape, double* out);

// div(d) = Dx d_u + Dy d_v; adjoint is (-Dx r, -Dy r).
void divergence(const double* du, const double* dv, const GridShape& shape, double* out);
void divergence_adjoint(const double* r, const GridShape& shape, double* out_du, double* out_dv);

// 5-point periodic Laplacian; self-adjoint.
void laplacian(const double* u, const GridShape& shape, double* out);

// Block k of D d is dp^k * div(d^k).  d is [K][2][m], out is [K][m].
void apply_D(const double* d, int K, const GridShape& shape, const PressureGrid& grid,
             double* out);
void apply_D_adjoint(const double* r, int K, const GridShape& shape, const PressureGrid& grid,
                     double* out_d);

// Block k of L w is w^k - w^{k+1} with the zero boundary levels absorbed:
// block 0 = -w^1 and block K-1 = w^{K-1}.  w_interior is [K-1][m].
void apply_L(const double* w_interior, int K, const GridShape& shape, double* out);
void apply_L_adjoint(const double* r, int K, const GridShape& shape, double* out_w);

// D d - L w per the linear hydrostatic constraint; returns [K][m].
std::vector<double> hydrostatic_residual(const AMVState& state, const PressureGrid& grid);

// Per-pixel least-squares solution of L w = D d in the K-1 interior levels
// (normal equations are tridiag(-1,2,-1); direct Thomas solve).  When the
// vertically integrated mass flux vanishes at a pixel the residual there is
// exactly zero.
std::vector<double> solve_vertical(const double* d, int K, const GridShape& shape,
                                   const PressureGrid& grid);
inline std::vector<double> solve_vertical(const AMVState& state, const PressureGrid& grid) {
  return solve_vertical(state.d.data(), state.K, state.shape, grid);
}

}  // namespace amv
