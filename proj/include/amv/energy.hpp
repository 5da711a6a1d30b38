#pragma once

#include <vector>

#include "amv/diffops.hpp"
#include "amv/grid.hpp"
#include "amv/lbfgs.hpp"
#include "amv/spline.hpp"
#include "amv/wavelet.hpp"

namespace amv {

struct SolverConfig {
  std::vector<double> alpha_d;  // per-layer Laplacian regularizer weights, > 0
  std::vector<double> alpha_x;  // per-layer l1 weights on wavelet coefficients, > 0
  double rho = 1.0;
  double tikhonov = 1e-8;  // coercivity term delta * ||d||^2
  double dt = 1.0;         // displacements are in pixels per frame interval
  PhysicsConstants gamma;
  ScaleSchedule schedule;   // empty -> default for the grid
  int schedule_stages = 4;  // stage count used when the schedule is defaulted
  LbfgsOptions inner;
  bool standardize = true;       // rescale observations to unit channel variance
  bool init_from_obs = true;     // seed c from masked y1 instead of zero
  std::string wavelet_family = "coiflet30";

  void validate(int K) const;
  static SolverConfig defaults(int K);
};

// Consensus copies and scaled dual variables of the ADMM recursions.
// w_tilde / u_w exist in split mode only; all winds are interior levels.
struct DualState {
  std::vector<double> u_d;      // [K][m]
  std::vector<double> u_c;     // [K][3][m]
  std::vector<double> u_w;     // [K-1][m]
  std::vector<double> w_tilde;  // [K-1][m]
  std::vector<double> c_tilde;  // [K][3][m]

  DualState() = default;
  DualState(int K, int m, bool split);
};

enum class ConstraintKind { None, Soft, Hard };
enum class SubproblemMode { Joint, SplitEven, SplitOdd };

// Read-only bundle shared by every objective evaluation.
struct EnergyModel {
  const ObservationSet* obs = nullptr;
  const PressureGrid* grid = nullptr;
  const SolverConfig* cfg = nullptr;
  const WaveletBasis* basis = nullptr;
  ConstraintKind constraint = ConstraintKind::Hard;
  bool pin_omega = false;  // 2d variants hold every vertical wind at zero

  int K() const { return grid->K(); }
  int m() const { return basis->shape().m(); }
  const GridShape& shape() const { return basis->shape(); }
  void validate() const;
  bool wind_free(int level) const { return !pin_omega && level > 0 && level < K(); }
};

// Residual stack per Eq. defDeltax: index [t][k][channel][j], masked entries
// exactly zero.  x_t1 is synthesized from state.c; t0 goes through the warp.
std::vector<double> residual(const AMVState& state, const ObservationSet& obs,
                             const PhysicsConstants& gamma, const PressureGrid& grid, double dt);

double data_term(const AMVState& state, const ObservationSet& obs, const PhysicsConstants& gamma,
                 const PressureGrid& grid, double dt = 1.0);

// 1/2 sum_k alpha_d^k ||Lap d^k||^2 + delta ||d||^2.
double reg_d(const std::vector<double>& d, int K, const GridShape& shape,
             const std::vector<double>& alpha_d, double tikhonov);

// --- subproblem objectives -------------------------------------------------
//
// Optimization vectors hold wavelet coefficients for displacements and
// images; winds stay in the pixel domain.
//
// split layout (layer k): [wd_u | wd_v | (w_lo) | (w_hi) | c_0 | c_1 | c_2],
// each block m long, wind blocks present only when that level is free.
// joint layout: [wd (K*2*m) | w_interior ((K-1)*m, absent when pinned) |
// c (K*3*m)].

struct SplitLayout {
  int k = 0;
  int m = 0;
  bool lo_free = false, hi_free = false;

  SplitLayout() = default;
  SplitLayout(const EnergyModel& model, int layer);
  std::size_t size() const { return static_cast<std::size_t>(5 + lo_free + hi_free) * m; }
  std::size_t wd_off() const { return 0; }
  std::size_t w_lo_off() const { return static_cast<std::size_t>(2) * m; }
  std::size_t w_hi_off() const { return (static_cast<std::size_t>(2) + lo_free) * m; }
  std::size_t c_off() const { return (static_cast<std::size_t>(2) + lo_free + hi_free) * m; }
};

// Value and exact analytic gradient of the layer-pair objective:
// mode Joint     -> F(d^k, w^k, w^{k+1}, c^k)
// mode SplitEven -> G  = F + wind consensus on the free levels (unknown w)
// mode SplitOdd  -> G~ = F + wind consensus anchored at w_new (unknown w~)
// For SplitOdd the wind blocks of x are the w~ copies.  w_new is the full
// (K+1)-level field from the even half step (may be null unless SplitOdd).
double layer_objective(const EnergyModel& model, int k, SubproblemMode mode,
                       const DualState& duals, const double* w_new, const std::vector<double>& x,
                       std::vector<double>* grad);

// Objective of the first joint-ADMM step over all layers at once; equals the
// sum of layer_objective(..., Joint, ...) over k.
double joint_objective(const EnergyModel& model, const DualState& duals,
                       const std::vector<double>& x, std::vector<double>* grad);

std::size_t joint_size(const EnergyModel& model);

// Exact minimizer over the free wind unknowns with d and c held fixed: the
// subproblem is per-pixel quadratic in the winds (2x2 in split mode, a
// per-pixel tridiagonal system across levels in joint mode).  Used as an
// exact block-coordinate step after each quasi-Newton pass.
void exact_wind_update(const EnergyModel& model, int k, SubproblemMode mode,
                       const DualState& duals, const double* w_new, const double* d,
                       const double* c, double* w_lo, double* w_hi);
void exact_wind_update_joint(const EnergyModel& model, const DualState& duals,
                             const AMVState& state, double* w_interior);

// pack/unpack between AMVState and the optimizer vectors (d <-> fwt2(d))
std::vector<double> pack_split(const EnergyModel& model, const AMVState& state,
                               const DualState& duals, const SplitLayout& layout,
                               SubproblemMode mode);
void unpack_split(const EnergyModel& model, const std::vector<double>& x,
                  const SplitLayout& layout, SubproblemMode mode, AMVState* state,
                  DualState* duals);
std::vector<double> pack_joint(const EnergyModel& model, const AMVState& state);
void unpack_joint(const EnergyModel& model, const std::vector<double>& x, AMVState* state);

// Band ids per optimizer coordinate for the coarse-to-fine schedule.
std::vector<std::uint8_t> split_coord_bands(const EnergyModel& model, const SplitLayout& layout);
std::vector<std::uint8_t> joint_coord_bands(const EnergyModel& model);

// Per-coordinate curvature-balancing scales (1/sqrt of an estimated diagonal
// Hessian): the regularizer and constraint-penalty curvature on the
// displacement coefficients spans orders of magnitude across wavelet bands,
// which stalls a quasi-Newton method unless the coordinates are rescaled.
// The scaled problem is x = S z; these return the diagonal of S.
std::vector<double> split_precond_scales(const EnergyModel& model, const SplitLayout& layout,
                                         SubproblemMode mode);
std::vector<double> joint_precond_scales(const EnergyModel& model);

}  // namespace amv
