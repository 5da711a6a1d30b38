#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amv/grid.hpp"

namespace amv {

struct CoverageGap : Error {
  using Error::Error;
};
struct SingularFit : Error {
  using Error::Error;
};

struct SyntheticSpec {
  int rows = 64, cols = 64;
  // scaled pressure unit (1 = 100 hPa) keeps dp ~ O(1) against pixel units
  std::vector<double> levels = {10.0, 8.5, 7.0, 5.5, 4.0};
  double spectral_slope = 1.7;  // image bands: amplitude decay 2^(-slope*band)
  double flow_slope = 2.8;      // stream/potential bands (velocity is one derivative rougher)
  double amplitude = 2.0;       // displacement std in pixels
  double vertical_corr = 0.8;   // AR(1) coupling of the flow fields across layers
  double divergent_fraction = 0.35;  // potential-part amplitude before wind rescale
  int chi_bands = 3;                 // potential part uses only this many coarse bands
  bool balanced = true;              // vertically paired divergences, exact feasibility
  double omega_std = 0.4;            // target std of interior vertical winds (hPa/frame)
  std::string mask_style = "full";   // full | swath | random
  double swath_width = 20.0, swath_period = 36.0;
  double random_coverage = 0.55;
  double sigma_obs = 0.0;
  std::uint64_t seed = 1;
  std::vector<double> gamma;  // optional (K+1)*3 override; empty -> random signs in [0.3, 1]

  void validate() const;
};

struct SyntheticDataset {
  PressureGrid grid;
  GridShape shape;
  AMVState truth;
  ImageStack x_t0, x_t1;
  PhysicsConstants gamma;
  ObservationSet obs;
};

// Ground truth satisfying the full 3D AMV model: d with a power-law wavelet
// spectrum (stream + potential parts, potential parts vertically paired when
// balanced), w = solve_vertical(d), x_t1 smooth positive, x_t0 the exact warp.
void generate_truth(const SyntheticSpec& spec, PressureGrid* grid, AMVState* truth,
                    ImageStack* x_t0, ImageStack* x_t1, PhysicsConstants* gamma);

// Truth plus masks and noisy observations.
SyntheticDataset generate_dataset(const SyntheticSpec& spec);

std::vector<std::uint8_t> make_masks(const SyntheticSpec& spec, int K, const GridShape& shape,
                                     Time t);

// Per-layer average of a piecewise-constant vertical profile weighted by
// pressure overlap, divided by dp^k.
std::vector<double> pressure_average(const std::vector<double>& bands,
                                     const std::vector<double>& band_pressures, int m,
                                     const PressureGrid& grid);

// Least-squares fit of gamma^k per channel from the warping-constraint
// residuals of image pairs with known AMVs.  Boundaries whose winds carry no
// energy (sum w^2 < 1e-12) are unidentifiable and pinned to zero; when every
// boundary is pinned the fit is singular and *singular is set.
PhysicsConstants calibrate_gamma(const ImageStack& x_t0, const ImageStack& x_t1,
                                 const AMVState& truth, const PressureGrid& grid,
                                 const std::uint8_t* mask0, const std::uint8_t* mask1, double dt,
                                 bool* singular);

}  // namespace amv
