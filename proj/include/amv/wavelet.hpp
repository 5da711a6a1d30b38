#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amv/grid.hpp"

namespace amv {

struct BadDepth : Error {
  using Error::Error;
};
struct NonPowerOfTwo : Error {
  using Error::Error;
};
struct NegativeLambda : Error {
  using Error::Error;
};
struct NonPositiveRho : Error {
  using Error::Error;
};
struct BadStage : Error {
  using Error::Error;
};

// Orthonormal 2D wavelet transform, periodized Mallat decomposition with a
// 30-tap Coiflet filter.  Band 0 is the coarse approximation block; band b
// holds the details introduced when going from block b-1 to block b, so
// larger band ids mean finer scales.
class WaveletBasis {
 public:
  WaveletBasis(const GridShape& shape, int depth);
  explicit WaveletBasis(const GridShape& shape) : WaveletBasis(shape, default_depth(shape)) {}

  static int default_depth(const GridShape& shape);

  const GridShape& shape() const { return shape_; }
  int depth() const { return depth_; }
  int num_bands() const { return depth_ + 1; }
  const std::vector<std::uint8_t>& band_map() const { return band_; }
  const std::string& family() const { return family_; }

 private:
  GridShape shape_;
  int depth_;
  std::vector<std::uint8_t> band_;
  std::string family_ = "coiflet30";
};

// Analysis / synthesis of one m-pixel plane.  Buffers must not alias.
void fwt2(const double* image, const WaveletBasis& basis, double* coeffs);
void iwt2(const double* coeffs, const WaveletBasis& basis, double* image);

// The frozen 30-tap filter pair backing every basis instance.
constexpr int kFilterTaps = 30;
const double* coiflet30_lowpass();
const double* coiflet30_highpass();

double soft_threshold(double v, double lambda);

// Elementwise soft threshold of a K x 3 x m coefficient stack with per-layer
// level alpha_x[k] / rho.
void prox_step(const double* c_plus_u, int K, int m, const std::vector<double>& alpha_x,
               double rho, double* out);

// Ordered activation stages for the coarse-to-fine expansion; stage s frees
// the coarsest active_bands[s] bands.  Stages are nested and the final stage
// frees everything.
struct ScaleSchedule {
  std::vector<int> active_bands;

  int stages() const { return static_cast<int>(active_bands.size()); }
  void validate(int num_bands) const;
};

ScaleSchedule default_schedule(int num_bands, int stages = 4);

// Zero every coefficient in a band not active at the given stage.
void restrict_to_schedule(double* coeffs, const WaveletBasis& basis, const ScaleSchedule& schedule,
                          int stage);

}  // namespace amv
