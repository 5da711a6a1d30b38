#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace amv {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonMonotoneLevels : Error {
  using Error::Error;
};
struct InvalidSpec : Error {
  using Error::Error;
};

inline constexpr double kMaskedSentinel = std::numeric_limits<double>::quiet_NaN();

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Pixel grid: linear index j = y*cols + x, position kappa(j) = (x, y).
struct GridShape {
  int rows = 0;
  int cols = 0;

  GridShape() = default;
  GridShape(int r, int c) : rows(r), cols(c) {
    if (!is_power_of_two(rows) || !is_power_of_two(cols))
      throw InvalidSpec("grid dimensions must be powers of two");
  }

  int m() const { return rows * cols; }
  int x_of(int j) const { return j % cols; }
  int y_of(int j) const { return j / cols; }
  int index(int x, int y) const { return y * cols + x; }
  bool operator==(const GridShape& o) const { return rows == o.rows && cols == o.cols; }
};

// Decreasing pressure levels p^0..p^K and the slab thicknesses dp^k.
struct PressureGrid {
  std::vector<double> levels;      // K+1 entries, strictly decreasing
  std::vector<double> increments;  // K entries, p^k - p^{k+1} > 0

  int K() const { return static_cast<int>(increments.size()); }
};

PressureGrid build_pressure_grid(const std::vector<double>& levels);

enum class Time : std::uint8_t { T0 = 0, T1 = 1 };

// K layers x 3 channels (T, q, o) x m pixels of pressure-averaged fields.
struct ImageStack {
  std::vector<double> values;  // [k][channel][j]
  GridShape shape;
  PressureGrid grid;
  Time stamp = Time::T0;

  ImageStack() = default;
  ImageStack(const PressureGrid& g, const GridShape& s, Time t)
      : values(static_cast<std::size_t>(g.K()) * 3 * s.m(), 0.0), shape(s), grid(g), stamp(t) {}

  int K() const { return grid.K(); }
  double* layer(int k, int channel) {
    return values.data() + (static_cast<std::size_t>(k) * 3 + channel) * shape.m();
  }
  const double* layer(int k, int channel) const {
    return values.data() + (static_cast<std::size_t>(k) * 3 + channel) * shape.m();
  }
  double& at(int k, int channel, int j) { return layer(k, channel)[j]; }
  double at(int k, int channel, int j) const { return layer(k, channel)[j]; }
};

// Horizontal displacements d (K x 2 x m, pixels/frame), vertical winds w
// ((K+1) x m, hPa/frame, boundary rows pinned to zero) and wavelet
// coefficients c (K x 3 x m) representing x_t1.
struct AMVState {
  std::vector<double> d;  // [k][component][j], component 0 = x, 1 = y
  std::vector<double> w;  // [k][j], k = 0..K (boundaries included, zero)
  std::vector<double> c;  // [k][channel][j]
  int K = 0;
  GridShape shape;

  AMVState() = default;
  AMVState(int layers, const GridShape& s)
      : d(static_cast<std::size_t>(layers) * 2 * s.m(), 0.0),
        w(static_cast<std::size_t>(layers + 1) * s.m(), 0.0),
        c(static_cast<std::size_t>(layers) * 3 * s.m(), 0.0),
        K(layers),
        shape(s) {}

  double* d_layer(int k, int comp) {
    return d.data() + (static_cast<std::size_t>(k) * 2 + comp) * shape.m();
  }
  const double* d_layer(int k, int comp) const {
    return d.data() + (static_cast<std::size_t>(k) * 2 + comp) * shape.m();
  }
  double* w_level(int k) { return w.data() + static_cast<std::size_t>(k) * shape.m(); }
  const double* w_level(int k) const { return w.data() + static_cast<std::size_t>(k) * shape.m(); }
  double* c_layer(int k, int channel) {
    return c.data() + (static_cast<std::size_t>(k) * 3 + channel) * shape.m();
  }
  const double* c_layer(int k, int channel) const {
    return c.data() + (static_cast<std::size_t>(k) * 3 + channel) * shape.m();
  }

  void zero_boundary_winds() {
    const int m = shape.m();
    for (int j = 0; j < m; ++j) {
      w_level(0)[j] = 0.0;
      w_level(K)[j] = 0.0;
    }
  }
};

// Per-(time, layer) masked noisy tri-variate observations. Masks are one bit
// per pixel shared across the three channels; masked-out entries hold a NaN
// sentinel and every consumer must branch on the mask, never on the value.
struct ObservationSet {
  std::vector<double> y0, y1;        // [k][channel][j]
  std::vector<std::uint8_t> mask0;   // [k][j], 1 = observed
  std::vector<std::uint8_t> mask1;   // [k][j]
  double sigma_obs = 0.0;
  GridShape shape;
  int K = 0;

  ObservationSet() = default;
  ObservationSet(int layers, const GridShape& s)
      : y0(static_cast<std::size_t>(layers) * 3 * s.m(), 0.0),
        y1(static_cast<std::size_t>(layers) * 3 * s.m(), 0.0),
        mask0(static_cast<std::size_t>(layers) * s.m(), 1),
        mask1(static_cast<std::size_t>(layers) * s.m(), 1),
        shape(s),
        K(layers) {}

  double* y_layer(Time t, int k, int channel) {
    auto& y = (t == Time::T0) ? y0 : y1;
    return y.data() + (static_cast<std::size_t>(k) * 3 + channel) * shape.m();
  }
  const double* y_layer(Time t, int k, int channel) const {
    const auto& y = (t == Time::T0) ? y0 : y1;
    return y.data() + (static_cast<std::size_t>(k) * 3 + channel) * shape.m();
  }
  std::uint8_t* mask_layer(Time t, int k) {
    auto& mk = (t == Time::T0) ? mask0 : mask1;
    return mk.data() + static_cast<std::size_t>(k) * shape.m();
  }
  const std::uint8_t* mask_layer(Time t, int k) const {
    const auto& mk = (t == Time::T0) ? mask0 : mask1;
    return mk.data() + static_cast<std::size_t>(k) * shape.m();
  }
};

// gamma^k in R^3 per layer boundary (channels T, q, o).
struct PhysicsConstants {
  std::vector<double> gamma;  // [k][channel], k = 0..K

  PhysicsConstants() = default;
  explicit PhysicsConstants(int K) : gamma(static_cast<std::size_t>(K + 1) * 3, 0.0) {}

  int boundaries() const { return static_cast<int>(gamma.size() / 3); }
  double& at(int k, int channel) { return gamma[static_cast<std::size_t>(k) * 3 + channel]; }
  double at(int k, int channel) const { return gamma[static_cast<std::size_t>(k) * 3 + channel]; }
};

// theta = (d^T, w^T, c^T)^T with only interior wind levels; n = (6K-1)m.
std::vector<double> pack_theta(const AMVState& state);
AMVState unpack_theta(const std::vector<double>& theta, int K, const GridShape& shape);
inline std::size_t theta_dim(int K, const GridShape& shape) {
  return static_cast<std::size_t>(6 * K - 1) * shape.m();
}

ObservationSet synthesize_observations(const ImageStack& truth_t0, const ImageStack& truth_t1,
                                       const std::vector<std::uint8_t>& mask0,
                                       const std::vector<std::uint8_t>& mask1, double sigma_obs,
                                       std::uint64_t seed);

}  // namespace amv
