#include "amv/grid.hpp"

#include "amv/rng.hpp"

namespace amv {

PressureGrid build_pressure_grid(const std::vector<double>& levels) {
  if (levels.size() < 3) throw NonMonotoneLevels("need at least 3 pressure levels");
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    if (!(levels[k] > levels[k + 1]))
      throw NonMonotoneLevels("pressure levels must be strictly decreasing at index " +
                              std::to_string(k));
  }
  PressureGrid g;
  g.levels = levels;
  g.increments.resize(levels.size() - 1);
  for (std::size_t k = 0; k + 1 < levels.size(); ++k)
    g.increments[k] = levels[k] - levels[k + 1];
  return g;
}

std::vector<double> pack_theta(const AMVState& state) {
  const int K = state.K;
  const int m = state.shape.m();
  std::vector<double> theta(theta_dim(K, state.shape));
  double* out = theta.data();
  for (std::size_t i = 0; i < state.d.size(); ++i) out[i] = state.d[i];
  out += state.d.size();
  for (int k = 1; k < K; ++k) {
    const double* w = state.w_level(k);
    for (int j = 0; j < m; ++j) out[j] = w[j];
    out += m;
  }
  for (std::size_t i = 0; i < state.c.size(); ++i) out[i] = state.c[i];
  return theta;
}

AMVState unpack_theta(const std::vector<double>& theta, int K, const GridShape& shape) {
  if (theta.size() != theta_dim(K, shape))
    throw ShapeMismatch("theta has " + std::to_string(theta.size()) + " entries, expected " +
                        std::to_string(theta_dim(K, shape)));
  AMVState state(K, shape);
  const int m = shape.m();
  const double* in = theta.data();
  for (std::size_t i = 0; i < state.d.size(); ++i) state.d[i] = in[i];
  in += state.d.size();
  for (int k = 1; k < K; ++k) {
    double* w = state.w_level(k);
    for (int j = 0; j < m; ++j) w[j] = in[j];
    in += m;
  }
  for (std::size_t i = 0; i < state.c.size(); ++i) state.c[i] = in[i];
  state.zero_boundary_winds();
  return state;
}

ObservationSet synthesize_observations(const ImageStack& truth_t0, const ImageStack& truth_t1,
                                       const std::vector<std::uint8_t>& mask0,
                                       const std::vector<std::uint8_t>& mask1, double sigma_obs,
                                       std::uint64_t seed) {
  const int K = truth_t0.K();
  const int m = truth_t0.shape.m();
  if (!(truth_t1.shape == truth_t0.shape) || truth_t1.K() != K)
    throw ShapeMismatch("truth stacks differ in shape");
  if (mask0.size() != static_cast<std::size_t>(K) * m ||
      mask1.size() != static_cast<std::size_t>(K) * m)
    throw ShapeMismatch("mask size does not match stack");
  if (sigma_obs < 0.0) throw InvalidSpec("sigma_obs must be nonnegative");

  ObservationSet obs(K, truth_t0.shape);
  obs.sigma_obs = sigma_obs;
  obs.mask0 = mask0;
  obs.mask1 = mask1;
  const CounterRng rng0(seed, 0);
  const CounterRng rng1(seed, 1);
  for (int k = 0; k < K; ++k) {
    for (int ch = 0; ch < 3; ++ch) {
      const double* t0 = truth_t0.layer(k, ch);
      const double* t1 = truth_t1.layer(k, ch);
      double* o0 = obs.y_layer(Time::T0, k, ch);
      double* o1 = obs.y_layer(Time::T1, k, ch);
      const std::uint8_t* m0 = obs.mask_layer(Time::T0, k);
      const std::uint8_t* m1 = obs.mask_layer(Time::T1, k);
      for (int j = 0; j < m; ++j) {
        const std::uint64_t ctr = (static_cast<std::uint64_t>(k) * 3 + ch) * m + j;
        o0[j] = m0[j] ? t0[j] + sigma_obs * rng0.normal(ctr) : kMaskedSentinel;
        o1[j] = m1[j] ? t1[j] + sigma_obs * rng1.normal(ctr) : kMaskedSentinel;
      }
    }
  }
  return obs;
}

}  // namespace amv
