#include "amv/synth.hpp"

#include <cmath>
#include <cstring>

#include "amv/diffops.hpp"
#include "amv/rng.hpp"
#include "amv/spline.hpp"
#include "amv/wavelet.hpp"

namespace amv {

void SyntheticSpec::validate() const {
  if (amplitude < 0.0) throw InvalidSpec("amplitude must be nonnegative");
  if (sigma_obs < 0.0) throw InvalidSpec("sigma_obs must be nonnegative");
  if (mask_style != "full" && mask_style != "swath" && mask_style != "random")
    throw InvalidSpec("mask_style must be full, swath or random");
  if (mask_style == "swath" && (!(swath_width > 0.0) || !(swath_period > 0.0)))
    throw InvalidSpec("swath parameters must be positive");
  if (levels.size() < 3) throw InvalidSpec("need at least 3 pressure levels");
  if (!gamma.empty() && gamma.size() != levels.size() * 3)
    throw InvalidSpec("gamma override must be (K+1)*3 values");
}

namespace {

double plane_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

// Smooth random plane: band-wise power-law wavelet coefficients; bands at or
// beyond max_band are dropped entirely when max_band >= 0.
std::vector<double> powerlaw_plane(const WaveletBasis& basis, double slope, const CounterRng& rng,
                                   std::uint64_t stream_offset, int max_band = -1) {
  const int m = basis.shape().m();
  std::vector<double> coeffs(m);
  const auto& band = basis.band_map();
  for (int j = 0; j < m; ++j) {
    if (max_band >= 0 && band[j] >= max_band) {
      coeffs[j] = 0.0;
      continue;
    }
    const double sigma = std::pow(2.0, -slope * band[j]);
    coeffs[j] = sigma * rng.normal(stream_offset + j);
  }
  std::vector<double> out(m);
  iwt2(coeffs.data(), basis, out.data());
  return out;
}

}  // namespace

void generate_truth(const SyntheticSpec& spec, PressureGrid* grid_out, AMVState* truth_out,
                    ImageStack* x_t0_out, ImageStack* x_t1_out, PhysicsConstants* gamma_out) {
  spec.validate();
  const GridShape shape(spec.rows, spec.cols);
  const PressureGrid grid = build_pressure_grid(spec.levels);
  const int K = grid.K();
  const int m = shape.m();
  const WaveletBasis basis(shape);
  const CounterRng rng(spec.seed, 100);

  AMVState truth(K, shape);

  // stream / potential scalar fields per layer, AR(1)-correlated vertically
  std::vector<std::vector<double>> chi(K);
  {
    const double ar = std::min(std::max(spec.vertical_corr, 0.0), 0.999);
    const double fresh = std::sqrt(1.0 - ar * ar);
    std::vector<double> psi_prev, chi_prev;
    std::uint64_t stream = 0;
    for (int k = 0; k < K; ++k) {
      std::vector<double> psi = powerlaw_plane(basis, spec.flow_slope, rng, (stream++) << 24);
      if (k > 0) {
        for (int j = 0; j < m; ++j) psi[j] = ar * psi_prev[j] + fresh * psi[j];
      }
      psi_prev = psi;
      const double pstd = plane_std(psi);
      const double pscale = pstd > 1e-30 ? spec.amplitude / pstd : 0.0;
      // rotational part (-Dy psi, Dx psi): discretely divergence-free
      std::vector<double> gx(m), gy(m);
      gradient_x(psi.data(), shape, gx.data());
      gradient_y(psi.data(), shape, gy.data());
      double* du = truth.d_layer(k, 0);
      double* dv = truth.d_layer(k, 1);
      // gradients shrink the field; renormalize the velocity itself
      std::vector<double> ru(m), rv(m);
      for (int j = 0; j < m; ++j) {
        ru[j] = -gy[j];
        rv[j] = gx[j];
      }
      const double vstd = 0.5 * (plane_std(ru) + plane_std(rv));
      const double vscale = vstd > 1e-30 ? spec.amplitude / vstd : 0.0;
      for (int j = 0; j < m; ++j) {
        du[j] = vscale * ru[j];
        dv[j] = vscale * rv[j];
      }
      (void)pscale;
      chi[k] = powerlaw_plane(basis, spec.flow_slope, rng, (stream++) << 24,
                              std::min(spec.chi_bands, basis.num_bands()));
      if (k > 0) {
        for (int j = 0; j < m; ++j) chi[k][j] = ar * chi_prev[j] + fresh * chi[k][j];
      }
      chi_prev = chi[k];
      const double cstd = plane_std(chi[k]);
      const double cscale = cstd > 1e-30 ? spec.divergent_fraction * spec.amplitude / cstd : 0.0;
      for (int j = 0; j < m; ++j) chi[k][j] *= cscale;
    }
  }
  if (spec.balanced && K >= 2) {
    // sum_k dp^k chi^k = 0 pixelwise, so the telescoped mass flux vanishes
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int k = 0; k + 1 < K; ++k) acc += grid.increments[k] * chi[k][j];
      chi[K - 1][j] = -acc / grid.increments[K - 1];
    }
  }

  // potential part and vertical winds; winds are linear in the chi fields, so
  // one rescale pins their magnitude without breaking feasibility
  std::vector<double> dpot(static_cast<std::size_t>(K) * 2 * m);
  for (int k = 0; k < K; ++k) {
    gradient_x(chi[k].data(), shape, dpot.data() + (static_cast<std::size_t>(k) * 2 + 0) * m);
    gradient_y(chi[k].data(), shape, dpot.data() + (static_cast<std::size_t>(k) * 2 + 1) * m);
  }
  std::vector<double> w_raw;
  double wscale = 1.0;
  if (spec.amplitude > 0.0) {
    w_raw = solve_vertical(dpot.data(), K, shape, grid);
    double wstd = plane_std(w_raw);
    if (wstd > 1e-30 && spec.omega_std > 0.0) wscale = spec.omega_std / wstd;
  }
  for (std::size_t i = 0; i < dpot.size(); ++i) truth.d[i] += wscale * dpot[i];
  {
    const std::vector<double> w = solve_vertical(truth.d.data(), K, shape, grid);
    std::memcpy(truth.w_level(1), w.data(), sizeof(double) * (K - 1) * m);
    truth.zero_boundary_winds();
  }
  if (spec.amplitude == 0.0) std::fill(truth.d.begin(), truth.d.end(), 0.0);

  // gamma constants
  PhysicsConstants gamma(K);
  if (!spec.gamma.empty()) {
    gamma.gamma = spec.gamma;
  } else {
    const CounterRng grng(spec.seed, 7);
    for (int b = 0; b <= K; ++b)
      for (int ch = 0; ch < 3; ++ch) {
        const std::uint64_t ctr = static_cast<std::uint64_t>(b) * 3 + ch;
        const double mag = 0.1 + 0.25 * grng.uniform(2 * ctr);
        gamma.at(b, ch) = (grng.uniform(2 * ctr + 1) < 0.5 ? -1.0 : 1.0) * mag;
      }
  }

  // smooth positive tracer images at t1, exact warp back to t0
  ImageStack x1(grid, shape, Time::T1);
  ImageStack x0(grid, shape, Time::T0);
  {
    const CounterRng xrng(spec.seed, 13);
    std::uint64_t stream = 0;
    for (int k = 0; k < K; ++k)
      for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> plane = powerlaw_plane(basis, spec.spectral_slope, xrng, (stream++) << 24);
        const double pstd = plane_std(plane);
        const double scale = pstd > 1e-30 ? 0.5 / pstd : 0.0;
        double lo = 1e30;
        double* dst = x1.layer(k, ch);
        for (int j = 0; j < m; ++j) {
          dst[j] = 2.0 + scale * plane[j];
          lo = std::min(lo, dst[j]);
        }
        if (lo <= 0.1)  // rare deep excursion; compress toward the mean
          for (int j = 0; j < m; ++j) dst[j] = 2.0 + (dst[j] - 2.0) * (1.8 / (2.0 - lo));
      }
    for (int k = 0; k < K; ++k)
      warp_layer(x1.layer(k, 0), truth.d_layer(k, 0), truth.w_level(k), truth.w_level(k + 1),
                 &gamma.gamma[static_cast<std::size_t>(k) * 3],
                 &gamma.gamma[static_cast<std::size_t>(k + 1) * 3], 1.0, shape, x0.layer(k, 0));
  }

  // coefficients of x_t1
  for (int k = 0; k < K; ++k)
    for (int ch = 0; ch < 3; ++ch) fwt2(x1.layer(k, ch), basis, truth.c_layer(k, ch));

  if (spec.amplitude == 0.0) x0.values = x1.values;

  *grid_out = grid;
  *truth_out = std::move(truth);
  *x_t0_out = std::move(x0);
  *x_t1_out = std::move(x1);
  *gamma_out = std::move(gamma);
}

std::vector<std::uint8_t> make_masks(const SyntheticSpec& spec, int K, const GridShape& shape,
                                     Time t) {
  const int m = shape.m();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(K) * m, 1);
  if (spec.mask_style == "full") return mask;
  const CounterRng rng(spec.seed, t == Time::T0 ? 21 : 22);
  if (spec.mask_style == "swath") {
    const double offset = rng.uniform(0) * spec.swath_period;
    for (int y = 0; y < shape.rows; ++y)
      for (int x = 0; x < shape.cols; ++x) {
        const double phase = std::fmod(x + y + offset, spec.swath_period);
        const std::uint8_t v = phase < spec.swath_width ? 1 : 0;
        for (int k = 0; k < K; ++k) mask[static_cast<std::size_t>(k) * m + shape.index(x, y)] = v;
      }
  } else {  // random, independent per layer
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < m; ++j)
        mask[static_cast<std::size_t>(k) * m + j] =
            rng.uniform(static_cast<std::uint64_t>(k) * m + j) < spec.random_coverage ? 1 : 0;
  }
  return mask;
}

SyntheticDataset generate_dataset(const SyntheticSpec& spec) {
  SyntheticDataset ds;
  generate_truth(spec, &ds.grid, &ds.truth, &ds.x_t0, &ds.x_t1, &ds.gamma);
  ds.shape = GridShape(spec.rows, spec.cols);
  const auto mask0 = make_masks(spec, ds.grid.K(), ds.shape, Time::T0);
  const auto mask1 = make_masks(spec, ds.grid.K(), ds.shape, Time::T1);
  ds.obs = synthesize_observations(ds.x_t0, ds.x_t1, mask0, mask1, spec.sigma_obs, spec.seed);
  return ds;
}

std::vector<double> pressure_average(const std::vector<double>& bands,
                                     const std::vector<double>& band_pressures, int m,
                                     const PressureGrid& grid) {
  const int B = static_cast<int>(band_pressures.size()) - 1;
  if (B < 1 || bands.size() != static_cast<std::size_t>(B) * m)
    throw ShapeMismatch("bands must be B x m with B+1 band pressures");
  for (int b = 0; b < B; ++b)
    if (!(band_pressures[b] > band_pressures[b + 1]))
      throw InvalidSpec("band pressures must be strictly decreasing");

  const int K = grid.K();
  std::vector<double> out(static_cast<std::size_t>(K) * m, 0.0);
  for (int k = 0; k < K; ++k) {
    const double hi = grid.levels[k];       // larger pressure
    const double lo = grid.levels[k + 1];   // smaller pressure
    double covered = 0.0;
    for (int b = 0; b < B; ++b) {
      const double overlap =
          std::min(hi, band_pressures[b]) - std::max(lo, band_pressures[b + 1]);
      if (overlap <= 0.0) continue;
      covered += overlap;
      const double wgt = overlap / grid.increments[k];
      const double* src = bands.data() + static_cast<std::size_t>(b) * m;
      double* dst = out.data() + static_cast<std::size_t>(k) * m;
      for (int j = 0; j < m; ++j) dst[j] += wgt * src[j];
    }
    if (covered < grid.increments[k] * (1.0 - 1e-9))
      throw CoverageGap("layer " + std::to_string(k) + " not fully covered by bands");
  }
  return out;
}

PhysicsConstants calibrate_gamma(const ImageStack& x_t0, const ImageStack& x_t1,
                                 const AMVState& truth, const PressureGrid& grid,
                                 const std::uint8_t* mask0, const std::uint8_t* mask1, double dt,
                                 bool* singular) {
  const int K = grid.K();
  const int m = x_t0.shape.m();
  if (x_t1.K() != K || truth.K != K) throw ShapeMismatch("stack/state layer mismatch");
  const int nb = K + 1;
  PhysicsConstants gamma(K);
  if (singular) *singular = false;

  // per-channel normal equations over the (K+1) boundary unknowns
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> A(static_cast<std::size_t>(nb) * nb, 0.0);
    std::vector<double> b(nb, 0.0);
    for (int k = 0; k < K; ++k) {
      const SplinePlane plane = prefilter(x_t1.layer(k, ch), x_t0.shape);
      const double* du = truth.d_layer(k, 0);
      const double* dv = truth.d_layer(k, 1);
      const double* wlo = truth.w_level(k);
      const double* whi = truth.w_level(k + 1);
      const double* y0 = x_t0.layer(k, ch);
      for (int j = 0; j < m; ++j) {
        if (mask0 && !mask0[static_cast<std::size_t>(k) * m + j]) continue;
        if (mask1 && !mask1[static_cast<std::size_t>(k) * m + j]) continue;
        const double z =
            interp(plane, x_t0.shape.x_of(j) + du[j], x_t0.shape.y_of(j) + dv[j]) - y0[j];
        const double alo = 0.5 * dt * wlo[j];
        const double ahi = 0.5 * dt * whi[j];
        A[static_cast<std::size_t>(k) * nb + k] += alo * alo;
        A[static_cast<std::size_t>(k) * nb + (k + 1)] += alo * ahi;
        A[static_cast<std::size_t>(k + 1) * nb + k] += alo * ahi;
        A[static_cast<std::size_t>(k + 1) * nb + (k + 1)] += ahi * ahi;
        b[k] += alo * z;
        b[k + 1] += ahi * z;
      }
    }

    // boundaries without wind energy are unidentifiable; pin them to zero
    std::vector<int> keep;
    for (int a = 0; a < nb; ++a)
      if (A[static_cast<std::size_t>(a) * nb + a] >= 1e-12) keep.push_back(a);
    if (keep.empty()) {
      if (singular) *singular = true;
      continue;  // gamma stays zero for this channel
    }
    const int n = static_cast<int>(keep.size());
    std::vector<double> M(static_cast<std::size_t>(n) * n);
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i) {
      rhs[i] = b[keep[i]];
      for (int j2 = 0; j2 < n; ++j2)
        M[static_cast<std::size_t>(i) * n + j2] = A[static_cast<std::size_t>(keep[i]) * nb + keep[j2]];
    }
    for (int col = 0; col < n; ++col) {  // SPD; plain elimination
      const double piv = M[static_cast<std::size_t>(col) * n + col];
      for (int row = col + 1; row < n; ++row) {
        const double f = M[static_cast<std::size_t>(row) * n + col] / piv;
        for (int c2 = col; c2 < n; ++c2)
          M[static_cast<std::size_t>(row) * n + c2] -= f * M[static_cast<std::size_t>(col) * n + c2];
        rhs[row] -= f * rhs[col];
      }
    }
    for (int row = n - 1; row >= 0; --row) {
      double s = rhs[row];
      for (int c2 = row + 1; c2 < n; ++c2)
        s -= M[static_cast<std::size_t>(row) * n + c2] * gamma.at(keep[c2], ch);
      gamma.at(keep[row], ch) = s / M[static_cast<std::size_t>(row) * n + row];
    }
  }
  return gamma;
}

}  // namespace amv
