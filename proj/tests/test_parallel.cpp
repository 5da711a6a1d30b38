// The OpenMP kernels must agree with the plain serial reference code, and
// solver results must not depend on thread count or worker scheduling.

#include <cmath>
#include <cstring>

#include "amv/diffops.hpp"
#include "amv/parallel.hpp"
#include "amv/reference.hpp"
#include "amv/rng.hpp"
#include "amv/spline.hpp"
#include "amv/wavelet.hpp"
#include "doctest.h"

using namespace amv;

namespace {

std::vector<double> random_plane(int m, std::uint64_t seed) {
  std::vector<double> v(m);
  const CounterRng rng(seed);
  for (int j = 0; j < m; ++j) v[j] = rng.normal(j);
  return v;
}

}  // namespace

TEST_CASE("stencil kernels match the serial reference bitwise") {
  const GridShape shape(32, 64);
  const int m = shape.m();
  const auto du = random_plane(m, 1);
  const auto dv = random_plane(m, 2);
  std::vector<double> a(m), b(m);

  divergence(du.data(), dv.data(), shape, a.data());
  ref::divergence(du.data(), dv.data(), shape, b.data());
  CHECK(a == b);

  laplacian(du.data(), shape, a.data());
  ref::laplacian(du.data(), shape, b.data());
  CHECK(a == b);
}

TEST_CASE("vertical solves agree with the dense reference") {
  const GridShape shape(8, 8);
  const PressureGrid grid = build_pressure_grid({1000, 850, 700, 550, 400});
  const int K = grid.K();
  std::vector<double> d(static_cast<std::size_t>(K) * 2 * shape.m());
  const CounterRng rng(3);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = rng.normal(i);
  const auto fast = solve_vertical(d.data(), K, shape, grid);
  const auto dense = ref::solve_vertical(d.data(), K, shape, grid);
  for (std::size_t i = 0; i < fast.size(); ++i)
    CHECK(fast[i] == doctest::Approx(dense[i]).epsilon(1e-10));
}

TEST_CASE("warp kernel matches the per-pixel reference") {
  const GridShape shape(16, 16);
  const int m = shape.m();
  const auto x1 = random_plane(3 * m, 4);
  auto d = random_plane(2 * m, 5);
  for (double& v : d) v *= 1.5;
  const auto w0 = random_plane(m, 6);
  const auto w1 = random_plane(m, 7);
  const double g0[3] = {0.3, -0.6, 0.9};
  const double g1[3] = {-0.2, 0.4, 1.0};
  std::vector<double> a(static_cast<std::size_t>(3) * m), b(static_cast<std::size_t>(3) * m);
  warp_layer(x1.data(), d.data(), w0.data(), w1.data(), g0, g1, 1.0, shape, a.data());
  ref::warp_layer(x1.data(), d.data(), w0.data(), w1.data(), g0, g1, 1.0, shape, b.data());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("wavelet transforms match the reference") {
  const GridShape shape(32, 32);
  const WaveletBasis basis(shape);
  const auto x = random_plane(shape.m(), 8);
  std::vector<double> a(shape.m()), b(shape.m());
  fwt2(x.data(), basis, a.data());
  ref::fwt2(x.data(), basis, b.data());
  for (int j = 0; j < shape.m(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
  std::vector<double> ia(shape.m()), ib(shape.m());
  iwt2(a.data(), basis, ia.data());
  ref::iwt2(a.data(), basis, ib.data());
  for (int j = 0; j < shape.m(); ++j) CHECK(ia[j] == doctest::Approx(ib[j]).epsilon(1e-12));
}

TEST_CASE("prox matches the reference bitwise") {
  const int K = 2, m = 64;
  const auto in = random_plane(K * 3 * m, 9);
  const std::vector<double> alpha = {0.4, 0.9};
  std::vector<double> a(in.size()), b(in.size());
  prox_step(in.data(), K, m, alpha, 1.3, a.data());
  ref::prox_step(in.data(), K, m, alpha, 1.3, b.data());
  CHECK(a == b);
}

TEST_CASE("kernel results are independent of thread count") {
  const int saved = max_threads();
  const GridShape shape(64, 64);
  const int m = shape.m();
  const auto x = random_plane(3 * m, 10);
  auto d = random_plane(2 * m, 11);
  const auto w0 = random_plane(m, 12);
  const auto w1 = random_plane(m, 13);
  const double g0[3] = {0.5, -0.1, 0.7};
  const double g1[3] = {0.2, 0.8, -0.4};
  const WaveletBasis basis(shape);

  std::vector<double> warp1(static_cast<std::size_t>(3) * m), warpN(warp1.size());
  std::vector<double> coef1(m), coefN(m);
  set_threads(1);
  warp_layer(x.data(), d.data(), w0.data(), w1.data(), g0, g1, 1.0, shape, warp1.data());
  fwt2(x.data(), basis, coef1.data());
  set_threads(saved);
  warp_layer(x.data(), d.data(), w0.data(), w1.data(), g0, g1, 1.0, shape, warpN.data());
  fwt2(x.data(), basis, coefN.data());
  CHECK(warp1 == warpN);
  CHECK(coef1 == coefN);
}
