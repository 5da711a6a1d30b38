// Times the OpenMP kernels against the serial reference implementations and
// prints a speedup table.  Usage: amv-bench [size] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "amv/diffops.hpp"
#include "amv/parallel.hpp"
#include "amv/reference.hpp"
#include "amv/rng.hpp"
#include "amv/spline.hpp"
#include "amv/wavelet.hpp"

namespace {

double time_best_of(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, dt);
  }
  return best;
}

std::vector<double> random_plane(int m, std::uint64_t seed) {
  std::vector<double> v(m);
  const amv::CounterRng rng(seed);
  for (int j = 0; j < m; ++j) v[j] = rng.normal(j);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 256;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
  const amv::GridShape shape(n, n);
  const int m = shape.m();
  std::printf("grid %dx%d, %d threads, best of %d\n\n", n, n, amv::max_threads(), repeats);
  std::printf("%-18s %12s %12s %9s\n", "kernel", "serial [ms]", "openmp [ms]", "speedup");

  const auto report = [&](const char* name, double serial, double parallel) {
    std::printf("%-18s %12.3f %12.3f %8.2fx\n", name, 1e3 * serial, 1e3 * parallel,
                serial / parallel);
  };

  const auto du = random_plane(m, 1);
  const auto dv = random_plane(m, 2);
  std::vector<double> out(m);

  report("divergence",
         time_best_of(repeats, [&] { amv::ref::divergence(du.data(), dv.data(), shape, out.data()); }),
         time_best_of(repeats, [&] { amv::divergence(du.data(), dv.data(), shape, out.data()); }));

  report("laplacian",
         time_best_of(repeats, [&] { amv::ref::laplacian(du.data(), shape, out.data()); }),
         time_best_of(repeats, [&] { amv::laplacian(du.data(), shape, out.data()); }));

  {
    const amv::PressureGrid grid =
        amv::build_pressure_grid({1000, 925, 850, 775, 700, 625, 550, 475, 400});
    const int K = grid.K();
    const auto d = random_plane(K * 2 * m, 3);
    report("solve_vertical",
           time_best_of(repeats, [&] { amv::ref::solve_vertical(d.data(), K, shape, grid); }),
           time_best_of(repeats, [&] { amv::solve_vertical(d.data(), K, shape, grid); }));
  }

  {
    const auto x1 = random_plane(3 * m, 4);
    const auto d = random_plane(2 * m, 5);
    const auto w0 = random_plane(m, 6);
    const auto w1 = random_plane(m, 7);
    const double g0[3] = {0.3, -0.6, 0.9};
    const double g1[3] = {-0.2, 0.4, 1.0};
    std::vector<double> warped(static_cast<std::size_t>(3) * m);
    report("warp_layer",
           time_best_of(repeats,
                        [&] {
                          amv::ref::warp_layer(x1.data(), d.data(), w0.data(), w1.data(), g0, g1,
                                               1.0, shape, warped.data());
                        }),
           time_best_of(repeats, [&] {
             amv::warp_layer(x1.data(), d.data(), w0.data(), w1.data(), g0, g1, 1.0, shape,
                             warped.data());
           }));
  }

  {
    const amv::WaveletBasis basis(shape);
    const auto x = random_plane(m, 8);
    std::vector<double> c(m);
    report("fwt2",
           time_best_of(repeats, [&] { amv::ref::fwt2(x.data(), basis, c.data()); }),
           time_best_of(repeats, [&] { amv::fwt2(x.data(), basis, c.data()); }));
    report("iwt2",
           time_best_of(repeats, [&] { amv::ref::iwt2(c.data(), basis, out.data()); }),
           time_best_of(repeats, [&] { amv::iwt2(c.data(), basis, out.data()); }));
  }

  {
    const int K = 8;
    const auto cin = random_plane(K * 3 * m, 9);
    const std::vector<double> alpha(K, 0.5);
    std::vector<double> cout(cin.size());
    report("prox_step",
           time_best_of(repeats,
                        [&] { amv::ref::prox_step(cin.data(), K, m, alpha, 1.0, cout.data()); }),
           time_best_of(repeats,
                        [&] { amv::prox_step(cin.data(), K, m, alpha, 1.0, cout.data()); }));
  }

  return 0;
}
