#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "amv/wavelet.hpp"

namespace amv {

// Evaluates f(x) and writes the gradient; must be pure.
using ObjectiveFn = std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct LbfgsOptions {
  int memory = 10;
  double g_tol = 1e-10;      // absolute infinity-norm gradient tolerance
  double g_tol_rel = 1e-6;   // relative to the initial gradient norm (0 disables)
  int max_iterations = 50;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 30;
};

enum class SolveStatus { Converged, MaxIterations, LineSearchFailure, NonFiniteObjective };

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  double grad_inf_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  SolveStatus status = SolveStatus::Converged;
};

struct NonFiniteObjective : Error {
  using Error::Error;
};

MinimizeResult minimize(const ObjectiveFn& objective, std::vector<double> x0,
                        const LbfgsOptions& opts);

// Coarse-to-fine wrapper: runs minimize once per schedule stage with only the
// active wavelet bands free, warm-starting each stage from the last.
// coord_band[i] gives the band of coordinate i (kAlwaysActive for coordinates
// outside any expansion, e.g. vertical winds).
inline constexpr std::uint8_t kAlwaysActive = 0xFF;

MinimizeResult multiscale_minimize(const ObjectiveFn& objective, std::vector<double> x0,
                                   const std::vector<std::uint8_t>& coord_band,
                                   const ScaleSchedule& schedule, const LbfgsOptions& opts);

// Max relative error of the analytic gradient against central finite
// differences over seeded random directional probes.
struct GradCheckReport {
  double max_rel_error = 0.0;
  int trials = 0;
};

GradCheckReport gradient_check(const ObjectiveFn& objective, const std::vector<double>& point,
                               double step, int trials, std::uint64_t seed = 2024);

}  // namespace amv
