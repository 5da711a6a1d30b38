#pragma once

#include <string>
#include <vector>

#include "amv/energy.hpp"

namespace amv {

struct DivergenceDetected : Error {
  using Error::Error;
};
struct OddLayerCount : Error {
  using Error::Error;
};

enum class AdmmMode { Joint, Split };

enum class Variant { V2d, V2dIncompressible, V3d, V3dHydroSoft, V3dHydroHard };

Variant variant_from_string(const std::string& name);
std::string variant_name(Variant v);
ConstraintKind variant_constraint(Variant v);
bool variant_pins_omega(Variant v);

struct AdmmOptions {
  int max_outer = 50;
  double eps_pri = 1e-3;
  double eps_dual = 1e-3;
  AdmmMode mode = AdmmMode::Split;
  Variant variant = Variant::V3dHydroHard;
  bool odd_layer_padding = true;      // assign a trailing odd layer to the even half-step
  const AMVState* warm_start = nullptr;

  void validate() const;
};

struct AdmmIterationRecord {
  int iteration = 0;
  double objective = 0.0;  // data term + reg_d + sum_k alpha_x^k ||c~^k||_1
  double pri_hydro = 0.0;  // ||D d - L w|| / max(||D d||, ||L w||)
  double pri_c = 0.0;      // ||c - c~|| / max(||c||, ||c~||)
  double pri_w = 0.0;      // ||w - w~|| / max(||w||, ||w~||), split mode
  double dual_c = 0.0;
  double dual_w = 0.0;
  int inner_iterations = 0;
  double wall_seconds = 0.0;
};

struct AdmmTrace {
  std::vector<AdmmIterationRecord> records;
  bool converged = false;

  void write_csv(const std::string& path) const;
};

struct AdmmResult {
  AMVState state;
  AdmmTrace trace;
  DualState duals;
  double w_disagreement_inf = 0.0;  // ||w - w~||_inf at exit (split mode)
};

AdmmResult run_joint_admm(const ObservationSet& obs, const PressureGrid& grid,
                          const SolverConfig& cfg, const AdmmOptions& opts);
AdmmResult run_split_admm(const ObservationSet& obs, const PressureGrid& grid,
                          const SolverConfig& cfg, const AdmmOptions& opts);

// Dispatches on opts.variant / opts.mode after applying the variant's
// constraint kind and wind pinning.
AdmmResult run_variant(const ObservationSet& obs, const PressureGrid& grid,
                       const SolverConfig& cfg, const AdmmOptions& opts);

}  // namespace amv
