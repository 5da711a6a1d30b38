#pragma once

#include <map>
#include <string>
#include <vector>

#include "amv/admm.hpp"
#include "amv/synth.hpp"

namespace amv {

struct ZeroDenominator : Error {
  using Error::Error;
};

// Normalized average horizontal endpoint error per layer over the pixels with
// consecutive observations (mask0 AND mask1 of that layer).
std::vector<double> epe(const std::vector<double>& d_hat, const std::vector<double>& d_true, int K,
                        const GridShape& shape, const std::vector<std::uint8_t>& mask0,
                        const std::vector<std::uint8_t>& mask1);

// Normalized RMSE on vertical winds per boundary level.  Boundary levels 0
// and K have identically zero truth and are reported as NaN; a vanishing
// denominator on an interior boundary raises ZeroDenominator.
std::vector<double> vrmse(const std::vector<double>& w_hat, const std::vector<double>& w_true,
                          int K, const GridShape& shape, const std::vector<std::uint8_t>& mask0,
                          const std::vector<std::uint8_t>& mask1);

struct EvalReport {
  struct Row {
    std::string variant;
    int layer = 0;
    double epe = 0.0;
    double vrmse = 0.0;  // lower boundary of the layer; NaN for layer 0
  };
  std::vector<Row> rows;
  std::map<std::string, double> runtime_seconds;

  void write_csv(const std::string& path) const;
};

EvalReport evaluate_estimate(const std::string& variant, const AMVState& estimate,
                             const AMVState& truth, const ObservationSet& obs);

// Runs each variant on the same dataset and gathers per-layer error profiles.
EvalReport run_benchmark(const SyntheticDataset& ds, const std::vector<Variant>& variants,
                         const SolverConfig& cfg, const AdmmOptions& base_opts);

}  // namespace amv
