#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amv/admm.hpp"
#include "amv/synth.hpp"

namespace amv {

struct IoError : Error {
  using Error::Error;
};

// Binary field file: magic "AMV1", little-endian u32 quadruple
// (layers, channels, rows, cols), then row-major 32-bit little-endian floats
// in [layer][channel][row][col] order.
void write_field(const std::string& path, std::uint32_t layers, std::uint32_t channels,
                 std::uint32_t rows, std::uint32_t cols, const double* data);
std::vector<double> read_field(const std::string& path, std::uint32_t* layers,
                               std::uint32_t* channels, std::uint32_t* rows, std::uint32_t* cols);

// Mask file: magic "AMSK", u32 triple (layers, rows, cols), one byte per
// pixel, 1 = observed.
void write_mask(const std::string& path, std::uint32_t layers, std::uint32_t rows,
                std::uint32_t cols, const std::uint8_t* data);
std::vector<std::uint8_t> read_mask(const std::string& path, std::uint32_t* layers,
                                    std::uint32_t* rows, std::uint32_t* cols);

// Dataset directory: the files above plus manifest.json naming each role.
void save_dataset(const std::string& dir, const SyntheticDataset& ds, const SyntheticSpec& spec);

struct LoadedDataset {
  PressureGrid grid;
  GridShape shape;
  ObservationSet obs;
  PhysicsConstants gamma;
  std::vector<double> truth_d;  // empty when absent
  std::vector<double> truth_w;
  double sigma_obs = 0.0;
  std::uint64_t seed = 0;
};

LoadedDataset load_dataset(const std::string& dir);

void save_estimate(const std::string& dir, const std::string& variant, const AMVState& estimate,
                   const AdmmTrace& trace);
AMVState load_estimate(const std::string& dir, std::string* variant);

// Solver configuration JSON; scalar alpha entries broadcast across layers.
void load_config(const std::string& path, int K, SolverConfig* cfg, AdmmOptions* opts);

}  // namespace amv
