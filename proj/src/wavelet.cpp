#include "amv/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace amv {

namespace {

// Length-30 orthonormal Coiflet scaling filter: 10 vanishing wavelet moments
// and 9 vanishing scaling-function moments about tap 10.  Derived from the
// defining equations and polished to 50 digits; see tests for the verified
// filter identities.
constexpr int kTaps = 30;
const double kLo[kTaps] = {
    2.24731252394540611e-5,   6.90157662525747038e-5,   -2.08343184879144445e-4,
    -1.07480805837132506e-3,  7.21735585496175393e-4,   8.49633491819719341e-3,
    -6.81913681578782941e-4,  -4.87513041463116081e-2,  -3.11025184250279092e-3,
    3.38474000187308038e-1,   7.20906903748451157e-1,   5.49508847781714444e-1,
    -2.83322436592363777e-2,  -2.11790978283897162e-1,  3.68898287845281618e-2,
    1.04080948642868258e-1,   -3.27928372579345906e-2,  -4.18771011924611380e-2,
    2.02203048870976304e-2,   1.17016920807944813e-2,   -8.51629382839376592e-3,
    -1.73903170560726161e-3,  2.34029690008649797e-3,   -4.48309459835664343e-5,
    -3.83861196363900257e-4,  6.17297058309671938e-5,   3.21303897408988343e-5,
    -8.10724334462654484e-6,  -1.14758320309788694e-6,  3.73679558255292784e-7,
};

const double* highpass() {
  static double g[kTaps];
  static bool init = [] {
    for (int k = 0; k < kTaps; ++k) g[k] = (k % 2 ? -1.0 : 1.0) * kLo[kTaps - 1 - k];
    return true;
  }();
  (void)init;
  return g;
}

}  // namespace

const double* coiflet30_lowpass() { return kLo; }
const double* coiflet30_highpass() { return highpass(); }

namespace {

void analyze1d(const double* x, int n, double* out) {
  const double* g = highpass();
  const int half = n / 2;
  const int mask = n - 1;
  for (int i = 0; i < half; ++i) {
    double s = 0.0, d = 0.0;
    const int base = 2 * i;
    for (int k = 0; k < kTaps; ++k) {
      const double v = x[(base + k) & mask];
      s += kLo[k] * v;
      d += g[k] * v;
    }
    out[i] = s;
    out[half + i] = d;
  }
}

void synthesize1d(const double* sd, int n, double* out) {
  const double* g = highpass();
  const int half = n / 2;
  const int mask = n - 1;
  std::memset(out, 0, sizeof(double) * n);
  for (int i = 0; i < half; ++i) {
    const double s = sd[i];
    const double d = sd[half + i];
    const int base = 2 * i;
    for (int k = 0; k < kTaps; ++k) out[(base + k) & mask] += kLo[k] * s + g[k] * d;
  }
}

void level_rows(double* a, int br, int bc, int stride, bool forward) {
#pragma omp parallel for
  for (int y = 0; y < br; ++y) {
    double tmp[2][4096 / sizeof(double)];
    std::vector<double> heap_in, heap_out;
    double *in = tmp[0], *out = tmp[1];
    if (bc > static_cast<int>(sizeof(tmp[0]) / sizeof(double))) {
      heap_in.resize(bc);
      heap_out.resize(bc);
      in = heap_in.data();
      out = heap_out.data();
    }
    double* row = a + static_cast<std::size_t>(y) * stride;
    std::memcpy(in, row, sizeof(double) * bc);
    if (forward)
      analyze1d(in, bc, out);
    else
      synthesize1d(in, bc, out);
    std::memcpy(row, out, sizeof(double) * bc);
  }
}

void level_cols(double* a, int br, int bc, int stride, bool forward) {
#pragma omp parallel for
  for (int x = 0; x < bc; ++x) {
    double tmp[2][4096 / sizeof(double)];
    std::vector<double> heap_in, heap_out;
    double *in = tmp[0], *out = tmp[1];
    if (br > static_cast<int>(sizeof(tmp[0]) / sizeof(double))) {
      heap_in.resize(br);
      heap_out.resize(br);
      in = heap_in.data();
      out = heap_out.data();
    }
    for (int y = 0; y < br; ++y) in[y] = a[static_cast<std::size_t>(y) * stride + x];
    if (forward)
      analyze1d(in, br, out);
    else
      synthesize1d(in, br, out);
    for (int y = 0; y < br; ++y) a[static_cast<std::size_t>(y) * stride + x] = out[y];
  }
}

}  // namespace

int WaveletBasis::default_depth(const GridShape& shape) {
  const int n = std::min(shape.rows, shape.cols);
  int lg = 0;
  while ((1 << (lg + 1)) <= n) ++lg;
  return std::max(1, lg - 2);  // leaves a 4x4 coarse band
}

WaveletBasis::WaveletBasis(const GridShape& shape, int depth) : shape_(shape), depth_(depth) {
  if (!is_power_of_two(shape.rows) || !is_power_of_two(shape.cols))
    throw NonPowerOfTwo("wavelet grid must have power-of-two sides");
  const int n = std::min(shape.rows, shape.cols);
  if (depth < 1 || (1 << depth) > n)
    throw BadDepth("depth " + std::to_string(depth) + " invalid for " +
                   std::to_string(shape.rows) + "x" + std::to_string(shape.cols));
  band_.resize(shape.m());
  for (int y = 0; y < shape.rows; ++y) {
    for (int x = 0; x < shape.cols; ++x) {
      int b = 0;
      while (b < depth_ && !(y < (shape.rows >> (depth_ - b)) && x < (shape.cols >> (depth_ - b))))
        ++b;
      band_[shape.index(x, y)] = static_cast<std::uint8_t>(b);
    }
  }
}

void fwt2(const double* image, const WaveletBasis& basis, double* coeffs) {
  const GridShape& s = basis.shape();
  std::memcpy(coeffs, image, sizeof(double) * s.m());
  for (int level = 0; level < basis.depth(); ++level) {
    const int br = s.rows >> level;
    const int bc = s.cols >> level;
    level_rows(coeffs, br, bc, s.cols, true);
    level_cols(coeffs, br, bc, s.cols, true);
  }
}

void iwt2(const double* coeffs, const WaveletBasis& basis, double* image) {
  const GridShape& s = basis.shape();
  std::memcpy(image, coeffs, sizeof(double) * s.m());
  for (int level = basis.depth() - 1; level >= 0; --level) {
    const int br = s.rows >> level;
    const int bc = s.cols >> level;
    level_cols(image, br, bc, s.cols, false);
    level_rows(image, br, bc, s.cols, false);
  }
}

double soft_threshold(double v, double lambda) {
  if (lambda < 0.0) throw NegativeLambda("soft threshold level must be nonnegative");
  if (v >= lambda) return v - lambda;
  if (v <= -lambda) return v + lambda;
  return 0.0;
}

void prox_step(const double* c_plus_u, int K, int m, const std::vector<double>& alpha_x,
               double rho, double* out) {
  if (!(rho > 0.0)) throw NonPositiveRho("prox step needs rho > 0");
  if (alpha_x.size() != static_cast<std::size_t>(K)) throw ShapeMismatch("alpha_x size != K");
  for (int k = 0; k < K; ++k) {
    const double lam = alpha_x[k] / rho;
    if (lam < 0.0) throw NegativeLambda("alpha_x must be nonnegative");
    const double* in = c_plus_u + static_cast<std::size_t>(k) * 3 * m;
    double* o = out + static_cast<std::size_t>(k) * 3 * m;
#pragma omp parallel for
    for (int i = 0; i < 3 * m; ++i) {
      const double v = in[i];
      o[i] = (v >= lam) ? v - lam : (v <= -lam ? v + lam : 0.0);
    }
  }
}

void ScaleSchedule::validate(int num_bands) const {
  if (active_bands.empty()) throw BadStage("schedule has no stages");
  int prev = 0;
  for (int b : active_bands) {
    if (b < 1 || b > num_bands) throw BadStage("stage activates out-of-range band count");
    if (b < prev) throw BadStage("stages must be nested (nondecreasing)");
    prev = b;
  }
  if (active_bands.back() != num_bands) throw BadStage("final stage must activate all bands");
}

ScaleSchedule default_schedule(int num_bands, int stages) {
  ScaleSchedule s;
  const int first = std::max(1, num_bands - stages + 1);
  for (int b = first; b <= num_bands; ++b) s.active_bands.push_back(b);
  return s;
}

void restrict_to_schedule(double* coeffs, const WaveletBasis& basis, const ScaleSchedule& schedule,
                          int stage) {
  schedule.validate(basis.num_bands());
  if (stage < 0 || stage >= schedule.stages()) throw BadStage("stage index out of range");
  const int active = schedule.active_bands[stage];
  const auto& band = basis.band_map();
  const int m = basis.shape().m();
  for (int i = 0; i < m; ++i)
    if (band[i] >= active) coeffs[i] = 0.0;
}

}  // namespace amv
