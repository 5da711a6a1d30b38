#include "amv/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace amv {

std::vector<double> epe(const std::vector<double>& d_hat, const std::vector<double>& d_true, int K,
                        const GridShape& shape, const std::vector<std::uint8_t>& mask0,
                        const std::vector<std::uint8_t>& mask1) {
  const int m = shape.m();
  if (d_hat.size() != d_true.size() || d_hat.size() != static_cast<std::size_t>(K) * 2 * m)
    throw ShapeMismatch("displacement stacks must be K x 2 x m");
  if (mask0.size() != static_cast<std::size_t>(K) * m || mask1.size() != mask0.size())
    throw ShapeMismatch("masks must be K x m");
  std::vector<double> out(K);
  for (int k = 0; k < K; ++k) {
    const double* tu = d_true.data() + (static_cast<std::size_t>(k) * 2 + 0) * m;
    const double* tv = d_true.data() + (static_cast<std::size_t>(k) * 2 + 1) * m;
    const double* hu = d_hat.data() + (static_cast<std::size_t>(k) * 2 + 0) * m;
    const double* hv = d_hat.data() + (static_cast<std::size_t>(k) * 2 + 1) * m;
    double num = 0.0, den = 0.0;
    for (int j = 0; j < m; ++j) {
      if (!mask0[static_cast<std::size_t>(k) * m + j] ||
          !mask1[static_cast<std::size_t>(k) * m + j])
        continue;
      const double eu = tu[j] - hu[j];
      const double ev = tv[j] - hv[j];
      num += std::sqrt(eu * eu + ev * ev);
      den += std::sqrt(tu[j] * tu[j] + tv[j] * tv[j]);
    }
    if (!(den > 0.0))
      throw ZeroDenominator("true displacement vanishes on the observed pixels of layer " +
                            std::to_string(k));
    out[k] = num / den;
  }
  return out;
}

std::vector<double> vrmse(const std::vector<double>& w_hat, const std::vector<double>& w_true,
                          int K, const GridShape& shape, const std::vector<std::uint8_t>& mask0,
                          const std::vector<std::uint8_t>& mask1) {
  const int m = shape.m();
  if (w_hat.size() != w_true.size() || w_hat.size() != static_cast<std::size_t>(K + 1) * m)
    throw ShapeMismatch("wind stacks must be (K+1) x m");
  std::vector<double> out(K + 1, std::numeric_limits<double>::quiet_NaN());
  for (int level = 1; level < K; ++level) {
    // the layer directly above the boundary supplies the observation mask
    const int k = level;
    const double* wt = w_true.data() + static_cast<std::size_t>(level) * m;
    const double* wh = w_hat.data() + static_cast<std::size_t>(level) * m;
    double num = 0.0, den = 0.0;
    for (int j = 0; j < m; ++j) {
      if (!mask0[static_cast<std::size_t>(k) * m + j] ||
          !mask1[static_cast<std::size_t>(k) * m + j])
        continue;
      num += (wt[j] - wh[j]) * (wt[j] - wh[j]);
      den += wt[j] * wt[j];
    }
    if (!(den > 0.0))
      throw ZeroDenominator("true vertical wind vanishes on boundary " + std::to_string(level));
    out[level] = std::sqrt(num / den);
  }
  return out;
}

void EvalReport::write_csv(const std::string& path) const {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open " + path);
  std::fprintf(f, "variant,layer,epe,vrmse\n");
  for (const auto& r : rows)
    std::fprintf(f, "%s,%d,%.9g,%.9g\n", r.variant.c_str(), r.layer, r.epe, r.vrmse);
  std::fclose(f);
}

EvalReport evaluate_estimate(const std::string& variant, const AMVState& estimate,
                             const AMVState& truth, const ObservationSet& obs) {
  EvalReport rep;
  const std::vector<double> e =
      epe(estimate.d, truth.d, truth.K, truth.shape, obs.mask0, obs.mask1);
  const std::vector<double> v =
      vrmse(estimate.w, truth.w, truth.K, truth.shape, obs.mask0, obs.mask1);
  for (int k = 0; k < truth.K; ++k)
    rep.rows.push_back({variant, k, e[k], v[k]});
  return rep;
}

EvalReport run_benchmark(const SyntheticDataset& ds, const std::vector<Variant>& variants,
                         const SolverConfig& cfg, const AdmmOptions& base_opts) {
  EvalReport rep;
  for (Variant variant : variants) {
    AdmmOptions opts = base_opts;
    opts.variant = variant;
    const auto t0 = std::chrono::steady_clock::now();
    const AdmmResult res = run_variant(ds.obs, ds.grid, cfg, opts);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string name = variant_name(variant);
    rep.runtime_seconds[name] = secs;
    EvalReport one = evaluate_estimate(name, res.state, ds.truth, ds.obs);
    rep.rows.insert(rep.rows.end(), one.rows.begin(), one.rows.end());
  }
  return rep;
}

}  // namespace amv
