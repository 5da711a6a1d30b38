#include "amv/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace amv {

namespace {

using nlohmann::json;

void put_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  if (std::fwrite(b, 1, 4, f) != 4) throw IoError("short write");
}

std::uint32_t get_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw IoError("short read");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::FILE* f, const double* data, std::size_t n) {
  std::vector<float> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(data[i]);
  static_assert(sizeof(float) == 4);
  if (std::fwrite(buf.data(), 4, n, f) != n) throw IoError("short write");
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open(const std::string& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path);
  return f;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  in >> j;
  return j;
}

std::vector<double> broadcast(const json& j, const char* key, int K,
                              const std::vector<double>& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.assign(K, v.get<double>());
  } else {
    out = v.get<std::vector<double>>();
    if (out.size() != static_cast<std::size_t>(K))
      throw InvalidSpec(std::string(key) + " must be scalar or K entries");
  }
  return out;
}

}  // namespace

void write_field(const std::string& path, std::uint32_t layers, std::uint32_t channels,
                 std::uint32_t rows, std::uint32_t cols, const double* data) {
  File f = open(path, "wb");
  if (std::fwrite("AMV1", 1, 4, f.get()) != 4) throw IoError("short write");
  put_u32(f.get(), layers);
  put_u32(f.get(), channels);
  put_u32(f.get(), rows);
  put_u32(f.get(), cols);
  put_f32(f.get(), data, static_cast<std::size_t>(layers) * channels * rows * cols);
}

std::vector<double> read_field(const std::string& path, std::uint32_t* layers,
                               std::uint32_t* channels, std::uint32_t* rows,
                               std::uint32_t* cols) {
  File f = open(path, "rb");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "AMV1", 4) != 0)
    throw IoError(path + " is not an AMV1 field file");
  *layers = get_u32(f.get());
  *channels = get_u32(f.get());
  *rows = get_u32(f.get());
  *cols = get_u32(f.get());
  const std::size_t n = static_cast<std::size_t>(*layers) * *channels * *rows * *cols;
  std::vector<float> buf(n);
  if (std::fread(buf.data(), 4, n, f.get()) != n) throw IoError("short read in " + path);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i];
  return out;
}

void write_mask(const std::string& path, std::uint32_t layers, std::uint32_t rows,
                std::uint32_t cols, const std::uint8_t* data) {
  File f = open(path, "wb");
  if (std::fwrite("AMSK", 1, 4, f.get()) != 4) throw IoError("short write");
  put_u32(f.get(), layers);
  put_u32(f.get(), rows);
  put_u32(f.get(), cols);
  const std::size_t n = static_cast<std::size_t>(layers) * rows * cols;
  if (std::fwrite(data, 1, n, f.get()) != n) throw IoError("short write");
}

std::vector<std::uint8_t> read_mask(const std::string& path, std::uint32_t* layers,
                                    std::uint32_t* rows, std::uint32_t* cols) {
  File f = open(path, "rb");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "AMSK", 4) != 0)
    throw IoError(path + " is not an AMSK mask file");
  *layers = get_u32(f.get());
  *rows = get_u32(f.get());
  *cols = get_u32(f.get());
  const std::size_t n = static_cast<std::size_t>(*layers) * *rows * *cols;
  std::vector<std::uint8_t> out(n);
  if (std::fread(out.data(), 1, n, f.get()) != n) throw IoError("short read in " + path);
  return out;
}

void save_dataset(const std::string& dir, const SyntheticDataset& ds, const SyntheticSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int K = ds.grid.K();
  const std::uint32_t r = ds.shape.rows, c = ds.shape.cols;

  // masked sentinel values are NaN; store zeros instead so files stay clean
  auto sanitized = [&](const std::vector<double>& y, const std::vector<std::uint8_t>& mask) {
    std::vector<double> out = y;
    const int m = ds.shape.m();
    for (int k = 0; k < K; ++k)
      for (int ch = 0; ch < 3; ++ch)
        for (int j = 0; j < m; ++j)
          if (!mask[static_cast<std::size_t>(k) * m + j])
            out[(static_cast<std::size_t>(k) * 3 + ch) * m + j] = 0.0;
    return out;
  };
  write_field(dir + "/y0.amv1", K, 3, r, c, sanitized(ds.obs.y0, ds.obs.mask0).data());
  write_field(dir + "/y1.amv1", K, 3, r, c, sanitized(ds.obs.y1, ds.obs.mask1).data());
  write_mask(dir + "/mask0.amsk", K, r, c, ds.obs.mask0.data());
  write_mask(dir + "/mask1.amsk", K, r, c, ds.obs.mask1.data());
  write_field(dir + "/truth_d.amv1", K, 2, r, c, ds.truth.d.data());
  write_field(dir + "/truth_w.amv1", K + 1, 1, r, c, ds.truth.w.data());
  write_field(dir + "/levels.amv1", 1, 1, 1, K + 1, ds.grid.levels.data());
  write_field(dir + "/gamma.amv1", K + 1, 3, 1, 1, ds.gamma.gamma.data());

  json manifest;
  manifest["y0"] = "y0.amv1";
  manifest["y1"] = "y1.amv1";
  manifest["mask0"] = "mask0.amsk";
  manifest["mask1"] = "mask1.amsk";
  manifest["truth_d"] = "truth_d.amv1";
  manifest["truth_w"] = "truth_w.amv1";
  manifest["levels"] = "levels.amv1";
  manifest["gamma"] = "gamma.amv1";
  manifest["rows"] = r;
  manifest["cols"] = c;
  manifest["layers"] = K;
  manifest["sigma_obs"] = spec.sigma_obs;
  manifest["seed"] = spec.seed;
  std::ofstream out(dir + "/manifest.json");
  out << manifest.dump(2) << "\n";
}

LoadedDataset load_dataset(const std::string& dir) {
  const json manifest = read_json(dir + "/manifest.json");
  LoadedDataset ds;
  std::uint32_t layers, channels, rows, cols;

  const std::vector<double> levels =
      read_field(dir + "/" + manifest.at("levels").get<std::string>(), &layers, &channels, &rows,
                 &cols);
  ds.grid = build_pressure_grid(levels);
  const int K = ds.grid.K();

  const std::vector<double> y0 = read_field(
      dir + "/" + manifest.at("y0").get<std::string>(), &layers, &channels, &rows, &cols);
  if (layers != static_cast<std::uint32_t>(K) || channels != 3)
    throw IoError("y0 layer/channel mismatch with levels");
  ds.shape = GridShape(static_cast<int>(rows), static_cast<int>(cols));
  const std::vector<double> y1 = read_field(
      dir + "/" + manifest.at("y1").get<std::string>(), &layers, &channels, &rows, &cols);

  std::uint32_t ml, mr, mc;
  const std::vector<std::uint8_t> mask0 =
      read_mask(dir + "/" + manifest.at("mask0").get<std::string>(), &ml, &mr, &mc);
  const std::vector<std::uint8_t> mask1 =
      read_mask(dir + "/" + manifest.at("mask1").get<std::string>(), &ml, &mr, &mc);
  if (mask0.size() != static_cast<std::size_t>(K) * ds.shape.m())
    throw IoError("mask size mismatch");

  ds.obs = ObservationSet(K, ds.shape);
  ds.obs.y0 = y0;
  ds.obs.y1 = y1;
  ds.obs.mask0 = mask0;
  ds.obs.mask1 = mask1;
  ds.obs.sigma_obs = manifest.value("sigma_obs", 0.0);
  ds.sigma_obs = ds.obs.sigma_obs;
  ds.seed = manifest.value("seed", 0ULL);
  const int m = ds.shape.m();
  for (int k = 0; k < K; ++k)
    for (int ch = 0; ch < 3; ++ch)
      for (int j = 0; j < m; ++j) {
        if (!ds.obs.mask0[static_cast<std::size_t>(k) * m + j])
          ds.obs.y0[(static_cast<std::size_t>(k) * 3 + ch) * m + j] = kMaskedSentinel;
        if (!ds.obs.mask1[static_cast<std::size_t>(k) * m + j])
          ds.obs.y1[(static_cast<std::size_t>(k) * 3 + ch) * m + j] = kMaskedSentinel;
      }

  const std::vector<double> g = read_field(
      dir + "/" + manifest.at("gamma").get<std::string>(), &layers, &channels, &rows, &cols);
  if (layers != static_cast<std::uint32_t>(K + 1) || channels != 3)
    throw IoError("gamma must be (K+1) x 3");
  ds.gamma = PhysicsConstants(K);
  ds.gamma.gamma = g;

  if (manifest.contains("truth_d"))
    ds.truth_d = read_field(dir + "/" + manifest.at("truth_d").get<std::string>(), &layers,
                            &channels, &rows, &cols);
  if (manifest.contains("truth_w"))
    ds.truth_w = read_field(dir + "/" + manifest.at("truth_w").get<std::string>(), &layers,
                            &channels, &rows, &cols);
  return ds;
}

void save_estimate(const std::string& dir, const std::string& variant, const AMVState& estimate,
                   const AdmmTrace& trace) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int K = estimate.K;
  const std::uint32_t r = estimate.shape.rows, c = estimate.shape.cols;
  write_field(dir + "/d_hat.amv1", K, 2, r, c, estimate.d.data());
  write_field(dir + "/w_hat.amv1", K + 1, 1, r, c, estimate.w.data());

  const WaveletBasis basis(estimate.shape);
  std::vector<double> x1(static_cast<std::size_t>(K) * 3 * estimate.shape.m());
  for (int k = 0; k < K; ++k)
    for (int ch = 0; ch < 3; ++ch)
      iwt2(estimate.c_layer(k, ch), basis,
           x1.data() + (static_cast<std::size_t>(k) * 3 + ch) * estimate.shape.m());
  write_field(dir + "/x1_hat.amv1", K, 3, r, c, x1.data());

  trace.write_csv(dir + "/trace.csv");
  json meta;
  meta["variant"] = variant;
  meta["iterations"] = trace.records.size();
  meta["converged"] = trace.converged;
  std::ofstream out(dir + "/estimate.json");
  out << meta.dump(2) << "\n";
}

AMVState load_estimate(const std::string& dir, std::string* variant) {
  const json meta = read_json(dir + "/estimate.json");
  if (variant) *variant = meta.value("variant", "?");
  std::uint32_t layers, channels, rows, cols;
  const std::vector<double> d = read_field(dir + "/d_hat.amv1", &layers, &channels, &rows, &cols);
  const int K = static_cast<int>(layers);
  AMVState s(K, GridShape(static_cast<int>(rows), static_cast<int>(cols)));
  s.d = d;
  const std::vector<double> w = read_field(dir + "/w_hat.amv1", &layers, &channels, &rows, &cols);
  if (layers != static_cast<std::uint32_t>(K + 1)) throw IoError("w_hat must have K+1 levels");
  s.w = w;
  std::uint32_t xl, xc, xr, xcc;
  const std::vector<double> x1 = read_field(dir + "/x1_hat.amv1", &xl, &xc, &xr, &xcc);
  const WaveletBasis basis(s.shape);
  for (int k = 0; k < K; ++k)
    for (int ch = 0; ch < 3; ++ch)
      fwt2(x1.data() + (static_cast<std::size_t>(k) * 3 + ch) * s.shape.m(), basis,
           s.c_layer(k, ch));
  return s;
}

void load_config(const std::string& path, int K, SolverConfig* cfg, AdmmOptions* opts) {
  const json j = read_json(path);
  cfg->alpha_d = broadcast(j, "alpha_d", K, cfg->alpha_d);
  cfg->alpha_x = broadcast(j, "alpha_x", K, cfg->alpha_x);
  cfg->rho = j.value("rho", cfg->rho);
  cfg->tikhonov = j.value("tikhonov", cfg->tikhonov);
  cfg->standardize = j.value("standardize", cfg->standardize);
  cfg->init_from_obs = j.value("init_from_obs", cfg->init_from_obs);
  cfg->inner.max_iterations = j.value("inner_iterations", cfg->inner.max_iterations);
  cfg->inner.g_tol_rel = j.value("g_tol_rel", cfg->inner.g_tol_rel);
  cfg->inner.memory = j.value("memory", cfg->inner.memory);
  if (j.contains("stages")) {
    // stage count for the default coarse-to-fine schedule (built per grid)
    cfg->schedule.active_bands.clear();
    cfg->schedule_stages = j.at("stages").get<int>();
  }
  if (j.contains("gamma")) {
    const auto g = j.at("gamma").get<std::vector<std::vector<double>>>();
    if (g.size() != static_cast<std::size_t>(K + 1))
      throw InvalidSpec("gamma must have K+1 rows");
    cfg->gamma = PhysicsConstants(K);
    for (int b = 0; b <= K; ++b)
      for (int ch = 0; ch < 3; ++ch) cfg->gamma.at(b, ch) = g[b].at(ch);
  }
  opts->max_outer = j.value("outer_iterations", opts->max_outer);
  opts->eps_pri = j.value("eps_pri", opts->eps_pri);
  opts->eps_dual = j.value("eps_dual", opts->eps_dual);
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "split")
      opts->mode = AdmmMode::Split;
    else if (mode == "joint")
      opts->mode = AdmmMode::Joint;
    else
      throw InvalidSpec("mode must be split or joint");
  }
}

}  // namespace amv
