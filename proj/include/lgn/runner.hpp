#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "lgn/config.hpp"
#include "lgn/data.hpp"
#include "lgn/fetch.hpp"
#include "lgn/metrics.hpp"
#include "lgn/rng.hpp"

// Shared run assembly: turning a RunConfig into datasets. Both the CLI and
// the acceptance harness go through these helpers so a recipe means the
// same thing everywhere.

namespace lgn {

// One run seed feeds independent streams so that changing e.g. the shuffle
// never perturbs the dataset.
constexpr uint64_t kSeedTrainData = 101;
constexpr uint64_t kSeedTestData = 202;
constexpr uint64_t kSeedNetwork = 303;
constexpr uint64_t kSeedShuffle = 404;

inline std::string data_root(const RunConfig& cfg) {
  if (!cfg.data_dir.empty()) return cfg.data_dir;
  if (const char* env = std::getenv("LGN_DATA_DIR")) return env;
  return "data";
}

inline std::string idx_path(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  std::string gz = dir + "/" + name;
  if (fs::exists(gz)) return gz;
  std::string raw = gz.substr(0, gz.size() - 3);  // drop ".gz"
  if (name.size() > 3 && name.substr(name.size() - 3) == ".gz" && fs::exists(raw)) return raw;
  return gz;  // let the loader report the missing file
}

inline CoordEncoding coord_encoding(const RunConfig& cfg) {
  return cfg.data_encoding == "thermometer" ? CoordEncoding::kThermometer
                                            : CoordEncoding::kBinary;
}

inline std::vector<double> effective_thresholds(const RunConfig& cfg) {
  if (!cfg.data_thresholds.empty()) return cfg.data_thresholds;
  if (cfg.dataset == "fashion") return {0.25, 0.5, 0.75};
  return {0.5};
}

inline BitDataset load_split(const RunConfig& cfg, uint64_t seed, bool train_split) {
  if (cfg.dataset == "yinyang") {
    int n = train_split ? cfg.data_train_n : cfg.data_test_n;
    uint64_t s = mix_seed(seed, train_split ? kSeedTrainData : kSeedTestData);
    auto pts = generate_yinyang(n, s, cfg.data_r_small, cfg.data_r_big, cfg.data_classes);
    BitDataset ds = yinyang_bits(pts, cfg.data_classes, cfg.data_bits_per_coord,
                                 coord_encoding(cfg));
    char prov[160];
    std::snprintf(prov, sizeof prov, "yinyang %s classes=%d n=%d seed=%llu bits=%d enc=%s",
                  train_split ? "train" : "test", cfg.data_classes, n,
                  static_cast<unsigned long long>(seed), cfg.data_bits_per_coord,
                  cfg.data_encoding.c_str());
    ds.provenance = prov;
    return ds;
  }

  std::string dir = data_root(cfg) + "/" + cfg.dataset;
  auto manifest = dataset_manifest(cfg.dataset);  // also rejects unknown names
  const DatasetFile& images = manifest[train_split ? 0 : 2];
  const DatasetFile& labels = manifest[train_split ? 1 : 3];
  IdxTensor img = load_idx_file(idx_path(dir, images.name));
  IdxTensor lab = load_idx_file(idx_path(dir, labels.name));
  std::vector<double> thresholds = effective_thresholds(cfg);
  BitDataset ds = binarize(img, lab, thresholds, 10);
  std::string prov = cfg.dataset + (train_split ? " train" : " test") + " thresholds=";
  for (size_t i = 0; i < thresholds.size(); ++i)
    prov += (i ? "," : "") + format_real(thresholds[i]);
  ds.provenance = prov;
  return ds;
}

inline RunConfig assemble_config(const std::string& path, const std::vector<std::string>& sets) {
  RunConfig cfg;
  if (!path.empty()) cfg = load_config(path);
  for (const std::string& kv : sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_config_pair(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace lgn
