#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lgn/data.hpp"
#include "lgn/error.hpp"
#include "lgn/model.hpp"
#include "lgn/train.hpp"

// Flat key=value run configuration. '#' starts a comment, blank lines are
// skipped, later assignments win (command-line --set overrides are applied
// as extra assignments). Unknown keys are rejected so typos fail loudly.

namespace lgn {

struct RunConfig {
  // dataset
  std::string dataset = "yinyang";  // yinyang | mnist | fashion
  int data_classes = 3;
  int data_train_n = 200000;
  int data_test_n = 10000;
  double data_r_small = 0.1;
  double data_r_big = 0.5;
  std::string data_encoding = "binary";  // binary | thermometer
  int data_bits_per_coord = 12;
  std::string data_dir;  // IDX directory for mnist/fashion; empty -> env/default
  std::vector<double> data_thresholds;  // binarization; empty -> per-dataset default

  // architecture
  std::vector<int> arch_widths;
  std::vector<int> arch_nc;
  double arch_head_tau = 0;  // 0 -> group_size / 10
  double arch_residual_weight = 5.0;
  bool arch_cover_inputs = true;

  // training
  TrainPlan plan;

  uint64_t seed = 1;

  // outputs
  std::string out_checkpoint;
  std::string out_metrics;

  Architecture architecture(int input_width, int n_classes) const {
    Architecture a;
    a.input_width = input_width;
    a.widths = arch_widths;
    a.n_candidates = arch_nc;
    a.n_classes = n_classes;
    a.head_tau = arch_head_tau;
    a.residual_weight = arch_residual_weight;
    a.cover_inputs = arch_cover_inputs;
    return a;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  size_t e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

struct ConfigValue {
  std::string key, raw;

  long as_int() const {
    try {
      size_t used = 0;
      long v = std::stol(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + raw + "' is not an integer");
    }
  }
  double as_real() const {
    try {
      size_t used = 0;
      double v = std::stod(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + raw + "' is not a number");
    }
  }
  bool as_bool() const {
    if (raw == "1" || raw == "true" || raw == "yes") return true;
    if (raw == "0" || raw == "false" || raw == "no") return false;
    throw ConfigError(key + ": '" + raw + "' is not a boolean");
  }
  template <typename T, typename Fn>
  std::vector<T> as_list(Fn&& one) const {
    std::vector<T> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
      ConfigValue v{key, trim(item)};
      out.push_back(one(v));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
  }
};

}  // namespace detail

inline void apply_config_pair(RunConfig& c, const std::string& key, const std::string& value) {
  detail::ConfigValue v{key, value};
  if (key == "dataset") {
    if (value != "yinyang" && value != "mnist" && value != "fashion")
      throw ConfigError("dataset: unknown dataset '" + value + "'");
    c.dataset = value;
  } else if (key == "data.classes") {
    c.data_classes = int(v.as_int());
  } else if (key == "data.train_n") {
    c.data_train_n = int(v.as_int());
  } else if (key == "data.test_n") {
    c.data_test_n = int(v.as_int());
  } else if (key == "data.r_small") {
    c.data_r_small = v.as_real();
  } else if (key == "data.r_big") {
    c.data_r_big = v.as_real();
  } else if (key == "data.encoding") {
    if (value != "binary" && value != "thermometer")
      throw ConfigError("data.encoding: unknown encoding '" + value + "'");
    c.data_encoding = value;
  } else if (key == "data.bits_per_coord") {
    c.data_bits_per_coord = int(v.as_int());
  } else if (key == "data.dir") {
    c.data_dir = value;
  } else if (key == "data.thresholds") {
    c.data_thresholds =
        v.as_list<double>([](const detail::ConfigValue& x) { return x.as_real(); });
  } else if (key == "arch.widths") {
    c.arch_widths = v.as_list<int>([](const detail::ConfigValue& x) { return int(x.as_int()); });
  } else if (key == "arch.nc") {
    c.arch_nc = v.as_list<int>([](const detail::ConfigValue& x) { return int(x.as_int()); });
  } else if (key == "arch.head_tau") {
    c.arch_head_tau = v.as_real();
  } else if (key == "arch.residual_weight") {
    c.arch_residual_weight = v.as_real();
  } else if (key == "arch.cover_inputs") {
    c.arch_cover_inputs = v.as_bool();
  } else if (key == "train.epochs") {
    c.plan.epochs = int(v.as_int());
  } else if (key == "train.lr") {
    c.plan.lr = v.as_real();
  } else if (key == "train.batch") {
    c.plan.batch_size = int(v.as_int());
  } else if (key == "train.optimizer") {
    if (value == "adam")
      c.plan.optimizer = Optimizer::kAdam;
    else if (value == "sgd")
      c.plan.optimizer = Optimizer::kSgd;
    else
      throw ConfigError("train.optimizer: unknown optimizer '" + value + "'");
  } else if (key == "train.beta1") {
    c.plan.beta1 = v.as_real();
  } else if (key == "train.beta2") {
    c.plan.beta2 = v.as_real();
  } else if (key == "train.eps") {
    c.plan.eps = v.as_real();
  } else if (key == "train.threads") {
    c.plan.threads = int(v.as_int());
  } else if (key == "train.tc.start") {
    c.plan.sched_c.t_start = v.as_real();
  } else if (key == "train.tc.end") {
    c.plan.sched_c.t_end = v.as_real();
  } else if (key == "train.tc.from") {
    c.plan.sched_c.epoch_start = int(v.as_int());
  } else if (key == "train.tc.to") {
    c.plan.sched_c.epoch_end = int(v.as_int());
  } else if (key == "train.tg.start") {
    c.plan.sched_g.t_start = v.as_real();
  } else if (key == "train.tg.end") {
    c.plan.sched_g.t_end = v.as_real();
  } else if (key == "train.tg.from") {
    c.plan.sched_g.epoch_start = int(v.as_int());
  } else if (key == "train.tg.to") {
    c.plan.sched_g.epoch_end = int(v.as_int());
  } else if (key == "seed") {
    c.seed = uint64_t(v.as_int());
  } else if (key == "out.checkpoint") {
    c.out_checkpoint = value;
  } else if (key == "out.metrics") {
    c.out_metrics = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

inline void apply_config_line(RunConfig& c, const std::string& line, int line_no) {
  std::string s = line;
  size_t hash = s.find('#');
  if (hash != std::string::npos) s = s.substr(0, hash);
  s = detail::trim(s);
  if (s.empty()) return;
  size_t eq = s.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
  std::string key = detail::trim(s.substr(0, eq));
  std::string value = detail::trim(s.substr(eq + 1));
  if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
  apply_config_pair(c, key, value);
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) apply_config_line(c, line, ++line_no);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return parse_config_text(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void validate_config(const RunConfig& c) {
  if (c.arch_widths.empty()) throw ConfigError("arch.widths: at least one layer required");
  if (c.arch_nc.size() != c.arch_widths.size())
    throw ConfigError("arch.nc: need one value per layer (" +
                      std::to_string(c.arch_widths.size()) + ")");
  if (c.dataset == "yinyang") {
    if (c.data_classes != 3 && c.data_classes != 4)
      throw ConfigError("data.classes: yinyang supports 3 or 4 classes");
    if (c.data_train_n <= 0 || c.data_test_n <= 0)
      throw ConfigError("data.train_n/test_n: must be positive");
    if (c.data_bits_per_coord < 1 || c.data_bits_per_coord > 32)
      throw ConfigError("data.bits_per_coord: must be in 1..32");
    if (!(c.data_r_small > 0) || !(c.data_r_big > c.data_r_small))
      throw ConfigError("data.r_small/r_big: need 0 < r_small < r_big");
  }
  for (double t : c.data_thresholds)
    if (!(t >= 0 && t <= 1)) throw ConfigError("data.thresholds: values must be in [0,1]");
  c.plan.validate();
}

}  // namespace lgn
