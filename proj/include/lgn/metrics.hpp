#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "lgn/error.hpp"
#include "lgn/train.hpp"

// Line-delimited JSON metrics. Every float is rendered with the same printf
// format, so a run with the same config and seed produces a byte-identical
// file; no locale, pointer, or timing data ever enters the stream.

namespace lgn {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out.push_back('\\');
      out.push_back(c);
    } else if (uint8_t(c) < 0x20) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\u%04x", c);
      out += buf;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

struct MetricsWriter {
  std::ofstream f;

  void open(const std::string& path) {
    f.open(path, std::ios::trunc);
    if (!f) throw DataError("cannot write metrics file " + path);
  }

  bool is_open() const { return f.is_open(); }

  // One header record describing the run.
  void run_info(const std::string& dataset, const std::vector<int>& widths,
                const std::vector<int>& nc, int n_classes, int epochs, double lr, int batch,
                uint64_t seed) {
    if (!f) return;
    f << "{\"record\":\"run\",\"dataset\":\"" << json_escape(dataset) << "\",\"widths\":[";
    for (size_t i = 0; i < widths.size(); ++i) f << (i ? "," : "") << widths[i];
    f << "],\"nc\":[";
    for (size_t i = 0; i < nc.size(); ++i) f << (i ? "," : "") << nc[i];
    f << "],\"classes\":" << n_classes << ",\"epochs\":" << epochs
      << ",\"lr\":" << format_real(lr) << ",\"batch\":" << batch << ",\"seed\":" << seed
      << "}\n";
    f.flush();
  }

  void epoch(const EpochMetrics& m) {
    if (!f) return;
    f << "{\"record\":\"epoch\",\"epoch\":" << m.epoch << ",\"train_loss\":"
      << format_real(m.train_loss) << ",\"train_acc\":" << format_real(m.train_accuracy)
      << ",\"test_acc\":" << format_real(m.test_accuracy)
      << ",\"test_acc_hard\":" << format_real(m.test_accuracy_hard)
      << ",\"agreement\":" << format_real(m.agreement) << ",\"t_c\":" << format_real(m.t_c)
      << ",\"t_g\":" << format_real(m.t_g) << "}\n";
    f.flush();
  }
};

}  // namespace lgn
