#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lgn/error.hpp"
#include "lgn/model.hpp"
#include "lgn/train.hpp"

// Checkpoint container: the 8-byte magic "LGNCKPT1", a little-endian u64
// byte length, that many bytes of key=value metadata text (one pair per
// line, fixed key order, reals in C hexfloat so they reload exactly), then
// raw little-endian payload sections in a fixed order:
//
//   per layer:  cand_a, cand_b (u32; only when the layer is not dense),
//               w_g, w_a, w_b (f32)
//   optimizer:  m then v, same per-layer block order as the weights (f32)
//
// save -> load -> save is byte-identical, and resuming training from a
// loaded state continues bit-exactly: the shuffle order of epoch e is
// derived from (seed, e), not from live RNG state.

namespace lgn {

namespace detail {

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char(uint8_t(v >> (8 * i))));
}

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char(uint8_t(v >> (8 * i))));
}

inline void put_f32(std::string& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

inline std::string hexfloat(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

struct ByteReader {
  const uint8_t* p;
  size_t len;
  size_t pos = 0;

  void need(size_t n) const {
    if (len - pos < n) throw DataError("checkpoint: truncated payload");
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
};

}  // namespace detail

struct CheckpointMeta {
  uint64_t seed = 0;
  std::string provenance;  // free-form dataset description (single line)
};

template <typename Fn>
void for_each_weight_block(SoftNetwork<float>& net, OptimizerState<float>& opt, Fn&& fn) {
  for (size_t l = 0; l < net.layers.size(); ++l) {
    fn(net.layers[l].w_g);
    fn(net.layers[l].conn.w_a);
    fn(net.layers[l].conn.w_b);
  }
  for (auto* moments : {&opt.m, &opt.v})
    for (size_t l = 0; l < net.layers.size(); ++l) {
      fn(moments->layers[l].w_g);
      fn(moments->layers[l].w_a);
      fn(moments->layers[l].w_b);
    }
}

inline std::string serialize_checkpoint(TrainState<float>& state, const CheckpointMeta& meta) {
  SoftNetwork<float>& net = state.net;
  if (state.opt.m.layers.empty()) state.opt.resize(net);

  std::string md;
  auto kv = [&md](const std::string& k, const std::string& v) { md += k + "=" + v + "\n"; };
  kv("input_width", std::to_string(net.input_width));
  kv("n_classes", std::to_string(net.n_classes));
  kv("head_tau", detail::hexfloat(double(net.head_tau)));
  kv("layers", std::to_string(net.layers.size()));
  for (size_t l = 0; l < net.layers.size(); ++l) {
    std::string sl = std::to_string(l);
    kv("width." + sl, std::to_string(net.layers[l].width));
    kv("nc." + sl, std::to_string(net.layers[l].conn.n_candidates));
    kv("full." + sl, net.layers[l].conn.full ? "1" : "0");
  }
  kv("epochs_done", std::to_string(state.epochs_done));
  kv("opt_step", std::to_string(state.opt.step));
  kv("t_g", detail::hexfloat(net.layers.empty() ? 1.0 : double(net.layers[0].t_g)));
  kv("t_c", detail::hexfloat(net.layers.empty() ? 1.0 : double(net.layers[0].conn.t_c)));
  kv("seed", std::to_string(meta.seed));
  std::string prov = meta.provenance;
  for (char& c : prov)
    if (c == '\n' || c == '\r') c = ' ';
  kv("provenance", prov);

  std::string out = "LGNCKPT1";
  detail::put_u64(out, md.size());
  out += md;
  for (const auto& layer : net.layers)
    if (!layer.conn.full) {
      for (uint32_t c : layer.conn.cand_a) detail::put_u32(out, c);
      for (uint32_t c : layer.conn.cand_b) detail::put_u32(out, c);
    }
  for_each_weight_block(net, state.opt, [&out](std::vector<float>& block) {
    for (float f : block) detail::put_f32(out, f);
  });
  return out;
}

inline void save_checkpoint(const std::string& path, TrainState<float>& state,
                            const CheckpointMeta& meta) {
  std::string bytes = serialize_checkpoint(state, meta);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path);
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw DataError("short write to checkpoint " + path);
}

inline std::pair<TrainState<float>, CheckpointMeta> parse_checkpoint(const uint8_t* bytes,
                                                                     size_t len) {
  if (len < 8 || std::memcmp(bytes, "LGNCKPT", 7) != 0)
    throw DataError("checkpoint: bad magic (not a checkpoint file)");
  if (bytes[7] != '1')
    throw DataError(std::string("checkpoint: unsupported version '") + char(bytes[7]) + "'");
  detail::ByteReader r{bytes, len, 8};
  uint64_t md_len = r.u64();
  r.need(md_len);
  std::string md(reinterpret_cast<const char*>(bytes + r.pos), md_len);
  r.pos += md_len;

  std::map<std::string, std::string> kv;
  size_t start = 0;
  while (start < md.size()) {
    size_t nl = md.find('\n', start);
    if (nl == std::string::npos) nl = md.size();
    std::string line = md.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint: malformed metadata line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&kv](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw DataError("checkpoint: missing metadata key '" + k + "'");
    return it->second;
  };
  auto get_long = [&](const std::string& k) {
    try {
      return std::stol(get(k));
    } catch (const std::exception&) {
      throw DataError("checkpoint: bad integer for key '" + k + "'");
    }
  };
  auto get_real = [&](const std::string& k) {
    const std::string& s = get(k);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw DataError("checkpoint: bad real for key '" + k + "'");
    return v;
  };

  TrainState<float> state;
  SoftNetwork<float>& net = state.net;
  net.input_width = int(get_long("input_width"));
  net.n_classes = int(get_long("n_classes"));
  net.head_tau = float(get_real("head_tau"));
  long n_layers = get_long("layers");
  if (net.input_width <= 0 || net.n_classes <= 0 || n_layers < 0)
    throw DataError("checkpoint: implausible architecture metadata");
  int prev = net.input_width;
  for (long l = 0; l < n_layers; ++l) {
    std::string sl = std::to_string(l);
    SoftLayer<float> layer;
    layer.width = int(get_long("width." + sl));
    layer.prev_width = prev;
    layer.conn.n_candidates = int(get_long("nc." + sl));
    layer.conn.full = get("full." + sl) == "1";
    if (layer.width <= 0 || layer.conn.n_candidates <= 0 || layer.conn.n_candidates > prev)
      throw DataError("checkpoint: implausible layer " + sl + " shape");
    if (layer.conn.full && layer.conn.n_candidates != prev)
      throw DataError("checkpoint: dense layer " + sl + " with nc != fan-in");
    prev = layer.width;
    net.layers.push_back(std::move(layer));
  }
  state.epochs_done = int(get_long("epochs_done"));
  state.opt.step = get_long("opt_step");
  double t_g = get_real("t_g"), t_c = get_real("t_c");
  CheckpointMeta meta;
  meta.seed = uint64_t(get_long("seed"));
  meta.provenance = get("provenance");

  for (auto& layer : net.layers) {
    size_t w = size_t(layer.width), nc = size_t(layer.conn.n_candidates);
    if (!layer.conn.full) {
      layer.conn.cand_a.resize(w * nc);
      layer.conn.cand_b.resize(w * nc);
      for (auto* lst : {&layer.conn.cand_a, &layer.conn.cand_b})
        for (auto& c : *lst) {
          c = r.u32();
          if (c >= uint32_t(layer.prev_width))
            throw DataError("checkpoint: candidate index beyond fan-in");
        }
    }
    layer.w_g.resize(w * kNumOps);
    layer.conn.w_a.resize(w * nc);
    layer.conn.w_b.resize(w * nc);
  }
  state.opt.m.resize(net);
  state.opt.v.resize(net);
  for_each_weight_block(net, state.opt, [&r](std::vector<float>& block) {
    for (float& f : block) f = r.f32();
  });
  if (r.pos != r.len) throw DataError("checkpoint: trailing bytes after payload");
  set_temperatures(net, t_g, t_c);
  return {std::move(state), std::move(meta)};
}

inline std::pair<TrainState<float>, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes.data(), bytes.size());
}

}  // namespace lgn
