#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "lgn/error.hpp"
#include "lgn/hardnet.hpp"
#include "lgn/rng.hpp"

namespace lgn {

// Binary inputs plus class labels, bit-packed per sample.
struct BitDataset {
  int input_width = 0;
  int n_classes = 0;
  std::vector<uint64_t> bits;  // [sample * words_per_sample + word]
  std::vector<uint8_t> labels;
  std::string provenance;  // source, encoding, thresholds, seed

  int n_samples() const { return int(labels.size()); }
  size_t words_per_sample() const { return size_t(input_width + 63) / 64; }

  void init(int n, int width, int classes) {
    input_width = width;
    n_classes = classes;
    labels.assign(size_t(n), 0);
    bits.assign(size_t(n) * (size_t(width + 63) / 64), 0);
  }

  bool bit(int sample, int i) const {
    return (bits[size_t(sample) * words_per_sample() + size_t(i) / 64] >> (i & 63)) & 1;
  }

  void set_bit(int sample, int i, bool v) {
    uint64_t& w = bits[size_t(sample) * words_per_sample() + size_t(i) / 64];
    uint64_t mask = uint64_t(1) << (i & 63);
    w = v ? (w | mask) : (w & ~mask);
  }

  template <typename T>
  void expand(int sample, T* out) const {
    for (int i = 0; i < input_width; ++i) out[i] = bit(sample, i) ? T(1) : T(0);
  }

  PackedBatch pack() const {
    PackedBatch b = PackedBatch::zeros(n_samples(), input_width);
    for (int s = 0; s < n_samples(); ++s)
      for (int i = 0; i < input_width; ++i)
        if (bit(s, i)) b.set_bit(s, i, true);
    return b;
  }
};

// ---------------------------------------------------------------------------
// Yin-yang toy dataset.
//
// Points are rejection-sampled uniformly inside a disc of radius r_big
// centered at (r_big, r_big) in the square [0, 2*r_big]^2. Two dots of
// radius r_small sit at (0.5*r_big, r_big) and (1.5*r_big, r_big); the S
// boundary between the two halves follows half-discs of radius r_big/2
// around the same centers. Classes:
//   3-class: 0 = yang, 1 = yin, 2 = both dots
//   4-class: 0 = yang, 1 = yin, 2 = dot inside yang, 3 = dot inside yin
// Class balance is enforced by drawing a target class uniformly and
// resampling until the point lands in it.

struct YinYangSample {
  double x = 0, y = 0;  // normalized to [0, 1)
  int cls = 0;
};

namespace detail {

inline int yinyang_class(double x, double y, double r_small, double r_big, int n_classes) {
  double dl = std::hypot(x - 0.5 * r_big, y - r_big);
  double dr = std::hypot(x - 1.5 * r_big, y - r_big);
  bool in_left_dot = dl < r_small;
  bool in_right_dot = dr < r_small;
  bool crit1 = dr <= r_small;                       // yin-colored dot in the yang half
  bool crit2 = dl > r_small && dl <= 0.5 * r_big;   // yin lobe bulging below the midline
  bool crit3 = y > r_big && dr > 0.5 * r_big;       // upper half minus the yang lobe
  bool is_yin = crit1 || crit2 || crit3;
  if (in_left_dot || in_right_dot) {
    if (n_classes == 3) return 2;
    return in_right_dot ? 2 : 3;  // right dot sits in yang, left dot in yin
  }
  return is_yin ? 1 : 0;
}

}  // namespace detail

inline std::vector<YinYangSample> generate_yinyang(int n, uint64_t seed, double r_small = 0.1,
                                                   double r_big = 0.5, int n_classes = 3) {
  if (n <= 0) throw ConfigError("yinyang: sample count must be positive");
  if (n_classes != 3 && n_classes != 4) throw ConfigError("yinyang: classes must be 3 or 4");
  std::mt19937 rng(uint32_t(splitmix64(seed)));
  std::vector<YinYangSample> out;
  out.reserve(size_t(n));
  double span = 2.0 * r_big;
  for (int i = 0; i < n; ++i) {
    int target = int(uniform_u32(rng, uint32_t(n_classes)));
    for (;;) {
      double x = uniform_real01(rng) * span;
      double y = uniform_real01(rng) * span;
      if (std::hypot(x - r_big, y - r_big) > r_big) continue;
      int cls = detail::yinyang_class(x, y, r_small, r_big, n_classes);
      if (cls != target) continue;
      out.push_back({x / span, y / span, cls});
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coordinate encoding: each normalized coordinate in [0,1) becomes
// bits_per_coord bits, x first then y.
//   binary:      fixed-point expansion of floor(v * 2^bits), MSB first
//   thermometer: bit j = v > (j+1)/(bits+1)

enum class CoordEncoding { kBinary, kThermometer };

inline void encode_coordinate(double v, int bits, CoordEncoding enc, std::vector<uint8_t>& out) {
  if (!(v >= 0.0 && v < 1.0)) throw DataError("coordinate " + std::to_string(v) + " outside [0,1)");
  if (enc == CoordEncoding::kBinary) {
    auto q = uint64_t(v * double(uint64_t(1) << bits));
    for (int j = bits - 1; j >= 0; --j) out.push_back(uint8_t((q >> j) & 1));
  } else {
    for (int j = 0; j < bits; ++j) out.push_back(v > double(j + 1) / double(bits + 1) ? 1 : 0);
  }
}

inline std::vector<uint8_t> encode_coordinates(double x, double y, int bits_per_coord = 12,
                                               CoordEncoding enc = CoordEncoding::kBinary) {
  std::vector<uint8_t> out;
  out.reserve(size_t(2 * bits_per_coord));
  encode_coordinate(x, bits_per_coord, enc, out);
  encode_coordinate(y, bits_per_coord, enc, out);
  return out;
}

inline BitDataset yinyang_bits(const std::vector<YinYangSample>& samples, int n_classes,
                               int bits_per_coord = 12,
                               CoordEncoding enc = CoordEncoding::kBinary) {
  BitDataset ds;
  ds.init(int(samples.size()), 2 * bits_per_coord, n_classes);
  for (size_t s = 0; s < samples.size(); ++s) {
    auto bits = encode_coordinates(samples[s].x, samples[s].y, bits_per_coord, enc);
    for (size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) ds.set_bit(int(s), int(i), true);
    ds.labels[s] = uint8_t(samples[s].cls);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// IDX container (the MNIST distribution format): two zero bytes, a dtype
// code, the dimension count, big-endian 32-bit dimension sizes, raw payload.

struct IdxTensor {
  std::vector<uint32_t> dims;
  std::vector<uint8_t> data;  // row-major unsigned bytes

  size_t items() const { return dims.empty() ? 0 : dims[0]; }
  size_t item_size() const {
    size_t s = 1;
    for (size_t i = 1; i < dims.size(); ++i) s *= dims[i];
    return s;
  }
};

inline IdxTensor parse_idx(const uint8_t* bytes, size_t len) {
  if (len < 4) throw DataError("idx: truncated header");
  if (bytes[0] != 0 || bytes[1] != 0)
    throw DataError("idx: bad magic bytes");
  if (bytes[2] != 0x08) throw DataError("idx: unsupported dtype code (want unsigned byte 0x08)");
  uint32_t n_dims = bytes[3];
  if (n_dims == 0 || n_dims > 8) throw DataError("idx: implausible dimension count");
  if (len < 4 + 4 * size_t(n_dims)) throw DataError("idx: truncated dimension list");
  IdxTensor t;
  uint64_t total = 1;
  for (uint32_t d = 0; d < n_dims; ++d) {
    const uint8_t* p = bytes + 4 + 4 * d;
    uint32_t v = uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | uint32_t(p[3]);
    t.dims.push_back(v);
    total *= v;
    if (total > (uint64_t(1) << 33)) throw DataError("idx: dimension product overflows sane bounds");
  }
  size_t offset = 4 + 4 * size_t(n_dims);
  if (len - offset < total) throw DataError("idx: truncated payload");
  t.data.assign(bytes + offset, bytes + offset + total);
  return t;
}

inline IdxTensor parse_idx(const std::vector<uint8_t>& bytes) {
  return parse_idx(bytes.data(), bytes.size());
}

// Reads a file, transparently gunzipping a gzip stream (magic 1f 8b).
inline std::vector<uint8_t> read_maybe_gzip(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 2 || raw[0] != 0x1f || raw[1] != 0x8b) return raw;

  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw DataError("zlib init failed");
  std::vector<uint8_t> out;
  out.resize(std::max<size_t>(raw.size() * 4, 1 << 20));
  zs.next_in = raw.data();
  zs.avail_in = uInt(raw.size());
  size_t written = 0;
  int rc;
  do {
    if (written == out.size()) out.resize(out.size() * 2);
    zs.next_out = out.data() + written;
    zs.avail_out = uInt(out.size() - written);
    rc = inflate(&zs, Z_NO_FLUSH);
    written = out.size() - zs.avail_out;
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("gzip decompression failed for " + path);
    }
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  out.resize(std::min(written, out.size()));  // min() is an identity; it keeps
                                              // the bound visible to the compiler
  return out;
}

inline IdxTensor load_idx_file(const std::string& path) {
  auto bytes = read_maybe_gzip(path);
  try {
    return parse_idx(bytes);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Threshold binarization. Pixels are normalized by 255; output bit
// (pixel p, threshold t) = pixel/255 > thresholds[t], laid out p-major.
// Multiple thresholds form a thermometer code per pixel.

inline BitDataset binarize(const IdxTensor& images, const IdxTensor& labels,
                           const std::vector<double>& thresholds, int n_classes) {
  if (thresholds.empty()) throw ConfigError("binarize: need at least one threshold");
  for (size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] <= thresholds[i - 1])
      throw ConfigError("binarize: thresholds must be strictly increasing");
  if (images.items() != labels.items())
    throw DataError("binarize: image and label counts differ");
  int n = int(images.items());
  int pixels = int(images.item_size());
  int nt = int(thresholds.size());
  BitDataset ds;
  ds.init(n, pixels * nt, n_classes);
  for (int s = 0; s < n; ++s) {
    const uint8_t* img = images.data.data() + size_t(s) * pixels;
    for (int p = 0; p < pixels; ++p) {
      double v = img[p] / 255.0;
      for (int t = 0; t < nt; ++t)
        if (v > thresholds[size_t(t)]) ds.set_bit(s, p * nt + t, true);
    }
    uint8_t lab = labels.data[size_t(s)];
    if (lab >= n_classes) throw DataError("binarize: label " + std::to_string(int(lab)) +
                                          " >= " + std::to_string(n_classes) + " classes");
    ds.labels[size_t(s)] = lab;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// IDX writing (used by gen-yinyang so the toy set round-trips through the
// same loader as MNIST).

inline void write_idx_file(const std::string& path, const std::vector<uint32_t>& dims,
                           const std::vector<uint8_t>& payload) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  uint8_t header[4] = {0, 0, 0x08, uint8_t(dims.size())};
  f.write(reinterpret_cast<const char*>(header), 4);
  for (uint32_t d : dims) {
    uint8_t be[4] = {uint8_t(d >> 24), uint8_t(d >> 16), uint8_t(d >> 8), uint8_t(d)};
    f.write(reinterpret_cast<const char*>(be), 4);
  }
  f.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
  if (!f) throw DataError("short write to " + path);
}

}  // namespace lgn
