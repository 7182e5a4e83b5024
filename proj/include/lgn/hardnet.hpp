#pragma once

#include <cstdint>
#include <vector>

#include "lgn/error.hpp"
#include "lgn/gates.hpp"
#include "lgn/model.hpp"
#include "lgn/softmax.hpp"

// The discretized network: one operator and two source wires per gate,
// evaluated 64 samples at a time with bitwise ops. Class scores are
// population counts over per-class groups of last-layer gates plus a
// constant offset that netlist optimization may fold in.

namespace lgn {

struct HardGate {
  uint8_t op = 0;
  uint32_t src_a = 0;  // index into previous layer (or inputs for layer 0)
  uint32_t src_b = 0;
};

struct HardNetwork {
  int input_width = 0;
  int n_classes = 0;
  std::vector<std::vector<HardGate>> layers;
  std::vector<std::vector<uint32_t>> groups;  // per class: last-layer gate indices
  std::vector<uint32_t> group_offsets;        // per class: folded constant score

  size_t gate_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.size();
    return n;
  }
};

// Argmax selection of operators and connections; ties go to the lowest index.
// Scaling any weight row by a positive constant leaves the result unchanged.
template <typename T>
HardNetwork discretize(const SoftNetwork<T>& net) {
  HardNetwork hard;
  hard.input_width = net.input_width;
  hard.n_classes = net.n_classes;
  hard.layers.reserve(net.layers.size());
  for (const SoftLayer<T>& layer : net.layers) {
    std::vector<HardGate> gates(size_t(layer.width));
    size_t nc = size_t(layer.conn.n_candidates);
    for (size_t k = 0; k < size_t(layer.width); ++k) {
      HardGate& g = gates[k];
      g.op = uint8_t(argmax_row(layer.w_g.data() + k * kNumOps, kNumOps));
      g.src_a = layer.conn.source_a(int(k), int(argmax_row(layer.conn.w_a.data() + k * nc, nc)));
      g.src_b = layer.conn.source_b(int(k), int(argmax_row(layer.conn.w_b.data() + k * nc, nc)));
    }
    hard.layers.push_back(std::move(gates));
  }
  int gs = net.group_size();
  hard.groups.resize(size_t(net.n_classes));
  hard.group_offsets.assign(size_t(net.n_classes), 0);
  for (int c = 0; c < net.n_classes; ++c)
    for (int k = c * gs; k < (c + 1) * gs; ++k) hard.groups[size_t(c)].push_back(uint32_t(k));
  return hard;
}

// One sample per bit lane; words laid out as [block][bit], block = sample/64.
struct PackedBatch {
  int n_samples = 0;
  int width = 0;
  std::vector<uint64_t> words;

  int blocks() const { return (n_samples + 63) / 64; }

  static PackedBatch zeros(int n_samples, int width) {
    PackedBatch b;
    b.n_samples = n_samples;
    b.width = width;
    b.words.assign(size_t((n_samples + 63) / 64) * size_t(width), 0);
    return b;
  }

  void set_bit(int sample, int bit, bool value) {
    size_t idx = size_t(sample / 64) * width + size_t(bit);
    uint64_t mask = uint64_t(1) << (sample & 63);
    if (value)
      words[idx] |= mask;
    else
      words[idx] &= ~mask;
  }

  bool bit(int sample, int bit) const {
    return (words[size_t(sample / 64) * width + size_t(bit)] >> (sample & 63)) & 1;
  }
};

// Evaluates the whole batch with word-wide bitwise logic and returns the
// predicted class per sample (argmax of group popcount, lowest class wins
// ties). Exactly equals per-sample boolean evaluation.
inline std::vector<int> eval_hard(const HardNetwork& net, const PackedBatch& batch) {
  if (batch.width != net.input_width)
    throw ShapeError("eval_hard: batch width " + std::to_string(batch.width) + " != " +
                     std::to_string(net.input_width));
  std::vector<int> predictions(size_t(batch.n_samples));
  size_t max_width = size_t(net.input_width);
  for (const auto& l : net.layers) max_width = std::max(max_width, l.size());
  std::vector<uint64_t> prev(max_width), cur(max_width);
  std::vector<uint32_t> scores(size_t(net.n_classes) * 64);

  for (int blk = 0; blk < batch.blocks(); ++blk) {
    const uint64_t* in = batch.words.data() + size_t(blk) * batch.width;
    std::copy(in, in + batch.width, prev.begin());
    for (const auto& layer : net.layers) {
      for (size_t k = 0; k < layer.size(); ++k)
        cur[k] = eval_word(layer[k].op, prev[layer[k].src_a], prev[layer[k].src_b]);
      std::swap(prev, cur);
    }
    std::fill(scores.begin(), scores.end(), 0);
    for (int c = 0; c < net.n_classes; ++c) {
      uint32_t* s = scores.data() + size_t(c) * 64;
      for (uint32_t member : net.groups[size_t(c)]) {
        uint64_t w = prev[member];
        while (w) {
          int lane = __builtin_ctzll(w);
          w &= w - 1;
          s[lane]++;
        }
      }
    }
    int lanes = std::min(64, batch.n_samples - blk * 64);
    for (int lane = 0; lane < lanes; ++lane) {
      int best = 0;
      uint32_t best_score = net.group_offsets[0] + scores[size_t(lane)];
      for (int c = 1; c < net.n_classes; ++c) {
        uint32_t sc = net.group_offsets[size_t(c)] + scores[size_t(c) * 64 + lane];
        if (sc > best_score) {
          best = c;
          best_score = sc;
        }
      }
      predictions[size_t(blk) * 64 + lane] = best;
    }
  }
  return predictions;
}

}  // namespace lgn
