#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lgn/error.hpp"
#include "lgn/gates.hpp"
#include "lgn/rng.hpp"
#include "lgn/softmax.hpp"

// The soft (trainable) network. Every gate k in layer l mixes a gate-type
// distribution over the 16 operators,
//
//   g_k = sum_i softmax(w_g[k] / T_g)_i * f_i(a_k, b_k),
//
// and each gate input mixes a connection distribution over N_c candidate
// sources from the previous layer,
//
//   a_k = sum_i softmax(w_a[k] / T_c)_i * prev[cand_a[k][i]].
//
// When N_c equals the previous layer width the candidate lists are implicit
// (dense mode) and the mix is a full matrix-vector product.

namespace lgn {

template <typename T>
struct ConnectionSpec {
  int n_candidates = 1;
  bool full = false;          // candidates are 0..prev_width-1, lists omitted
  std::vector<uint32_t> cand_a;  // [width * n_candidates] when !full
  std::vector<uint32_t> cand_b;
  std::vector<T> w_a;  // [width * n_candidates]
  std::vector<T> w_b;
  T t_c = T(1);

  uint32_t source_a(int gate, int slot) const {
    return full ? uint32_t(slot) : cand_a[size_t(gate) * n_candidates + slot];
  }
  uint32_t source_b(int gate, int slot) const {
    return full ? uint32_t(slot) : cand_b[size_t(gate) * n_candidates + slot];
  }
};

template <typename T>
struct SoftLayer {
  int width = 0;
  int prev_width = 0;
  std::vector<T> w_g;  // [width * 16]
  T t_g = T(1);
  ConnectionSpec<T> conn;
};

template <typename T>
struct SoftNetwork {
  int input_width = 0;
  int n_classes = 0;
  T head_tau = T(1);
  std::vector<SoftLayer<T>> layers;

  int output_width() const { return layers.empty() ? 0 : layers.back().width; }
  int group_size() const { return output_width() / n_classes; }
  int depth() const { return int(layers.size()); }
};

// Softmax probabilities for the current weights and temperatures. They do not
// depend on the input, so they are computed once per optimizer step and
// shared across the batch. coef holds the gate-type mixture collapsed onto
// the multilinear basis: g = coef0 + coef1*a + coef2*b + coef3*a*b.
template <typename T>
struct LayerProbs {
  std::vector<T> p_g;   // [width * 16]
  std::vector<T> p_a;   // [width * n_candidates]
  std::vector<T> p_b;
  std::vector<T> coef;  // [width * 4]
};

template <typename T>
struct NetworkProbs {
  std::vector<LayerProbs<T>> layers;
};

template <typename T>
void compute_probs(const SoftNetwork<T>& net, NetworkProbs<T>& out) {
  out.layers.resize(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const SoftLayer<T>& layer = net.layers[l];
    LayerProbs<T>& p = out.layers[l];
    size_t w = size_t(layer.width);
    size_t nc = size_t(layer.conn.n_candidates);
    p.p_g.resize(w * kNumOps);
    p.p_a.resize(w * nc);
    p.p_b.resize(w * nc);
    p.coef.resize(w * 4);
    for (size_t k = 0; k < w; ++k) {
      softmax_temperature(layer.w_g.data() + k * kNumOps, kNumOps, layer.t_g,
                          p.p_g.data() + k * kNumOps);
      softmax_temperature(layer.conn.w_a.data() + k * nc, nc, layer.conn.t_c,
                          p.p_a.data() + k * nc);
      softmax_temperature(layer.conn.w_b.data() + k * nc, nc, layer.conn.t_c,
                          p.p_b.data() + k * nc);
      T c0 = 0, c1 = 0, c2 = 0, c3 = 0;
      const T* pg = p.p_g.data() + k * kNumOps;
      for (int i = 0; i < kNumOps; ++i) {
        const RelaxCoef& rc = kRelaxCoef[size_t(i)];
        c0 += pg[i] * T(rc.c0);
        c1 += pg[i] * T(rc.c1);
        c2 += pg[i] * T(rc.c2);
        c3 += pg[i] * T(rc.c3);
      }
      p.coef[k * 4 + 0] = c0;
      p.coef[k * 4 + 1] = c1;
      p.coef[k * 4 + 2] = c2;
      p.coef[k * 4 + 3] = c3;
    }
  }
}

template <typename T>
struct ForwardTrace {
  // Cached per-layer activations for the backward pass.
  std::vector<std::vector<T>> a, b, g;
  std::vector<T> scores;

  void resize(const SoftNetwork<T>& net) {
    a.resize(net.layers.size());
    b.resize(net.layers.size());
    g.resize(net.layers.size());
    for (size_t l = 0; l < net.layers.size(); ++l) {
      a[l].resize(size_t(net.layers[l].width));
      b[l].resize(size_t(net.layers[l].width));
      g[l].resize(size_t(net.layers[l].width));
    }
    scores.resize(size_t(net.n_classes));
  }
};

template <typename T>
struct LayerGrads {
  std::vector<T> w_g, w_a, w_b;
};

template <typename T>
struct NetGrads {
  std::vector<LayerGrads<T>> layers;

  void resize(const SoftNetwork<T>& net) {
    layers.resize(net.layers.size());
    for (size_t l = 0; l < net.layers.size(); ++l) {
      size_t w = size_t(net.layers[l].width);
      size_t nc = size_t(net.layers[l].conn.n_candidates);
      layers[l].w_g.assign(w * kNumOps, T(0));
      layers[l].w_a.assign(w * nc, T(0));
      layers[l].w_b.assign(w * nc, T(0));
    }
  }

  void clear() {
    for (auto& lg : layers) {
      std::fill(lg.w_g.begin(), lg.w_g.end(), T(0));
      std::fill(lg.w_a.begin(), lg.w_a.end(), T(0));
      std::fill(lg.w_b.begin(), lg.w_b.end(), T(0));
    }
  }

  void add(const NetGrads& other) {
    for (size_t l = 0; l < layers.size(); ++l) {
      for (size_t i = 0; i < layers[l].w_g.size(); ++i) layers[l].w_g[i] += other.layers[l].w_g[i];
      for (size_t i = 0; i < layers[l].w_a.size(); ++i) layers[l].w_a[i] += other.layers[l].w_a[i];
      for (size_t i = 0; i < layers[l].w_b.size(); ++i) layers[l].w_b[i] += other.layers[l].w_b[i];
    }
  }

  void scale(T s) {
    for (auto& lg : layers) {
      for (auto& x : lg.w_g) x *= s;
      for (auto& x : lg.w_a) x *= s;
      for (auto& x : lg.w_b) x *= s;
    }
  }
};

namespace detail {

template <typename T>
void mix_one_layer(const SoftLayer<T>& layer, const LayerProbs<T>& probs, const T* prev, T* a_out,
                   T* b_out) {
  size_t w = size_t(layer.width);
  size_t nc = size_t(layer.conn.n_candidates);
  if (layer.conn.full) {
    for (size_t k = 0; k < w; ++k) {
      const T* pa = probs.p_a.data() + k * nc;
      const T* pb = probs.p_b.data() + k * nc;
      T a = 0, b = 0;
      for (size_t i = 0; i < nc; ++i) a += pa[i] * prev[i];
      for (size_t i = 0; i < nc; ++i) b += pb[i] * prev[i];
      a_out[k] = a;
      b_out[k] = b;
    }
  } else {
    for (size_t k = 0; k < w; ++k) {
      const T* pa = probs.p_a.data() + k * nc;
      const T* pb = probs.p_b.data() + k * nc;
      const uint32_t* ca = layer.conn.cand_a.data() + k * nc;
      const uint32_t* cb = layer.conn.cand_b.data() + k * nc;
      T a = 0, b = 0;
      for (size_t i = 0; i < nc; ++i) a += pa[i] * prev[ca[i]];
      for (size_t i = 0; i < nc; ++i) b += pb[i] * prev[cb[i]];
      a_out[k] = a;
      b_out[k] = b;
    }
  }
}

}  // namespace detail

// Forward pass for one sample using precomputed probabilities. input must
// hold net.input_width values in [0,1].
template <typename T>
void forward(const SoftNetwork<T>& net, const NetworkProbs<T>& probs, const T* input,
             ForwardTrace<T>& trace) {
  trace.resize(net);
  const T* prev = input;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const SoftLayer<T>& layer = net.layers[l];
    const LayerProbs<T>& lp = probs.layers[l];
    detail::mix_one_layer(layer, lp, prev, trace.a[l].data(), trace.b[l].data());
    for (size_t k = 0; k < size_t(layer.width); ++k) {
      const T* c = lp.coef.data() + k * 4;
      T a = trace.a[l][k], b = trace.b[l][k];
      trace.g[l][k] = c[0] + c[1] * a + c[2] * b + c[3] * a * b;
    }
    prev = trace.g[l].data();
  }
  int gs = net.group_size();
  const std::vector<T>& out = trace.g.back();
  for (int c = 0; c < net.n_classes; ++c) {
    T s = 0;
    for (int k = c * gs; k < (c + 1) * gs; ++k) s += out[size_t(k)];
    trace.scores[size_t(c)] = s / net.head_tau;
  }
}

// Convenience single-call forward; recomputes probabilities.
template <typename T>
std::pair<std::vector<T>, ForwardTrace<T>> forward(const SoftNetwork<T>& net,
                                                   const std::vector<T>& input) {
  if (int(input.size()) != net.input_width)
    throw ShapeError("forward: input width " + std::to_string(input.size()) + " != " +
                     std::to_string(net.input_width));
  NetworkProbs<T> probs;
  compute_probs(net, probs);
  ForwardTrace<T> trace;
  forward(net, probs, input.data(), trace);
  for (size_t l = 0; l < net.layers.size(); ++l)
    for (T v : trace.g[l])
      if (!std::isfinite(double(v)))
        throw NumericError("non-finite activation in layer " + std::to_string(l));
  return {trace.scores, std::move(trace)};
}

// Reverse-mode gradients for one sample. dscores is dL/dscores; gradients
// accumulate into grads (call grads.clear() first for a fresh batch).
// scratch must provide two buffers at least as wide as the widest layer.
template <typename T>
struct BackwardScratch {
  std::vector<T> dg, dprev;
};

template <typename T>
void backward(const SoftNetwork<T>& net, const NetworkProbs<T>& probs,
              const ForwardTrace<T>& trace, const T* input, const T* dscores, NetGrads<T>& grads,
              BackwardScratch<T>& scratch) {
  int gs = net.group_size();
  size_t last = net.layers.size() - 1;
  scratch.dg.assign(size_t(net.layers[last].width), T(0));
  for (int c = 0; c < net.n_classes; ++c) {
    T d = dscores[c] / net.head_tau;
    for (int k = c * gs; k < (c + 1) * gs; ++k) scratch.dg[size_t(k)] = d;
  }

  for (size_t l = net.layers.size(); l-- > 0;) {
    const SoftLayer<T>& layer = net.layers[l];
    const LayerProbs<T>& lp = probs.layers[l];
    LayerGrads<T>& lg = grads.layers[l];
    const T* prev = (l == 0) ? input : trace.g[l - 1].data();
    size_t nc = size_t(layer.conn.n_candidates);
    T inv_tg = T(1) / layer.t_g;
    T inv_tc = T(1) / layer.conn.t_c;
    bool propagate = l > 0;
    if (propagate) scratch.dprev.assign(size_t(layer.prev_width), T(0));

    for (size_t k = 0; k < size_t(layer.width); ++k) {
      T dgk = scratch.dg[k];
      T a = trace.a[l][k], b = trace.b[l][k], g = trace.g[l][k];
      const T* pg = lp.p_g.data() + k * kNumOps;
      T* dwg = lg.w_g.data() + k * kNumOps;
      T ab = a * b;
      for (int i = 0; i < kNumOps; ++i) {
        const RelaxCoef& rc = kRelaxCoef[size_t(i)];
        T fi = T(rc.c0) + T(rc.c1) * a + T(rc.c2) * b + T(rc.c3) * ab;
        dwg[i] += dgk * pg[i] * (fi - g) * inv_tg;
      }
      const T* c = lp.coef.data() + k * 4;
      T da = dgk * (c[1] + c[3] * b);
      T db = dgk * (c[2] + c[3] * a);

      const T* pa = lp.p_a.data() + k * nc;
      const T* pb = lp.p_b.data() + k * nc;
      T* dwa = lg.w_a.data() + k * nc;
      T* dwb = lg.w_b.data() + k * nc;
      if (layer.conn.full) {
        for (size_t i = 0; i < nc; ++i) {
          T xi = prev[i];
          dwa[i] += da * pa[i] * (xi - a) * inv_tc;
          dwb[i] += db * pb[i] * (xi - b) * inv_tc;
          if (propagate) scratch.dprev[i] += da * pa[i] + db * pb[i];
        }
      } else {
        const uint32_t* ca = layer.conn.cand_a.data() + k * nc;
        const uint32_t* cb = layer.conn.cand_b.data() + k * nc;
        for (size_t i = 0; i < nc; ++i) {
          T xa = prev[ca[i]];
          dwa[i] += da * pa[i] * (xa - a) * inv_tc;
          if (propagate) scratch.dprev[ca[i]] += da * pa[i];
        }
        for (size_t i = 0; i < nc; ++i) {
          T xb = prev[cb[i]];
          dwb[i] += db * pb[i] * (xb - b) * inv_tc;
          if (propagate) scratch.dprev[cb[i]] += db * pb[i];
        }
      }
    }
    if (propagate) std::swap(scratch.dg, scratch.dprev);
  }
}

// Softmax cross-entropy on the class scores.
template <typename T>
std::pair<T, std::vector<T>> cross_entropy_loss(const std::vector<T>& scores, int label) {
  if (label < 0 || label >= int(scores.size()))
    throw Error("label " + std::to_string(label) + " out of range");
  double smax = double(scores[0]);
  for (T s : scores) smax = std::max(smax, double(s));
  double sum = 0;
  for (T s : scores) sum += std::exp(double(s) - smax);
  double lse = std::log(sum) + smax;
  std::vector<T> grad(scores.size());
  for (size_t i = 0; i < scores.size(); ++i)
    grad[i] = T(std::exp(double(scores[i]) - lse) - (int(i) == label ? 1.0 : 0.0));
  return {T(lse - double(scores[size_t(label)])), std::move(grad)};
}

// --- spec-level single-layer operations (tests and small tools) ---

template <typename T>
std::pair<std::vector<T>, std::vector<T>> mix_connections(const SoftLayer<T>& layer,
                                                          const std::vector<T>& prev) {
  if (int(prev.size()) != layer.prev_width)
    throw ShapeError("mix_connections: previous width " + std::to_string(prev.size()) + " != " +
                     std::to_string(layer.prev_width));
  size_t w = size_t(layer.width), nc = size_t(layer.conn.n_candidates);
  LayerProbs<T> lp;
  lp.p_a.resize(w * nc);
  lp.p_b.resize(w * nc);
  lp.p_g.assign(w * kNumOps, T(0));
  lp.coef.assign(w * 4, T(0));
  for (size_t k = 0; k < w; ++k) {
    softmax_temperature(layer.conn.w_a.data() + k * nc, nc, layer.conn.t_c, lp.p_a.data() + k * nc);
    softmax_temperature(layer.conn.w_b.data() + k * nc, nc, layer.conn.t_c, lp.p_b.data() + k * nc);
  }
  std::vector<T> a(w), b(w);
  detail::mix_one_layer(layer, lp, prev.data(), a.data(), b.data());
  return {std::move(a), std::move(b)};
}

template <typename T>
std::vector<T> mix_gates(const SoftLayer<T>& layer, const std::vector<T>& a,
                         const std::vector<T>& b) {
  if (int(a.size()) != layer.width || int(b.size()) != layer.width)
    throw ShapeError("mix_gates: input lengths do not match layer width");
  std::vector<T> g(size_t(layer.width));
  std::vector<T> pg(kNumOps);
  for (size_t k = 0; k < size_t(layer.width); ++k) {
    softmax_temperature(layer.w_g.data() + k * kNumOps, kNumOps, layer.t_g, pg.data());
    T s = 0;
    for (int i = 0; i < kNumOps; ++i) s += pg[size_t(i)] * eval_relaxed(i, a[k], b[k]);
    g[k] = s;
  }
  return g;
}

// --- construction ---

struct Architecture {
  int input_width = 0;
  std::vector<int> widths;        // gates per layer
  std::vector<int> n_candidates;  // N_c per layer; equal to fan-in width selects dense mode
  int n_classes = 0;
  double head_tau = 0;  // <= 0 selects the default group_size / 10
  double residual_weight = 5.0;
  bool cover_inputs = false;  // round-robin first-layer candidates over all input bits
};

// Residual-initialized network: the pass-through-A operator gets
// residual_weight, every other operator 0, so the untrained network is biased
// toward identity. Connection weights start at zero (uniform over
// candidates); candidate lists are drawn without replacement per gate input.
template <typename T>
SoftNetwork<T> build_network(const Architecture& arch, uint64_t seed) {
  if (arch.input_width <= 0) throw ConfigError("input width must be positive");
  if (arch.widths.empty()) throw ConfigError("network needs at least one layer");
  if (arch.n_candidates.size() != arch.widths.size())
    throw ConfigError("n_candidates must list one value per layer");
  if (arch.n_classes <= 0) throw ConfigError("n_classes must be positive");
  if (arch.widths.back() % arch.n_classes != 0)
    throw ConfigError("last layer width " + std::to_string(arch.widths.back()) +
                      " not divisible by " + std::to_string(arch.n_classes) + " classes");

  SoftNetwork<T> net;
  net.input_width = arch.input_width;
  net.n_classes = arch.n_classes;
  double tau = arch.head_tau > 0 ? arch.head_tau
                                 : double(arch.widths.back() / arch.n_classes) / 10.0;
  net.head_tau = T(tau);

  std::mt19937 rng(uint32_t(splitmix64(seed)));
  int prev = arch.input_width;
  uint32_t rr = 0;  // round-robin cursor for input coverage
  for (size_t l = 0; l < arch.widths.size(); ++l) {
    int width = arch.widths[l];
    int nc = arch.n_candidates[l];
    if (width <= 0) throw ConfigError("layer width must be positive");
    if (nc <= 0 || nc > prev)
      throw ConfigError("layer " + std::to_string(l) + ": N_c " + std::to_string(nc) +
                        " not in [1, " + std::to_string(prev) + "]");
    SoftLayer<T> layer;
    layer.width = width;
    layer.prev_width = prev;
    layer.w_g.assign(size_t(width) * kNumOps, T(0));
    for (int k = 0; k < width; ++k)
      layer.w_g[size_t(k) * kNumOps + kOpPassA] = T(arch.residual_weight);
    layer.conn.n_candidates = nc;
    layer.conn.full = (nc == prev);
    layer.conn.w_a.assign(size_t(width) * nc, T(0));
    layer.conn.w_b.assign(size_t(width) * nc, T(0));
    if (!layer.conn.full) {
      layer.conn.cand_a.resize(size_t(width) * nc);
      layer.conn.cand_b.resize(size_t(width) * nc);
      bool cover = arch.cover_inputs && l == 0;
      auto draw = [&](uint32_t* dst) {
        int64_t forced = -1;
        if (cover && rr < uint32_t(prev)) forced = rr++;
        auto lst = sample_without_replacement(rng, uint32_t(prev), uint32_t(nc), forced);
        std::copy(lst.begin(), lst.end(), dst);
      };
      for (int k = 0; k < width; ++k) {
        draw(layer.conn.cand_a.data() + size_t(k) * nc);
        draw(layer.conn.cand_b.data() + size_t(k) * nc);
      }
    }
    net.layers.push_back(std::move(layer));
    prev = width;
  }
  return net;
}

template <typename T>
void set_temperatures(SoftNetwork<T>& net, double t_g, double t_c) {
  for (auto& layer : net.layers) {
    layer.t_g = T(t_g);
    layer.conn.t_c = T(t_c);
  }
}

}  // namespace lgn
