// Tests for the soft network: connection mixing, gate mixing, the group-sum
// head, forward/backward, the loss, and network construction. The forward
// oracle is an independent term-by-term interpreter written directly from the
// mixture definitions.
#include "lgn/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace lgn {
namespace {

// Test-local softmax in double precision, straight from the definition.
std::vector<double> naive_softmax(const std::vector<double>& w, double t) {
  double wmax = w[0];
  for (double v : w) wmax = std::max(wmax, v);
  std::vector<double> p(w.size());
  double sum = 0;
  for (size_t i = 0; i < w.size(); ++i) sum += p[i] = std::exp((w[i] - wmax) / t);
  for (double& v : p) v /= sum;
  return p;
}

// Independent interpreter: evaluates the connection mixture, the gate-type
// mixture, and the group-sum head one term at a time.
std::vector<double> naive_forward(const SoftNetwork<double>& net,
                                  const std::vector<double>& input) {
  std::vector<double> prev = input;
  for (const SoftLayer<double>& layer : net.layers) {
    size_t nc = size_t(layer.conn.n_candidates);
    std::vector<double> out(size_t(layer.width));
    for (int k = 0; k < layer.width; ++k) {
      std::vector<double> wa(nc), wb(nc);
      for (size_t i = 0; i < nc; ++i) {
        wa[i] = layer.conn.w_a[size_t(k) * nc + i];
        wb[i] = layer.conn.w_b[size_t(k) * nc + i];
      }
      std::vector<double> pa = naive_softmax(wa, double(layer.conn.t_c));
      std::vector<double> pb = naive_softmax(wb, double(layer.conn.t_c));
      double a = 0, b = 0;
      for (size_t i = 0; i < nc; ++i) {
        a += pa[i] * prev[layer.conn.source_a(k, int(i))];
        b += pb[i] * prev[layer.conn.source_b(k, int(i))];
      }
      std::vector<double> wg(kNumOps);
      for (int i = 0; i < kNumOps; ++i) wg[size_t(i)] = layer.w_g[size_t(k) * kNumOps + i];
      std::vector<double> pg = naive_softmax(wg, double(layer.t_g));
      double g = 0;
      for (int i = 0; i < kNumOps; ++i) g += pg[size_t(i)] * eval_relaxed<double>(i, a, b);
      out[size_t(k)] = g;
    }
    prev = std::move(out);
  }
  int gs = net.group_size();
  std::vector<double> scores(size_t(net.n_classes));
  for (int c = 0; c < net.n_classes; ++c) {
    double s = 0;
    for (int k = c * gs; k < (c + 1) * gs; ++k) s += prev[size_t(k)];
    scores[size_t(c)] = s / double(net.head_tau);
  }
  return scores;
}

template <typename T>
SoftNetwork<T> random_network(Architecture arch, uint64_t seed, T weight_scale) {
  SoftNetwork<T> net = build_network<T>(arch, seed);
  std::mt19937 rng(uint32_t(seed) + 99);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& layer : net.layers) {
    for (T& w : layer.w_g) w = T(n(rng)) * weight_scale;
    for (T& w : layer.conn.w_a) w = T(n(rng)) * weight_scale;
    for (T& w : layer.conn.w_b) w = T(n(rng)) * weight_scale;
  }
  return net;
}

TEST(MixConnections, UniformWeightsAverageCandidates) {
  SoftLayer<double> layer;
  layer.width = 1;
  layer.prev_width = 2;
  layer.w_g.assign(kNumOps, 0.0);
  layer.conn.n_candidates = 2;
  layer.conn.cand_a = {0, 1};
  layer.conn.cand_b = {1, 0};
  layer.conn.w_a = {0.0, 0.0};
  layer.conn.w_b = {0.0, 0.0};
  auto [a, b] = mix_connections(layer, std::vector<double>{0.2, 0.8});
  EXPECT_NEAR(a[0], 0.5, 1e-12);
  EXPECT_NEAR(b[0], 0.5, 1e-12);
}

TEST(MixConnections, SaturatedSoftmaxSelectsArgmax) {
  SoftLayer<double> layer;
  layer.width = 1;
  layer.prev_width = 2;
  layer.w_g.assign(kNumOps, 0.0);
  layer.conn.n_candidates = 2;
  layer.conn.cand_a = {0, 1};
  layer.conn.cand_b = {0, 1};
  layer.conn.w_a = {10.0, 0.0};
  layer.conn.w_b = {0.0, 10.0};
  layer.conn.t_c = 1e-4;
  auto [a, b] = mix_connections(layer, std::vector<double>{0.2, 0.8});
  EXPECT_NEAR(a[0], 0.2, 1e-6);
  EXPECT_NEAR(b[0], 0.8, 1e-6);
}

TEST(MixConnections, FullModeEqualsDenseMatrixPath) {
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    int prev_w = 3 + int(rng() % 6);
    SoftLayer<float> layer;
    layer.width = 4;
    layer.prev_width = prev_w;
    layer.w_g.assign(size_t(layer.width) * kNumOps, 0.0f);
    layer.conn.n_candidates = prev_w;
    layer.conn.full = true;
    layer.conn.w_a.resize(size_t(layer.width) * prev_w);
    layer.conn.w_b.resize(size_t(layer.width) * prev_w);
    for (float& w : layer.conn.w_a) w = float(n(rng));
    for (float& w : layer.conn.w_b) w = float(n(rng));
    std::vector<float> prev(size_t(prev_w), 0.0f);
    for (float& v : prev) v = float(rng() % 1000) / 1000.0f;

    auto [a, b] = mix_connections(layer, prev);

    // Dense oracle: row-softmax the weight matrix, then matrix-vector product.
    for (int k = 0; k < layer.width; ++k) {
      std::vector<double> wa(size_t(prev_w), 0.0), wb(size_t(prev_w), 0.0);
      for (int i = 0; i < prev_w; ++i) {
        wa[size_t(i)] = layer.conn.w_a[size_t(k) * prev_w + i];
        wb[size_t(i)] = layer.conn.w_b[size_t(k) * prev_w + i];
      }
      std::vector<double> pa = naive_softmax(wa, 1.0), pb = naive_softmax(wb, 1.0);
      double ea = 0, eb = 0;
      for (int i = 0; i < prev_w; ++i) {
        ea += pa[size_t(i)] * double(prev[size_t(i)]);
        eb += pb[size_t(i)] * double(prev[size_t(i)]);
      }
      EXPECT_NEAR(double(a[size_t(k)]), ea, 1e-6);
      EXPECT_NEAR(double(b[size_t(k)]), eb, 1e-6);
    }
  }
}

TEST(MixConnections, WidthMismatchThrows) {
  SoftLayer<double> layer;
  layer.width = 1;
  layer.prev_width = 2;
  layer.conn.n_candidates = 2;
  layer.conn.cand_a = {0, 1};
  layer.conn.cand_b = {0, 1};
  layer.conn.w_a = {0.0, 0.0};
  layer.conn.w_b = {0.0, 0.0};
  EXPECT_THROW(mix_connections(layer, std::vector<double>{0.5}), ShapeError);
}

TEST(MixGates, UniformMixtureAtCornerIsHalf) {
  // The 16 operators are closed under complement, so their mean at any
  // boolean corner is exactly 1/2.
  SoftLayer<double> layer;
  layer.width = 1;
  layer.w_g.assign(kNumOps, 0.0);
  std::vector<double> g = mix_gates(layer, {1.0}, {0.0});
  EXPECT_NEAR(g[0], 0.5, 1e-12);
}

TEST(MixGates, SaturatedXorGate) {
  SoftLayer<double> layer;
  layer.width = 1;
  layer.w_g.assign(kNumOps, 0.0);
  layer.w_g[kOpXor] = 10.0;
  layer.t_g = 1e-4;
  std::vector<double> g = mix_gates(layer, {0.3}, {0.8});
  EXPECT_NEAR(g[0], 0.3 + 0.8 - 2 * 0.24, 1e-6);
}

TEST(MixGates, ShapeMismatchThrows) {
  SoftLayer<double> layer;
  layer.width = 2;
  layer.w_g.assign(2 * kNumOps, 0.0);
  EXPECT_THROW(mix_gates(layer, {0.5}, {0.5, 0.5}), ShapeError);
}

TEST(Forward, SingleTrueGateScoresOne) {
  Architecture arch;
  arch.input_width = 1;
  arch.widths = {1};
  arch.n_candidates = {1};
  arch.n_classes = 1;
  arch.head_tau = 1.0;
  SoftNetwork<double> net = build_network<double>(arch, 1);
  net.layers[0].w_g.assign(kNumOps, 0.0);
  net.layers[0].w_g[kOpTrue] = 10.0;
  net.layers[0].t_g = 1e-6;
  for (double in : {0.0, 1.0, 0.37}) {
    auto [scores, trace] = forward(net, std::vector<double>{in});
    EXPECT_NEAR(scores[0], 1.0, 1e-9);
  }
}

TEST(Forward, IdentityChainReproducesInputBits) {
  // Pass-through-A gates with one-hot connections wired straight through:
  // scores must equal the selected input bits divided by head_tau.
  const int width = 4;
  Architecture arch;
  arch.input_width = width;
  arch.widths = {width, width};
  arch.n_candidates = {1, 1};
  arch.n_classes = width;
  arch.head_tau = 2.0;
  arch.cover_inputs = false;
  SoftNetwork<double> net = build_network<double>(arch, 5);
  for (auto& layer : net.layers) {
    layer.t_g = 1e-6;  // saturate the residual-initialized pass-A weights
    for (int k = 0; k < width; ++k) {
      layer.conn.cand_a[size_t(k)] = uint32_t(k);
      layer.conn.cand_b[size_t(k)] = uint32_t(k);
    }
  }
  std::vector<double> input = {1.0, 0.0, 1.0, 1.0};
  auto [scores, trace] = forward(net, input);
  for (int c = 0; c < width; ++c) EXPECT_NEAR(scores[size_t(c)], input[size_t(c)] / 2.0, 1e-9);
}

TEST(Forward, MatchesNaiveInterpreter) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Architecture arch;
    arch.input_width = 4;
    arch.widths = {8, 8};
    arch.n_candidates = {3, int(2 + rng() % 7)};
    arch.n_classes = 2;
    arch.cover_inputs = (trial % 2) == 0;
    SoftNetwork<double> net = random_network<double>(arch, 100 + trial, 1.5);
    set_temperatures(net, 0.7, 1.3);
    std::vector<double> input(4);
    for (double& v : input) v = double(rng() % 2);
    auto [scores, trace] = forward(net, input);
    std::vector<double> oracle = naive_forward(net, input);
    ASSERT_EQ(scores.size(), oracle.size());
    for (size_t c = 0; c < scores.size(); ++c) EXPECT_NEAR(scores[c], oracle[c], 1e-12);
  }
}

TEST(Forward, ShapeAndNumericErrors) {
  Architecture arch;
  arch.input_width = 4;
  arch.widths = {4};
  arch.n_candidates = {2};
  arch.n_classes = 2;
  SoftNetwork<double> net = build_network<double>(arch, 2);
  EXPECT_THROW(forward(net, std::vector<double>{0.0, 1.0}), ShapeError);
  net.layers[0].w_g[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    forward(net, std::vector<double>(4, 1.0));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer"), std::string::npos);
  }
}

TEST(Forward, ActivationsStayInUnitInterval) {
  std::mt19937 rng(23);
  Architecture arch;
  arch.input_width = 6;
  arch.widths = {10, 10, 10};
  arch.n_candidates = {4, 6, 10};
  arch.n_classes = 2;
  SoftNetwork<double> net = random_network<double>(arch, 7, 3.0);
  set_temperatures(net, 0.05, 0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> input(6);
    for (double& v : input) v = u(rng);
    auto [scores, trace] = forward(net, input);
    for (size_t l = 0; l < net.layers.size(); ++l)
      for (int k = 0; k < net.layers[l].width; ++k) {
        EXPECT_GE(trace.g[l][size_t(k)], -1e-12);
        EXPECT_LE(trace.g[l][size_t(k)], 1.0 + 1e-12);
      }
  }
}

TEST(Softmax, RowsAreNormalizedAtAllTemperatures) {
  std::mt19937 rng(31);
  std::normal_distribution<double> n(0.0, 4.0);
  for (double t : {1.0, 0.3, 1e-2, 1e-4}) {
    for (int trial = 0; trial < 200; ++trial) {
      size_t len = 2 + rng() % 15;
      std::vector<double> w(len), p(len);
      for (double& v : w) v = n(rng);
      softmax_temperature(w.data(), len, t, p.data());
      double sum = 0;
      for (double v : p) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, ArgmaxStableUnderTemperature) {
  std::mt19937 rng(37);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w(8), p(8);
    for (double& v : w) v = n(rng);
    size_t ref = argmax_row(w.data(), w.size());
    for (double t : {10.0, 1.0, 0.1, 1e-3, 1e-4}) {
      softmax_temperature(w.data(), w.size(), t, p.data());
      EXPECT_EQ(argmax_row(p.data(), p.size()), ref) << "t=" << t;
    }
  }
}

TEST(CrossEntropy, UniformScoresGiveLogNClasses) {
  // Equal scores: softmax is uniform, loss is log K, and the gradient is
  // p_i - [i == label].
  auto [loss, grad] = cross_entropy_loss(std::vector<double>(4, 0.25), 1);
  EXPECT_NEAR(loss, std::log(4.0), 1e-12);
  for (size_t i = 0; i < grad.size(); ++i)
    EXPECT_NEAR(grad[i], (i == 1 ? -0.75 : 0.25), 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectIsNearZero) {
  auto [loss, grad] = cross_entropy_loss(std::vector<double>{10.0, 0.0, 0.0}, 0);
  EXPECT_LT(loss, 1e-3);
  for (double g : grad) EXPECT_LT(std::abs(g), 1e-3);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  std::vector<double> scores = {0.4, -1.2, 2.0, 0.1};
  const int label = 2;
  auto [loss, grad] = cross_entropy_loss(scores, label);
  const double h = 1e-6;
  for (size_t i = 0; i < scores.size(); ++i) {
    std::vector<double> up = scores, dn = scores;
    up[i] += h;
    dn[i] -= h;
    double fd = (cross_entropy_loss(up, label).first - cross_entropy_loss(dn, label).first) /
                (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-8);
  }
}

TEST(CrossEntropy, LabelOutOfRangeThrows) {
  EXPECT_THROW(cross_entropy_loss(std::vector<double>(4, 0.0), 4), Error);
  EXPECT_THROW(cross_entropy_loss(std::vector<double>(4, 0.0), -1), Error);
}

TEST(Backward, ZeroUpstreamGradientGivesZeroGradients) {
  Architecture arch;
  arch.input_width = 4;
  arch.widths = {6, 6};
  arch.n_candidates = {3, 4};
  arch.n_classes = 2;
  SoftNetwork<double> net = random_network<double>(arch, 11, 1.0);
  NetworkProbs<double> probs;
  compute_probs(net, probs);
  std::vector<double> input = {1.0, 0.0, 0.0, 1.0};
  ForwardTrace<double> trace;
  forward(net, probs, input.data(), trace);
  NetGrads<double> grads;
  grads.resize(net);
  BackwardScratch<double> scratch;
  std::vector<double> dscores(2, 0.0);
  backward(net, probs, trace, input.data(), dscores.data(), grads, scratch);
  for (const auto& lg : grads.layers) {
    for (double g : lg.w_g) EXPECT_EQ(g, 0.0);
    for (double g : lg.w_a) EXPECT_EQ(g, 0.0);
    for (double g : lg.w_b) EXPECT_EQ(g, 0.0);
  }
}

TEST(Backward, SaturatedTemperaturesFreezeNonSelectedConnections) {
  // At T_c = 1e-4 the softmax Jacobian vanishes for everything but the
  // winning candidate; the finite-difference oracle agrees.
  Architecture arch;
  arch.input_width = 4;
  arch.widths = {2};
  arch.n_candidates = {3};
  arch.n_classes = 1;
  arch.head_tau = 1.0;
  SoftNetwork<double> net = build_network<double>(arch, 13);
  for (double& w : net.layers[0].conn.w_a) w = 0.0;
  net.layers[0].conn.w_a[0] = 5.0;  // clear winner for gate 0 input a
  set_temperatures(net, 1.0, 1e-4);

  std::vector<double> input = {1.0, 0.0, 1.0, 0.0};
  NetworkProbs<double> probs;
  compute_probs(net, probs);
  ForwardTrace<double> trace;
  forward(net, probs, input.data(), trace);
  auto [loss, dscores] = cross_entropy_loss(trace.scores, 0);
  NetGrads<double> grads;
  grads.resize(net);
  BackwardScratch<double> scratch;
  backward(net, probs, trace, input.data(), dscores.data(), grads, scratch);

  const double h = 1e-4;
  for (int slot = 1; slot < 3; ++slot) {
    EXPECT_LT(std::abs(grads.layers[0].w_a[size_t(slot)]), 1e-8);
    double& w = net.layers[0].conn.w_a[size_t(slot)];
    double keep = w;
    w = keep + h;
    auto up = forward(net, input);
    w = keep - h;
    auto dn = forward(net, input);
    w = keep;
    double fd = (cross_entropy_loss(up.first, 0).first - cross_entropy_loss(dn.first, 0).first) /
                (2 * h);
    EXPECT_LT(std::abs(fd), 1e-8);
  }
}

TEST(BuildNetwork, SameSeedIsBitIdentical) {
  Architecture arch;
  arch.input_width = 24;
  arch.widths = {20, 20};
  arch.n_candidates = {12, 16};
  arch.n_classes = 4;
  SoftNetwork<float> x = build_network<float>(arch, 42);
  SoftNetwork<float> y = build_network<float>(arch, 42);
  ASSERT_EQ(x.layers.size(), y.layers.size());
  for (size_t l = 0; l < x.layers.size(); ++l) {
    EXPECT_EQ(x.layers[l].w_g, y.layers[l].w_g);
    EXPECT_EQ(x.layers[l].conn.cand_a, y.layers[l].conn.cand_a);
    EXPECT_EQ(x.layers[l].conn.cand_b, y.layers[l].conn.cand_b);
    EXPECT_EQ(x.layers[l].conn.w_a, y.layers[l].conn.w_a);
  }
  SoftNetwork<float> z = build_network<float>(arch, 43);
  EXPECT_NE(x.layers[0].conn.cand_a, z.layers[0].conn.cand_a);
}

TEST(BuildNetwork, ResidualInitFavorsPassAEverywhere) {
  Architecture arch;
  arch.input_width = 8;
  arch.widths = {10, 10};
  arch.n_candidates = {4, 10};
  arch.n_classes = 2;
  SoftNetwork<float> net = build_network<float>(arch, 3);
  std::vector<float> p(kNumOps);
  for (const auto& layer : net.layers)
    for (int k = 0; k < layer.width; ++k) {
      softmax_temperature(layer.w_g.data() + size_t(k) * kNumOps, kNumOps, layer.t_g, p.data());
      EXPECT_EQ(argmax_row(p.data(), kNumOps), size_t(kOpPassA));
      for (int i = 0; i < kNumOps; ++i)
        if (i != kOpPassA) EXPECT_LT(p[size_t(i)], p[kOpPassA]);
    }
}

TEST(BuildNetwork, ConnectionWeightsStartUniform) {
  Architecture arch;
  arch.input_width = 8;
  arch.widths = {6};
  arch.n_candidates = {4};
  arch.n_classes = 2;
  SoftNetwork<float> net = build_network<float>(arch, 9);
  for (float w : net.layers[0].conn.w_a) EXPECT_EQ(w, 0.0f);
  for (float w : net.layers[0].conn.w_b) EXPECT_EQ(w, 0.0f);
}

TEST(BuildNetwork, CandidateListsAreValidAndDistinct) {
  Architecture arch;
  arch.input_width = 24;
  arch.widths = {40, 40};
  arch.n_candidates = {12, 16};
  arch.n_classes = 4;
  arch.cover_inputs = true;
  SoftNetwork<float> net = build_network<float>(arch, 77);
  int prev = arch.input_width;
  for (const auto& layer : net.layers) {
    size_t nc = size_t(layer.conn.n_candidates);
    for (int k = 0; k < layer.width; ++k)
      for (const auto* lst : {&layer.conn.cand_a, &layer.conn.cand_b}) {
        std::set<uint32_t> seen;
        for (size_t i = 0; i < nc; ++i) {
          uint32_t c = (*lst)[size_t(k) * nc + i];
          EXPECT_LT(c, uint32_t(prev));
          EXPECT_TRUE(seen.insert(c).second) << "duplicate candidate";
        }
      }
    prev = layer.width;
  }
  // cover_inputs: the first-layer candidate lists jointly reach every input.
  std::set<uint32_t> reached;
  for (uint32_t c : net.layers[0].conn.cand_a) reached.insert(c);
  for (uint32_t c : net.layers[0].conn.cand_b) reached.insert(c);
  EXPECT_EQ(reached.size(), size_t(arch.input_width));
}

TEST(BuildNetwork, FullModeOmitsCandidateLists) {
  Architecture arch;
  arch.input_width = 6;
  arch.widths = {4};
  arch.n_candidates = {6};
  arch.n_classes = 2;
  SoftNetwork<float> net = build_network<float>(arch, 1);
  EXPECT_TRUE(net.layers[0].conn.full);
  EXPECT_TRUE(net.layers[0].conn.cand_a.empty());
  for (int slot = 0; slot < 6; ++slot)
    EXPECT_EQ(net.layers[0].conn.source_a(0, slot), uint32_t(slot));
}

TEST(BuildNetwork, RejectsBadArchitectures) {
  Architecture arch;
  arch.input_width = 4;
  arch.widths = {6};
  arch.n_candidates = {5};  // N_c > previous width
  arch.n_classes = 2;
  EXPECT_THROW(build_network<float>(arch, 1), ConfigError);
  arch.n_candidates = {2};
  arch.n_classes = 4;  // 6 % 4 != 0
  EXPECT_THROW(build_network<float>(arch, 1), ConfigError);
  arch.n_classes = 2;
  arch.widths = {};
  arch.n_candidates = {};
  EXPECT_THROW(build_network<float>(arch, 1), ConfigError);
}

TEST(BuildNetwork, HeadTauDefaultsToGroupSizeTenth) {
  Architecture arch;
  arch.input_width = 4;
  arch.widths = {100};
  arch.n_candidates = {2};
  arch.n_classes = 4;
  SoftNetwork<float> net = build_network<float>(arch, 1);
  EXPECT_FLOAT_EQ(net.head_tau, 25.0f / 10.0f);
  arch.head_tau = 1.25;
  EXPECT_FLOAT_EQ(build_network<float>(arch, 1).head_tau, 1.25f);
}

}  // namespace
}  // namespace lgn
