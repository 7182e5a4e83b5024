// Finite-difference verification of the reverse-mode gradients on a spread of
// small random networks: every parameter, gather and dense connection modes,
// several temperatures. Runs in double precision so the comparison is limited
// by the finite-difference step, not by accumulation noise.
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lgn/model.hpp"

namespace lgn {
namespace {

struct Sample {
  std::vector<double> input;
  int label = 0;
};

double loss_of(const SoftNetwork<double>& net, const Sample& s) {
  auto [scores, trace] = forward(net, s.input);
  return cross_entropy_loss(scores, s.label).first;
}

// Analytic gradients of the single-sample loss.
NetGrads<double> analytic_grads(const SoftNetwork<double>& net, const Sample& s) {
  NetworkProbs<double> probs;
  compute_probs(net, probs);
  ForwardTrace<double> trace;
  forward(net, probs, s.input.data(), trace);
  auto [loss, dscores] = cross_entropy_loss(trace.scores, s.label);
  NetGrads<double> grads;
  grads.resize(net);
  BackwardScratch<double> scratch;
  backward(net, probs, trace, s.input.data(), dscores.data(), grads, scratch);
  return grads;
}

void check_all_params(SoftNetwork<double>& net, const Sample& s, double rel_tol,
                      double abs_tol) {
  NetGrads<double> grads = analytic_grads(net, s);
  const double h = 1e-4;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    auto check_block = [&](std::vector<double>& w, const std::vector<double>& g,
                           const char* name) {
      ASSERT_EQ(w.size(), g.size());
      for (size_t i = 0; i < w.size(); ++i) {
        double keep = w[i];
        w[i] = keep + h;
        double up = loss_of(net, s);
        w[i] = keep - h;
        double dn = loss_of(net, s);
        w[i] = keep;
        double fd = (up - dn) / (2 * h);
        double tol = abs_tol + rel_tol * std::max(std::abs(fd), std::abs(g[i]));
        EXPECT_NEAR(g[i], fd, tol) << "layer " << l << " " << name << "[" << i << "]";
      }
    };
    check_block(net.layers[l].w_g, grads.layers[l].w_g, "w_g");
    check_block(net.layers[l].conn.w_a, grads.layers[l].w_a, "w_a");
    check_block(net.layers[l].conn.w_b, grads.layers[l].w_b, "w_b");
  }
}

TEST(GradCheck, TwentyRandomSmallNetworks) {
  std::mt19937 rng(2024);
  std::normal_distribution<double> weight(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Architecture arch;
    arch.input_width = 3 + int(rng() % 4);
    int depth = 1 + int(rng() % 3);
    int prev = arch.input_width;
    for (int l = 0; l < depth; ++l) {
      int width = (l == depth - 1) ? 4 + 2 * int(rng() % 3)  // divisible by 2
                                   : 2 + int(rng() % 7);
      int nc;
      switch (rng() % 3) {
        case 0: nc = 1; break;                      // fixed-connection mode
        case 1: nc = prev; break;                   // dense/full mode
        default: nc = 1 + int(rng() % prev); break; // gather mode
      }
      arch.widths.push_back(width);
      arch.n_candidates.push_back(nc);
      prev = width;
    }
    arch.n_classes = 2;
    arch.cover_inputs = (trial % 2) == 0;
    SoftNetwork<double> net = build_network<double>(arch, 1000 + uint64_t(trial));
    for (auto& layer : net.layers) {
      for (double& w : layer.w_g) w = weight(rng);
      for (double& w : layer.conn.w_a) w = weight(rng);
      for (double& w : layer.conn.w_b) w = weight(rng);
    }
    // Mixed temperatures, including moderately low ones; extremely low
    // temperatures make the loss surface piecewise-flat and the FD step
    // meaningless, so 0.2 is the floor here.
    double t_g = 0.2 + 0.8 * double(rng() % 100) / 99.0;
    double t_c = 0.2 + 0.8 * double(rng() % 100) / 99.0;
    set_temperatures(net, t_g, t_c);

    Sample s;
    s.input.resize(size_t(arch.input_width));
    for (double& v : s.input) v = double(rng() % 2);
    s.label = int(rng() % 2);

    check_all_params(net, s, 1e-3, 1e-6);
  }
}

TEST(GradCheck, SpecExampleTwoLayerSixGates) {
  Architecture arch;
  arch.input_width = 4;
  arch.widths = {6, 6};
  arch.n_candidates = {3, 6};
  arch.n_classes = 2;
  SoftNetwork<double> net = build_network<double>(arch, 7);
  std::mt19937 rng(7);
  std::normal_distribution<double> weight(0.0, 1.0);
  for (auto& layer : net.layers) {
    for (double& w : layer.w_g) w = weight(rng);
    for (double& w : layer.conn.w_a) w = weight(rng);
    for (double& w : layer.conn.w_b) w = weight(rng);
  }
  Sample s{{1.0, 0.0, 1.0, 1.0}, 1};
  check_all_params(net, s, 1e-3, 1e-6);
}

}  // namespace
}  // namespace lgn
