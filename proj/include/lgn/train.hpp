#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lgn/data.hpp"
#include "lgn/error.hpp"
#include "lgn/hardnet.hpp"
#include "lgn/model.hpp"
#include "lgn/parallel.hpp"
#include "lgn/rng.hpp"

namespace lgn {

// Log-linear temperature decay over an epoch window: holds t_start before the
// window, t_end at and after its last epoch, and spends the decades evenly in
// between. Epochs are 1-indexed; the temperature for epoch e applies to the
// whole epoch.
struct TemperatureSchedule {
  double t_start = 1.0;
  double t_end = 1e-4;
  int epoch_start = 0;
  int epoch_end = 0;

  void validate() const {
    if (!(t_start >= t_end) || !(t_end > 0))
      throw ConfigError("temperature schedule needs t_start >= t_end > 0");
    if (epoch_start > epoch_end)
      throw ConfigError("temperature schedule window is reversed");
  }

  double at(int epoch) const {
    if (epoch <= epoch_start) return t_start;
    if (epoch >= epoch_end) return t_end;
    double f = double(epoch - epoch_start) / double(epoch_end - epoch_start);
    return t_start * std::pow(t_end / t_start, f);
  }
};

enum class Optimizer { kAdam, kSgd };

struct TrainPlan {
  int epochs = 0;
  double lr = 0.01;
  int batch_size = 128;
  uint64_t seed = 0;
  TemperatureSchedule sched_c;  // connection temperature T_c
  TemperatureSchedule sched_g;  // gate temperature T_g
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int threads = 1;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(lr > 0)) throw ConfigError("learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    sched_c.validate();
    sched_g.validate();
    for (const auto* s : {&sched_c, &sched_g})
      if (s->epoch_start < 0 || s->epoch_end > epochs)
        throw ConfigError("schedule window [" + std::to_string(s->epoch_start) + ", " +
                          std::to_string(s->epoch_end) + "] outside 0.." +
                          std::to_string(epochs) + " epochs");
    if (optimizer == Optimizer::kAdam) {
      if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0))
        throw ConfigError("adam hyperparameters out of range");
    }
  }
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;       // relaxed network
  double test_accuracy_hard = 0;  // discretized network
  double agreement = 0;           // soft vs hard prediction match rate on test
  double t_c = 0;
  double t_g = 0;
};

// Adam moment estimates, laid out exactly like the gradients so the update
// walks all three weight blocks per layer uniformly.
template <typename T>
struct OptimizerState {
  NetGrads<T> m, v;
  int64_t step = 0;

  void resize(const SoftNetwork<T>& net) {
    m.resize(net);
    v.resize(net);
    step = 0;
  }
};

// Network plus everything needed to continue training where it stopped.
template <typename T>
struct TrainState {
  SoftNetwork<T> net;
  OptimizerState<T> opt;
  int epochs_done = 0;
};

namespace detail {

template <typename T, typename Fn>
void for_each_param(SoftNetwork<T>& net, NetGrads<T>& g, OptimizerState<T>& o, Fn&& fn) {
  for (size_t l = 0; l < net.layers.size(); ++l) {
    fn(net.layers[l].w_g, g.layers[l].w_g, o.m.layers[l].w_g, o.v.layers[l].w_g);
    fn(net.layers[l].conn.w_a, g.layers[l].w_a, o.m.layers[l].w_a, o.v.layers[l].w_a);
    fn(net.layers[l].conn.w_b, g.layers[l].w_b, o.m.layers[l].w_b, o.v.layers[l].w_b);
  }
}

template <typename T>
void apply_update(SoftNetwork<T>& net, NetGrads<T>& grads, OptimizerState<T>& opt,
                  const TrainPlan& plan) {
  if (plan.optimizer == Optimizer::kSgd) {
    T lr = T(plan.lr);
    for_each_param(net, grads, opt,
                   [&](std::vector<T>& w, std::vector<T>& g, std::vector<T>&, std::vector<T>&) {
                     for (size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
                   });
    return;
  }
  ++opt.step;
  double bc1 = 1.0 - std::pow(plan.beta1, double(opt.step));
  double bc2 = 1.0 - std::pow(plan.beta2, double(opt.step));
  T b1 = T(plan.beta1), b2 = T(plan.beta2);
  T ob1 = T(1.0 - plan.beta1), ob2 = T(1.0 - plan.beta2);
  for_each_param(
      net, grads, opt,
      [&](std::vector<T>& w, std::vector<T>& g, std::vector<T>& m, std::vector<T>& v) {
        for (size_t i = 0; i < w.size(); ++i) {
          m[i] = b1 * m[i] + ob1 * g[i];
          v[i] = b2 * v[i] + ob2 * g[i] * g[i];
          double mhat = double(m[i]) / bc1;
          double vhat = double(v[i]) / bc2;
          w[i] -= T(plan.lr * mhat / (std::sqrt(vhat) + plan.eps));
        }
      });
}

// Splits [0, n) into pool-size contiguous chunks; returns [begin, end) for w.
inline std::pair<int, int> worker_slice(int n, int workers, int w) {
  int chunk = (n + workers - 1) / workers;
  int begin = std::min(n, w * chunk);
  return {begin, std::min(n, begin + chunk)};
}

template <typename T>
int argmax_lowest(const T* v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;  // strict: ties keep the lowest index
  return best;
}

}  // namespace detail

// Relaxed-network class predictions, sample-parallel.
template <typename T>
std::vector<int> predict_soft(const SoftNetwork<T>& net, const BitDataset& data,
                              WorkerPool* pool = nullptr) {
  if (data.input_width != net.input_width)
    throw ShapeError("predict: dataset width " + std::to_string(data.input_width) +
                     " != network input width " + std::to_string(net.input_width));
  NetworkProbs<T> probs;
  compute_probs(net, probs);
  int n = data.n_samples();
  std::vector<int> pred(static_cast<size_t>(n));
  int workers = pool ? pool->size() : 1;
  auto body = [&](int w) {
    auto [begin, end] = detail::worker_slice(n, workers, w);
    ForwardTrace<T> trace;
    std::vector<T> x(size_t(net.input_width));
    for (int s = begin; s < end; ++s) {
      data.expand(s, x.data());
      forward(net, probs, x.data(), trace);
      pred[size_t(s)] = detail::argmax_lowest(trace.scores.data(), net.n_classes);
    }
  };
  if (pool)
    pool->run(body);
  else
    body(0);
  return pred;
}

template <typename T>
std::vector<int> predict_hard(const SoftNetwork<T>& net, const BitDataset& data) {
  HardNetwork hard = discretize(net);
  return eval_hard(hard, data.pack());
}

inline double accuracy_against(const std::vector<int>& pred, const BitDataset& data) {
  int correct = 0;
  for (int s = 0; s < data.n_samples(); ++s)
    if (pred[size_t(s)] == int(data.labels[size_t(s)])) ++correct;
  return double(correct) / double(data.n_samples());
}

enum class EvalMode { kSoft, kHard };

template <typename T>
double evaluate(const SoftNetwork<T>& net, const BitDataset& data, EvalMode mode,
                WorkerPool* pool = nullptr) {
  if (data.n_samples() == 0) throw DataError("evaluate: empty dataset");
  std::vector<int> pred =
      mode == EvalMode::kSoft ? predict_soft(net, data, pool) : predict_hard(net, data);
  return accuracy_against(pred, data);
}

// Smallest softmax peak (max probability) over all gate-type rows and all
// connection rows, per layer. After annealing both should be near 1.
struct LayerPeaks {
  double gate = 1, conn = 1;
};

template <typename T>
std::vector<LayerPeaks> softmax_peaks(const SoftNetwork<T>& net) {
  NetworkProbs<T> probs;
  compute_probs(net, probs);
  std::vector<LayerPeaks> out(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const LayerProbs<T>& lp = probs.layers[l];
    int w = net.layers[l].width;
    int nc = net.layers[l].conn.n_candidates;
    for (int k = 0; k < w; ++k) {
      const T* pg = lp.p_g.data() + size_t(k) * kNumOps;
      out[l].gate = std::min(out[l].gate, double(*std::max_element(pg, pg + kNumOps)));
      const T* pa = lp.p_a.data() + size_t(k) * nc;
      const T* pb = lp.p_b.data() + size_t(k) * nc;
      out[l].conn = std::min(out[l].conn, double(*std::max_element(pa, pa + nc)));
      out[l].conn = std::min(out[l].conn, double(*std::max_element(pb, pb + nc)));
    }
  }
  return out;
}

// Shuffled mini-batch training with per-epoch temperature annealing. Epochs
// are 1-indexed and resume from state.epochs_done + 1, so a reloaded state
// continues exactly where it stopped: the shuffle order of epoch e depends
// only on (seed, e). Per-epoch metrics go to on_epoch as they complete.
template <typename T>
std::vector<EpochMetrics> train(TrainState<T>& state, const TrainPlan& plan,
                                const BitDataset& train_data, const BitDataset& test_data,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  plan.validate();
  SoftNetwork<T>& net = state.net;
  if (train_data.input_width != net.input_width)
    throw ShapeError("train: dataset width " + std::to_string(train_data.input_width) +
                     " != network input width " + std::to_string(net.input_width));
  if (train_data.n_samples() == 0) throw DataError("train: empty training set");
  if (state.opt.m.layers.empty()) state.opt.resize(net);

  int n = train_data.n_samples();
  WorkerPool pool(plan.threads);
  int workers = pool.size();

  struct WorkerCtx {
    NetGrads<T> grads;
    ForwardTrace<T> trace;
    BackwardScratch<T> scratch;
    std::vector<T> x;
    double loss_sum = 0;
    int correct = 0;
    std::exception_ptr error;
  };
  std::vector<WorkerCtx> ctx(static_cast<size_t>(workers));
  for (auto& c : ctx) {
    c.grads.resize(net);
    c.x.resize(size_t(net.input_width));
  }
  NetGrads<T> grads;
  grads.resize(net);
  NetworkProbs<T> probs;
  std::vector<uint32_t> order(static_cast<size_t>(n));

  std::vector<EpochMetrics> history;
  for (int epoch = state.epochs_done + 1; epoch <= plan.epochs; ++epoch) {
    double t_c = plan.sched_c.at(epoch);
    double t_g = plan.sched_g.at(epoch);
    set_temperatures(net, t_g, t_c);

    // The batch order must be a pure function of (seed, epoch) — an in-place
    // shuffle of the previous epoch's order would make epoch N depend on the
    // whole history and break bit-exact resume from a checkpoint.
    std::iota(order.begin(), order.end(), 0u);
    std::mt19937 shuffle_rng(uint32_t(splitmix64(mix_seed(plan.seed, uint64_t(epoch)))));
    shuffle_fisher_yates(order, shuffle_rng);

    double epoch_loss = 0;
    int epoch_correct = 0;
    for (int start = 0; start < n; start += plan.batch_size) {
      int bn = std::min(plan.batch_size, n - start);
      compute_probs(net, probs);
      auto body = [&](int w) {
        WorkerCtx& c = ctx[size_t(w)];
        try {
          auto [begin, end] = detail::worker_slice(bn, workers, w);
          c.grads.clear();
          c.loss_sum = 0;
          c.correct = 0;
          for (int i = begin; i < end; ++i) {
            int s = int(order[size_t(start + i)]);
            int label = int(train_data.labels[size_t(s)]);
            train_data.expand(s, c.x.data());
            forward(net, probs, c.x.data(), c.trace);
            auto [loss, dscores] = cross_entropy_loss(c.trace.scores, label);
            if (!std::isfinite(double(loss)))
              throw NumericError("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch));
            c.loss_sum += double(loss);
            if (detail::argmax_lowest(c.trace.scores.data(), net.n_classes) == label) ++c.correct;
            backward(net, probs, c.trace, c.x.data(), dscores.data(), c.grads, c.scratch);
          }
        } catch (...) {
          c.error = std::current_exception();
        }
      };
      pool.run(body);
      for (auto& c : ctx)
        if (c.error) std::rethrow_exception(c.error);

      grads.clear();
      for (auto& c : ctx) {
        grads.add(c.grads);
        epoch_loss += c.loss_sum;
        epoch_correct += c.correct;
      }
      grads.scale(T(1) / T(bn));
      detail::apply_update(net, grads, state.opt, plan);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.t_c = t_c;
    m.t_g = t_g;
    m.train_loss = epoch_loss / double(n);
    m.train_accuracy = double(epoch_correct) / double(n);
    if (test_data.n_samples() > 0) {
      std::vector<int> soft = predict_soft(net, test_data, &pool);
      std::vector<int> hard = predict_hard(net, test_data);
      m.test_accuracy = accuracy_against(soft, test_data);
      m.test_accuracy_hard = accuracy_against(hard, test_data);
      int agree = 0;
      for (size_t i = 0; i < soft.size(); ++i)
        if (soft[i] == hard[i]) ++agree;
      m.agreement = double(agree) / double(soft.size());
    }
    state.epochs_done = epoch;
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

}  // namespace lgn
