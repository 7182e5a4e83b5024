// lgn — train, evaluate, discretize, and export logic gate networks.
//
// Subcommands: train, eval, export, fetch, gen-yinyang, report. Exit codes:
// 2 bad configuration, 3 data problems (files, formats, shapes), 4 numeric
// divergence, 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "lgn/checkpoint.hpp"
#include "lgn/config.hpp"
#include "lgn/data.hpp"
#include "lgn/fetch.hpp"
#include "lgn/metrics.hpp"
#include "lgn/model.hpp"
#include "lgn/netlist.hpp"
#include "lgn/runner.hpp"
#include "lgn/train.hpp"

namespace fs = std::filesystem;
using namespace lgn;

namespace {

void print_epoch(const EpochMetrics& m) {
  std::printf(
      "epoch %3d  loss %.4f  train %.4f  test %.4f  hard %.4f  agree %.4f  Tc %.2e Tg %.2e\n",
      m.epoch, m.train_loss, m.train_accuracy, m.test_accuracy, m.test_accuracy_hard,
      m.agreement, m.t_c, m.t_g);
  std::fflush(stdout);
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& resume) {
  RunConfig cfg = assemble_config(config_path, sets);

  TrainState<float> state;
  uint64_t seed = cfg.seed;
  std::string provenance;
  if (!resume.empty()) {
    CheckpointMeta meta;
    std::tie(state, meta) = load_checkpoint(resume);
    seed = meta.seed;  // the original run's streams, not the config's
    provenance = meta.provenance;
  }

  BitDataset train_ds = load_split(cfg, seed, true);
  BitDataset test_ds = load_split(cfg, seed, false);

  if (resume.empty()) {
    Architecture arch = cfg.architecture(train_ds.input_width, train_ds.n_classes);
    state.net = build_network<float>(arch, mix_seed(seed, kSeedNetwork));
    provenance = train_ds.provenance;
  } else if (provenance != train_ds.provenance) {
    throw DataError("resume: checkpoint was trained on '" + provenance +
                    "' but config provides '" + train_ds.provenance + "'");
  }
  if (state.net.input_width != train_ds.input_width)
    throw ShapeError("network input width " + std::to_string(state.net.input_width) +
                     " != dataset width " + std::to_string(train_ds.input_width));

  TrainPlan plan = cfg.plan;
  plan.seed = mix_seed(seed, kSeedShuffle);

  MetricsWriter metrics;
  if (!cfg.out_metrics.empty()) {
    metrics.open(cfg.out_metrics);
    metrics.run_info(cfg.dataset, cfg.arch_widths, cfg.arch_nc, train_ds.n_classes,
                     plan.epochs, plan.lr, plan.batch_size, seed);
  }

  train<float>(state, plan, train_ds, test_ds, [&](const EpochMetrics& m) {
    print_epoch(m);
    metrics.epoch(m);
  });

  WorkerPool pool(plan.threads);
  double soft = evaluate(state.net, test_ds, EvalMode::kSoft, &pool);
  double hard = evaluate(state.net, test_ds, EvalMode::kHard, &pool);
  std::printf("final: soft %.4f  hard %.4f  (gap %.2f pp)\n", soft, hard,
              (soft - hard) * 100.0);
  std::vector<LayerPeaks> peaks = softmax_peaks(state.net);
  for (size_t l = 0; l < peaks.size(); ++l)
    std::printf("layer %zu min softmax peak: gate %.6f  conn %.6f\n", l,
                peaks[l].gate, peaks[l].conn);

  if (!cfg.out_checkpoint.empty()) {
    save_checkpoint(cfg.out_checkpoint, state, CheckpointMeta{seed, provenance});
    std::printf("checkpoint written to %s\n", cfg.out_checkpoint.c_str());
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             const std::vector<std::string>& sets, bool hard, const std::string& split) {
  RunConfig cfg = assemble_config(config_path, sets);
  auto [state, meta] = load_checkpoint(checkpoint);
  BitDataset ds = load_split(cfg, meta.seed, split == "train");
  WorkerPool pool(cfg.plan.threads);
  double acc = evaluate(state.net, ds, hard ? EvalMode::kHard : EvalMode::kSoft, &pool);
  std::printf("%s %s accuracy %.4f\n", hard ? "hard" : "soft", split.c_str(), acc);
  return 0;
}

int cmd_export(const std::string& checkpoint, const std::string& out, bool optimize) {
  auto [state, meta] = load_checkpoint(checkpoint);
  HardNetwork hard = discretize(state.net);
  std::printf("gates per layer (pre-optimization):");
  for (const auto& l : hard.layers) std::printf(" %zu", l.size());
  std::printf("  total %zu\n", hard.gate_count());

  const HardNetwork* to_write = &hard;
  HardNetwork optimized;
  if (optimize) {
    optimized = optimize_netlist(hard);
    std::printf("gates per layer (post-optimization):");
    for (const auto& l : optimized.layers) std::printf(" %zu", l.size());
    std::printf("  total %zu\n", optimized.gate_count());
    to_write = &optimized;
  }

  std::ofstream f(out, std::ios::trunc);
  if (!f) throw DataError("cannot write netlist " + out);
  export_netlist(*to_write, f);
  if (!f) throw DataError("short write to netlist " + out);
  std::printf("netlist written to %s\n", out.c_str());
  return 0;
}

std::vector<uint8_t> http_get(const std::string& url) {
  size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw DataError("fetch: malformed url " + url);
  size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) throw DataError("fetch: malformed url " + url);
  httplib::Client cli(url.substr(0, slash));
  cli.set_follow_location(true);
  cli.set_connection_timeout(30, 0);
  cli.set_read_timeout(300, 0);
  auto res = cli.Get(url.substr(slash));
  if (!res)
    throw DataError("fetch: request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw DataError("fetch: " + url + " returned status " + std::to_string(res->status));
  return std::vector<uint8_t>(res->body.begin(), res->body.end());
}

int cmd_fetch(const std::string& dataset, const std::string& dir_flag) {
  RunConfig cfg;
  cfg.data_dir = dir_flag;
  std::string dir = data_root(cfg) + "/" + dataset;
  fs::create_directories(dir);
  FetchReport report = fetch_dataset(dataset, dir, http_get);
  std::printf("%s: %d file(s) downloaded, %d already present in %s\n", dataset.c_str(),
              report.downloaded, report.already_present, dir.c_str());
  return 0;
}

int cmd_gen_yinyang(const std::string& out_dir, int n_train, int n_test, uint64_t seed,
                    int classes, int bits, const std::string& encoding) {
  if (classes < 3 || classes > 4) throw ConfigError("gen-yinyang: classes must be 3 or 4");
  if (bits < 1 || bits > 16) throw ConfigError("gen-yinyang: bits must be in [1, 16]");
  CoordEncoding enc =
      encoding == "thermometer" ? CoordEncoding::kThermometer : CoordEncoding::kBinary;
  fs::create_directories(out_dir);
  auto emit = [&](const char* split, int n, uint64_t data_seed) {
    auto pts = generate_yinyang(n, data_seed, 0.1, 0.5, classes);
    BitDataset ds = yinyang_bits(pts, classes, bits, enc);
    std::vector<uint8_t> inputs(size_t(n) * ds.input_width);
    for (int s = 0; s < n; ++s)
      for (int i = 0; i < ds.input_width; ++i)
        inputs[size_t(s) * ds.input_width + i] = ds.bit(s, i) ? 1 : 0;
    std::string base = out_dir + "/yinyang-" + split;
    write_idx_file(base + "-inputs-idx2-ubyte",
                   {uint32_t(n), uint32_t(ds.input_width)}, inputs);
    write_idx_file(base + "-labels-idx1-ubyte", {uint32_t(n)}, ds.labels);
    std::printf("%s: %d samples x %d bits -> %s-{inputs,labels}\n", split, n, ds.input_width,
                base.c_str());
  };
  emit("train", n_train, mix_seed(seed, kSeedTrainData));
  emit("test", n_test, mix_seed(seed, kSeedTestData));
  return 0;
}

int cmd_report(const std::string& config_path, const std::vector<std::string>& sets,
               const std::vector<int>& depths, const std::string& out) {
  RunConfig base = assemble_config(config_path, sets);
  BitDataset train_ds = load_split(base, base.seed, true);
  BitDataset test_ds = load_split(base, base.seed, false);

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out.empty()) {
    file.open(out, std::ios::trunc);
    if (!file) throw DataError("cannot write report " + out);
    os = &file;
  }
  *os << "layers\tgates\tsoft_accuracy\thard_accuracy\n";

  for (int depth : depths) {
    if (depth < 1) throw ConfigError("report: layer counts must be >= 1");
    RunConfig cfg = base;
    int width = base.arch_widths.back();
    int nc_rest = base.arch_nc.back();
    cfg.arch_widths.assign(size_t(depth), width);
    cfg.arch_nc.assign(size_t(depth), nc_rest);
    cfg.arch_nc[0] = base.arch_nc[0];
    validate_config(cfg);

    std::fprintf(stderr, "report: training %d layer(s) of %d gates...\n", depth, width);
    TrainState<float> state;
    Architecture arch = cfg.architecture(train_ds.input_width, train_ds.n_classes);
    state.net = build_network<float>(arch, mix_seed(cfg.seed, kSeedNetwork));
    TrainPlan plan = cfg.plan;
    plan.seed = mix_seed(cfg.seed, kSeedShuffle);
    train<float>(state, plan, train_ds, test_ds, [](const EpochMetrics&) {});

    WorkerPool pool(plan.threads);
    double soft = evaluate(state.net, test_ds, EvalMode::kSoft, &pool);
    double hard = evaluate(state.net, test_ds, EvalMode::kHard, &pool);
    *os << depth << '\t' << size_t(depth) * size_t(width) << '\t' << format_real(soft) << '\t'
        << format_real(hard) << '\n';
    os->flush();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"logic gate network trainer"};
  app.require_subcommand(1);

  std::string config_path, resume, checkpoint, out, split = "test", dataset, dir, encoding =
      "binary";
  std::vector<std::string> sets;
  std::vector<int> depths;
  bool hard = false, optimize = false;
  int n_train = 200000, n_test = 10000, classes = 3, bits = 12;
  uint64_t seed = 1;

  CLI::App* t = app.add_subcommand("train", "train a network from a config");
  t->add_option("--config", config_path, "config file");
  t->add_option("--set", sets, "override a config key (key=value)");
  t->add_option("--resume", resume, "continue training from a checkpoint");

  CLI::App* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  e->add_option("--config", config_path, "config file describing the dataset");
  e->add_option("--set", sets, "override a config key (key=value)");
  e->add_flag("--hard", hard, "discretize before evaluating");
  e->add_option("--split", split, "test or train")->check(CLI::IsMember({"test", "train"}));

  CLI::App* x = app.add_subcommand("export", "discretize a checkpoint to a netlist");
  x->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  x->add_option("--out", out, "netlist output path")->required();
  x->add_flag("--optimize", optimize, "run netlist optimization before exporting");

  CLI::App* f = app.add_subcommand("fetch", "download a dataset and verify checksums");
  f->add_option("--dataset", dataset, "mnist or fashion")->required();
  f->add_option("--dir", dir, "data directory root (default $LGN_DATA_DIR or ./data)");

  CLI::App* g = app.add_subcommand("gen-yinyang", "write the yin-yang set as IDX files");
  g->add_option("--out-dir", out, "output directory")->required();
  g->add_option("--n", n_train, "training samples");
  g->add_option("--test-n", n_test, "test samples");
  g->add_option("--seed", seed, "generator seed");
  g->add_option("--classes", classes, "3 (yin/yang/dots) or 4 (dots split)");
  g->add_option("--bits", bits, "bits per coordinate");
  g->add_option("--encoding", encoding, "binary or thermometer")
      ->check(CLI::IsMember({"binary", "thermometer"}));

  CLI::App* r = app.add_subcommand("report", "train at several depths, tabulate accuracy");
  r->add_option("--config", config_path, "base config file")->required();
  r->add_option("--set", sets, "override a config key (key=value)");
  r->add_option("--layers", depths, "comma-separated layer counts")
      ->required()
      ->delimiter(',');
  r->add_option("--out", out, "write the table here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed()) return cmd_train(config_path, sets, resume);
    if (e->parsed()) return cmd_eval(checkpoint, config_path, sets, hard, split);
    if (x->parsed()) return cmd_export(checkpoint, out, optimize);
    if (f->parsed()) return cmd_fetch(dataset, dir);
    if (g->parsed()) return cmd_gen_yinyang(out, n_train, n_test, seed, classes, bits, encoding);
    if (r->parsed()) return cmd_report(config_path, sets, depths, out);
  } catch (const ConfigError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  } catch (const NumericError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 4;
  } catch (const DataError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 3;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 3;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
