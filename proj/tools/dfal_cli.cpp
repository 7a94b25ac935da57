// dfal: run active-learning experiments and summarize their metrics.
//
//   dfal run      --config PATH [--out DIR] [--seeds LIST]
//   dfal compare  METRICS [--checkpoints LIST] [--target ACC] [--out DIR]
//   dfal transfer --config PATH --selector ARCH --consumer ARCH [--out DIR] [--seeds LIST]
//   dfal timing   --config PATH --sizes LIST [--out DIR]

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfal/errors.hpp"
#include "dfal/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::string metrics;
  std::vector<std::size_t> checkpoints{100, 500, 800, 1000};
  double target = 0.95;
  std::string selector;
  std::string consumer;
  std::vector<std::size_t> sizes;
};

dfal::ExperimentConfig load(const Options& opt) {
  auto cfg = dfal::load_experiment_config(opt.config);
  if (!opt.out.empty()) cfg.out_dir = opt.out;
  if (!opt.seeds.empty()) cfg.seeds = opt.seeds;
  dfal::validate_experiment_config(cfg);
  return cfg;
}

int fail(const std::string& code, const std::string& message) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << "dfal: error[" << code << "]: " << line << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning with DeepFool-based query selection"};
  app.require_subcommand(1);
  Options opt;

  auto* run = app.add_subcommand("run", "run every (strategy, seed) pair and write metrics.csv");
  run->add_option("--config", opt.config, "experiment config (INI)")->required();
  run->add_option("--out", opt.out, "output directory");
  run->add_option("--seeds", opt.seeds, "seed list, overrides the config")->delimiter(',');

  auto* compare = app.add_subcommand("compare", "summarize a metrics file");
  compare->add_option("metrics", opt.metrics, "metrics.csv written by run")->required();
  compare->add_option("--checkpoints", opt.checkpoints, "annotation counts")->delimiter(',');
  compare->add_option("--target", opt.target, "accuracy to reach")->check(CLI::Range(0.0, 1.0));
  compare->add_option("--out", opt.out, "also write summary.csv here");

  auto* transfer = app.add_subcommand("transfer", "select with one architecture, train another");
  transfer->add_option("--config", opt.config, "experiment config (INI)")->required();
  transfer->add_option("--selector", opt.selector, "selecting architecture")->required();
  transfer->add_option("--consumer", opt.consumer, "consuming architecture")->required();
  transfer->add_option("--out", opt.out, "output directory");
  transfer->add_option("--seeds", opt.seeds, "seed list, overrides the config")->delimiter(',');

  auto* timing = app.add_subcommand("timing", "selection time per labeled-set size");
  timing->add_option("--config", opt.config, "experiment config (INI)")->required();
  timing->add_option("--sizes", opt.sizes, "ascending labeled-set sizes")
      ->delimiter(',')
      ->required();
  timing->add_option("--out", opt.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (run->parsed()) {
      std::cout << dfal::cmd_run(load(opt)).string() << '\n';
    } else if (compare->parsed()) {
      const auto table = dfal::cmd_compare(opt.metrics, opt.checkpoints, opt.target);
      dfal::write_summary_csv(table, std::cout);
      if (!opt.out.empty()) {
        std::filesystem::create_directories(opt.out);
        std::ofstream out(std::filesystem::path(opt.out) / "summary.csv");
        dfal::write_summary_csv(table, out);
      }
    } else if (transfer->parsed()) {
      const auto selector = dfal::parse_arch(opt.selector);
      const auto consumer = dfal::parse_arch(opt.consumer);
      std::cout << dfal::cmd_transfer(load(opt), selector, consumer).string() << '\n';
    } else if (timing->parsed()) {
      std::cout << dfal::cmd_timing(load(opt), opt.sizes).string() << '\n';
    }
  } catch (const dfal::FormatError& e) {
    return fail(e.code(), std::string(e.what()) + " (at " + std::to_string(e.position()) + ")");
  } catch (const dfal::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
