#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dfal/active_loop.hpp"
#include "dfal/data.hpp"
#include "dfal/nn.hpp"
#include "dfal/strategies.hpp"

namespace dfal {

enum class DataSourceKind { synthetic, idx, csv };

struct DataSource {
  DataSourceKind kind = DataSourceKind::synthetic;
  SyntheticSpec synthetic;
  std::size_t class_count = 10;
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::filesystem::path train_csv, test_csv;
  /// Used when no explicit test set is given.
  double test_fraction = 0.2;
  /// Training pool size after stratified subsampling; 0 keeps everything.
  std::size_t pool_cap = 0;
  std::uint64_t split_seed = 0;
};

enum class TimingColumns { measured, zero };

struct ExperimentConfig {
  DataSource data;
  Arch arch = Arch::B;
  /// Strategy and seed fields are overwritten per run group.
  ActiveConfig active;
  std::vector<StrategyId> strategies;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path out_dir = "results";
  TimingColumns timings = TimingColumns::measured;
  std::size_t timing_repetitions = 5;
};

/// Parses the INI-style config; relative paths resolve against base_dir.
/// Throws ConfigError naming every offending field.
ExperimentConfig parse_experiment_config(std::istream& in,
                                         const std::filesystem::path& base_dir = ".");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Checks ranges and referenced files. Throws ConfigError.
void validate_experiment_config(const ExperimentConfig& cfg);

struct PreparedData {
  Dataset train;
  Dataset test;
};
PreparedData prepare_data(const DataSource& source);

/// Seed of the initial weights for one run group; identical across rounds.
std::uint64_t network_seed(std::uint64_t run_seed);
NetworkFactory make_factory(Arch arch, const Dataset& data, std::uint64_t run_seed);

// ---------------------------------------------------------------------------
// Metrics table
// ---------------------------------------------------------------------------

struct MetricsRow {
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t round = 0;
  std::size_t annotations = 0;
  std::size_t labeled_data = 0;
  double test_accuracy = 0.0;
  double selection_seconds = 0.0;
  double train_seconds = 0.0;
  std::size_t pseudo_corruptions = 0;
};

inline constexpr const char* kMetricsHeader =
    "strategy,seed,round,annotations,labeled_data,test_accuracy,selection_seconds,train_seconds,"
    "pseudo_corruptions";

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

/// All (strategy, seed) run groups in config order.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg, const PreparedData& data);

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct StrategySummary {
  std::string strategy;
  std::size_t seeds = 0;
  /// Mean accuracy per checkpoint; empty when below the first round.
  std::vector<std::optional<double>> checkpoint_accuracy;
  /// First round whose seed-mean accuracy reaches the target.
  std::optional<std::size_t> annotations_to_target;
  std::optional<double> labeled_data_to_target;
};

struct SummaryTable {
  std::vector<std::size_t> checkpoints;
  double target_accuracy = 0.0;
  std::vector<StrategySummary> strategies;
};

SummaryTable compare_metrics(const std::vector<MetricsRow>& rows,
                             const std::vector<std::size_t>& checkpoints, double target_accuracy);
void write_summary_csv(const SummaryTable& table, std::ostream& out);

// ---------------------------------------------------------------------------
// Transfer and timing studies
// ---------------------------------------------------------------------------

struct TransferRow {
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t round = 0;
  std::size_t annotations = 0;
  std::size_t labeled_data = 0;
  double selector_accuracy = 0.0;
  double consumer_accuracy = 0.0;
};

inline constexpr const char* kTransferHeader =
    "strategy,seed,round,annotations,labeled_data,selector_accuracy,consumer_accuracy";

/// Selection runs with `selector`; every round the consumer architecture is
/// retrained from scratch on the same training set. RANDOM is always run.
std::vector<TransferRow> run_transfer(const ExperimentConfig& cfg, const PreparedData& data,
                                      Arch selector, Arch consumer);
void write_transfer_csv(const std::vector<TransferRow>& rows, const std::filesystem::path& path);

struct TimingRow {
  std::string strategy;
  std::size_t labeled_size = 0;
  std::size_t repetitions = 0;
  double mean_selection_seconds = 0.0;
};

inline constexpr const char* kTimingHeader =
    "strategy,labeled_size,repetitions,mean_selection_seconds";

/// Mean selection wall time (training excluded) of DFAL and greedy
/// core-set per labeled-set size, with K and n_query from the config.
std::vector<TimingRow> run_timing(const ExperimentConfig& cfg, const PreparedData& data,
                                  const std::vector<std::size_t>& labeled_sizes);
void write_timing_csv(const std::vector<TimingRow>& rows, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

std::filesystem::path cmd_run(const ExperimentConfig& cfg);
SummaryTable cmd_compare(const std::filesystem::path& metrics_path,
                         const std::vector<std::size_t>& checkpoints, double target_accuracy);
std::filesystem::path cmd_transfer(const ExperimentConfig& cfg, Arch selector, Arch consumer);
std::filesystem::path cmd_timing(const ExperimentConfig& cfg,
                                 const std::vector<std::size_t>& labeled_sizes);

}  // namespace dfal
