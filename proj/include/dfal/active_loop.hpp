#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dfal/attacks.hpp"
#include "dfal/data.hpp"
#include "dfal/nn.hpp"
#include "dfal/strategies.hpp"

namespace dfal {

struct LabeledIndex {
  std::size_t index;
  std::size_t label;
  friend bool operator==(const LabeledIndex&, const LabeledIndex&) = default;
};

/// Labeled and unlabeled dataset indices (both kept sorted) plus the
/// synthetic training items, which live outside the index universe.
struct PoolState {
  std::vector<LabeledIndex> labeled;
  std::vector<std::size_t> unlabeled;
  std::vector<SyntheticItem> synthetic;

  bool is_labeled(std::size_t index) const;
  bool is_unlabeled(std::size_t index) const;
};

struct BudgetLedger {
  std::size_t annotations_used = 0;
  std::size_t training_set_size = 0;
  /// CEAL pseudo-labeled items in the current training set.
  std::size_t pseudo_additions = 0;
  /// Pseudo-labeled items whose label differs from the ground truth.
  std::size_t corrupted_pseudo = 0;
  friend bool operator==(const BudgetLedger&, const BudgetLedger&) = default;
};

struct RoundRecord {
  std::size_t round = 0;
  std::size_t annotations_used = 0;
  std::size_t training_set_size = 0;
  double test_accuracy = 0.0;
  /// Selection performed after this round's training; 0 for the last round.
  double selection_seconds = 0.0;
  double train_seconds = 0.0;
  std::size_t pseudo_corruptions = 0;
};

struct StrategyParams {
  double ceal_delta = 0.05;
  std::size_t bald_samples = 10;
};

struct TrainSchedule {
  AdamConfig adam;
  std::size_t batch_size = 32;
  /// Optimizer steps per round; epochs = ceil(base_steps * batch / |L|).
  std::size_t base_steps = 2000;
};

struct ActiveConfig {
  std::size_t candidates = 200;  // K
  std::size_t n_query = 10;
  std::size_t budget = 1020;  // N, total annotations
  std::size_t initial_labeled = 20;
  StrategyId strategy = StrategyId::dfal;
  StrategyParams params;
  AttackConfig attack;
  TrainSchedule train;
  std::uint64_t seed = 0;
  Execution exec = Execution::parallel;

  void validate(std::size_t class_count) const;
};

/// Oracle label lookup, simulated from dataset ground truth.
using Oracle = std::function<std::size_t(std::size_t)>;

/// Stratified initial labeled set: floor(n / C) per class, the remainder
/// drawn at random from the rest. Throws InvalidInput when n < C or n
/// exceeds the dataset.
PoolState init_pools(const Dataset& data, std::size_t initial_labeled, std::uint64_t seed);

/// S_k: min(K, |U|) distinct unlabeled indices, sampled uniformly, sorted.
std::vector<std::size_t> sample_candidates(const PoolState& pools, std::size_t k,
                                           std::uint64_t round_seed);

/// Moves queried indices to the labeled set with oracle labels, labels the
/// adversarial twins with their source's oracle label, and replaces the
/// previous pseudo-labeled set with the batch's. Throws InvariantViolation
/// when a queried index is not unlabeled.
BudgetLedger apply_query(PoolState& pools, BudgetLedger ledger, const QueryBatch& batch,
                         const Oracle& oracle);

/// Training examples for the current state: real labeled items then
/// synthetic items.
std::vector<TrainingExample> training_set(const PoolState& pools, const Dataset& data);

/// Builds the candidate pool for the given indices.
CandidatePool make_pool(const Dataset& data, std::span<const std::size_t> indices);

/// Network factory for a round: returns an untrained network.
using NetworkFactory = std::function<Network()>;

/// Called after every round's training and evaluation, before selection.
using RoundObserver = std::function<void(const PoolState&, std::span<const TrainingExample>,
                                         RoundRecord&)>;

/// Runs the query loop: retrain from scratch, evaluate, sample S_k, select,
/// query, until the annotation budget is spent or the pool is exhausted.
std::vector<RoundRecord> run_active_learning(const ActiveConfig& cfg, const Dataset& train,
                                             const Dataset& test, const NetworkFactory& factory,
                                             const RoundObserver& observer = {});

/// One round's selection for any strategy.
QueryBatch select_queries(const ActiveConfig& cfg, const Network& net, const PoolState& pools,
                          const Dataset& data, std::size_t n_query, std::uint64_t round_seed);

}  // namespace dfal
