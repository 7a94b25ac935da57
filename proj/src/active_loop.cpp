#include "dfal/active_loop.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "dfal/errors.hpp"
#include "dfal/seed.hpp"

namespace dfal {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

enum SeedStream : std::uint64_t { kPools = 1, kCandidates, kSelection, kShuffle };

void check_ledger(const ActiveConfig& cfg, const BudgetLedger& ledger, const PoolState& pools,
                  const Dataset& data) {
  const std::size_t real = pools.labeled.size();
  for (const auto& l : pools.labeled)
    if (l.label != data.labels.at(l.index))
      throw InvariantViolation("labeled index " + std::to_string(l.index) +
                               " does not carry its ground-truth label");
  if (real + pools.unlabeled.size() != data.size())
    throw InvariantViolation("labeled and unlabeled sets no longer cover the pool");
  if (ledger.annotations_used != real)
    throw InvariantViolation("annotations_used " + std::to_string(ledger.annotations_used) +
                             " differs from labeled count " + std::to_string(real));
  if (ledger.training_set_size != real + pools.synthetic.size())
    throw InvariantViolation("training_set_size out of sync with the pool state");
  switch (cfg.strategy) {
    case StrategyId::dfal:
      if (ledger.training_set_size != cfg.initial_labeled + 2 * (real - cfg.initial_labeled))
        throw InvariantViolation("DFAL training set is not initial + 2 x queried");
      break;
    case StrategyId::ceal:
      break;
    default:
      if (ledger.training_set_size != ledger.annotations_used)
        throw InvariantViolation("training set grew beyond the annotations");
  }
}

}  // namespace

bool PoolState::is_labeled(std::size_t index) const {
  return std::binary_search(labeled.begin(), labeled.end(), LabeledIndex{index, 0},
                            [](const LabeledIndex& a, const LabeledIndex& b) { return a.index < b.index; });
}

bool PoolState::is_unlabeled(std::size_t index) const {
  return std::binary_search(unlabeled.begin(), unlabeled.end(), index);
}

void ActiveConfig::validate(std::size_t class_count) const {
  if (n_query == 0) throw InvalidInput("n_query must be positive");
  if (n_query > candidates) throw InvalidInput("n_query must not exceed the candidate pool size K");
  if (initial_labeled < class_count)
    throw InvalidInput("initial_labeled must be at least the class count (" +
                       std::to_string(class_count) + ")");
  if (budget < initial_labeled) throw InvalidInput("budget must be at least initial_labeled");
  if (train.base_steps == 0) throw InvalidInput("base_steps must be positive");
  if (strategy == StrategyId::ceal && !(params.ceal_delta >= 0.0))
    throw InvalidInput("ceal_delta must be nonnegative");
  if (strategy == StrategyId::bald && params.bald_samples < 2)
    throw InvalidInput("bald_samples must be at least 2");
  TrainConfig{train.adam, train.batch_size, 1, 0}.validate();
  attack.validate();
}

PoolState init_pools(const Dataset& data, std::size_t initial_labeled, std::uint64_t seed) {
  if (initial_labeled < data.class_count)
    throw InvalidInput("initial_labeled " + std::to_string(initial_labeled) +
                       " is below the class count " + std::to_string(data.class_count));
  if (initial_labeled > data.size())
    throw InvalidInput("initial_labeled exceeds the dataset size");

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(data.class_count);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
  const std::size_t per_class = initial_labeled / data.class_count;

  std::vector<char> chosen(data.size(), 0);
  std::size_t count = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < std::min(per_class, members.size()); ++j) {
      chosen[members[j]] = 1;
      ++count;
    }
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!chosen[i]) rest.push_back(i);
  std::shuffle(rest.begin(), rest.end(), rng);
  for (std::size_t j = 0; count < initial_labeled; ++j, ++count) chosen[rest[j]] = 1;

  PoolState pools;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (chosen[i]) {
      pools.labeled.push_back({i, data.labels[i]});
    } else {
      pools.unlabeled.push_back(i);
    }
  }
  return pools;
}

std::vector<std::size_t> sample_candidates(const PoolState& pools, std::size_t k,
                                           std::uint64_t round_seed) {
  std::vector<std::size_t> sample = pools.unlabeled;
  if (k < sample.size()) {
    std::mt19937_64 rng(round_seed);
    // Partial Fisher-Yates: the first k slots become a uniform sample.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, sample.size() - 1);
      std::swap(sample[i], sample[pick(rng)]);
    }
    sample.resize(k);
  }
  std::sort(sample.begin(), sample.end());
  return sample;
}

BudgetLedger apply_query(PoolState& pools, BudgetLedger ledger, const QueryBatch& batch,
                         const Oracle& oracle) {
  if (batch.annotations_charged != batch.queried.size())
    throw InvariantViolation("query batch charges " + std::to_string(batch.annotations_charged) +
                             " annotations for " + std::to_string(batch.queried.size()) + " queries");
  std::vector<std::size_t> queried = batch.queried;
  std::sort(queried.begin(), queried.end());
  if (std::adjacent_find(queried.begin(), queried.end()) != queried.end())
    throw InvariantViolation("query batch repeats an index");
  for (std::size_t idx : queried)
    if (!pools.is_unlabeled(idx))
      throw InvariantViolation("queried index " + std::to_string(idx) + " is not unlabeled");

  for (std::size_t idx : queried) {
    pools.unlabeled.erase(std::lower_bound(pools.unlabeled.begin(), pools.unlabeled.end(), idx));
    const LabeledIndex item{idx, oracle(idx)};
    pools.labeled.insert(std::lower_bound(pools.labeled.begin(), pools.labeled.end(), item,
                                          [](const LabeledIndex& a, const LabeledIndex& b) {
                                            return a.index < b.index;
                                          }),
                         item);
  }
  ledger.annotations_used += queried.size();

  // The pseudo-labeled set is rebuilt from each round's model.
  std::erase_if(pools.synthetic,
                [](const SyntheticItem& s) { return s.provenance == Provenance::ceal_pseudo; });
  ledger.pseudo_additions = 0;
  ledger.corrupted_pseudo = 0;

  for (const SyntheticItem& s : batch.synthetic_additions) {
    SyntheticItem item = s;
    if (item.provenance == Provenance::adversarial_twin) {
      if (!std::binary_search(queried.begin(), queried.end(), item.source_index))
        throw InvariantViolation("adversarial twin source " + std::to_string(item.source_index) +
                                 " was not queried");
      const std::size_t truth = oracle(item.source_index);
      if (item.label && *item.label != truth)
        throw InvariantViolation("adversarial twin label differs from its source label");
      item.label = truth;
    } else {
      if (!item.label) throw InvariantViolation("pseudo-labeled item has no label");
      ++ledger.pseudo_additions;
      if (*item.label != oracle(item.source_index)) ++ledger.corrupted_pseudo;
    }
    pools.synthetic.push_back(std::move(item));
  }
  ledger.training_set_size = pools.labeled.size() + pools.synthetic.size();
  return ledger;
}

std::vector<TrainingExample> training_set(const PoolState& pools, const Dataset& data) {
  std::vector<TrainingExample> out;
  out.reserve(pools.labeled.size() + pools.synthetic.size());
  for (const auto& l : pools.labeled) out.push_back({data.inputs.at(l.index), l.label});
  for (const auto& s : pools.synthetic) {
    if (!s.label) throw InvariantViolation("synthetic training item without a label");
    out.push_back({s.input, *s.label});
  }
  return out;
}

CandidatePool make_pool(const Dataset& data, std::span<const std::size_t> indices) {
  CandidatePool pool;
  pool.reserve(indices.size());
  for (std::size_t i : indices) pool.push_back({i, data.inputs.at(i)});
  return pool;
}

QueryBatch select_queries(const ActiveConfig& cfg, const Network& net, const PoolState& pools,
                          const Dataset& data, std::size_t n_query, std::uint64_t round_seed) {
  const std::uint64_t selection_seed = derive_seed(round_seed, {kSelection});
  switch (cfg.strategy) {
    case StrategyId::uncertainty:
      return select_uncertainty(net, make_pool(data, pools.unlabeled), n_query, cfg.exec);
    case StrategyId::ceal:
      return select_ceal(net, make_pool(data, pools.unlabeled), n_query, cfg.params.ceal_delta,
                         cfg.exec);
    case StrategyId::random:
      return select_random(make_pool(data, pools.unlabeled), n_query, selection_seed);
    default:
      break;
  }
  const auto candidates = sample_candidates(pools, cfg.candidates, derive_seed(round_seed, {kCandidates}));
  const CandidatePool pool = make_pool(data, candidates);
  switch (cfg.strategy) {
    case StrategyId::dfal:
      return select_dfal(net, pool, n_query, cfg.attack, selection_seed, cfg.exec);
    case StrategyId::egl:
      return select_egl(net, pool, n_query, cfg.exec);
    case StrategyId::bald:
      return select_bald(net, pool, n_query, cfg.params.bald_samples, selection_seed, cfg.exec);
    case StrategyId::coreset: {
      std::vector<std::reference_wrapper<const Tensor>> labeled;
      labeled.reserve(pools.labeled.size());
      for (const auto& l : pools.labeled) labeled.push_back(data.inputs.at(l.index));
      return select_coreset_greedy(net, labeled, pool, n_query, cfg.exec);
    }
    default:
      throw InvariantViolation("unhandled strategy");
  }
}

std::vector<RoundRecord> run_active_learning(const ActiveConfig& cfg, const Dataset& train,
                                             const Dataset& test, const NetworkFactory& factory,
                                             const RoundObserver& observer) {
  train.validate();
  cfg.validate(train.class_count);
  if (test.size() == 0) throw InvalidInput("test set is empty");
  if (cfg.initial_labeled > train.size()) throw InvalidInput("initial_labeled exceeds the pool");

  const Oracle oracle = [&train](std::size_t i) { return train.labels.at(i); };
  PoolState pools = init_pools(train, cfg.initial_labeled, derive_seed(cfg.seed, {kPools}));
  BudgetLedger ledger{pools.labeled.size(), pools.labeled.size(), 0, 0};
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, {kShuffle});

  std::vector<RoundRecord> records;
  for (std::size_t round = 0;; ++round) {
    check_ledger(cfg, ledger, pools, train);
    const auto examples = training_set(pools, train);

    const auto train_start = Clock::now();
    TrainConfig tc{cfg.train.adam, cfg.train.batch_size,
                   epochs_for_steps(cfg.train.base_steps, cfg.train.batch_size, examples.size()),
                   shuffle_seed};
    const Network net = dfal::train(factory(), examples, tc);
    const double train_seconds = seconds_since(train_start);

    RoundRecord record;
    record.round = round;
    record.annotations_used = ledger.annotations_used;
    record.training_set_size = ledger.training_set_size;
    record.test_accuracy = accuracy(net, test, cfg.exec);
    record.train_seconds = train_seconds;
    record.pseudo_corruptions = ledger.corrupted_pseudo;
    if (observer) observer(pools, examples, record);

    const bool done = ledger.annotations_used >= cfg.budget || pools.unlabeled.empty();
    if (!done) {
      const std::size_t n_query = std::min(cfg.n_query, cfg.budget - ledger.annotations_used);
      const std::uint64_t round_seed = derive_seed(cfg.seed, {round});
      const auto select_start = Clock::now();
      const QueryBatch batch = select_queries(cfg, net, pools, train, n_query, round_seed);
      record.selection_seconds = seconds_since(select_start);
      ledger = apply_query(pools, ledger, batch, oracle);
    }
    records.push_back(record);
    if (done) break;
  }
  return records;
}

}  // namespace dfal
