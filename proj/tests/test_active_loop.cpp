#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dfal/active_loop.hpp"
#include "dfal/errors.hpp"
#include "support.hpp"

using namespace dfal;
using namespace dfal::testing;

namespace {

struct Split {
  Dataset train;
  Dataset test;
};

const Split& small_blobs() {
  static const Split s = [] {
    auto [train, test] = split_and_subsample(gen_blobs({4, 50, 2, 2.0, 0.6, 3}), 0.2, 0, 1);
    return Split{std::move(train), std::move(test)};
  }();
  return s;
}

ActiveConfig quick_config(StrategyId strategy, std::size_t budget = 40) {
  ActiveConfig cfg;
  cfg.strategy = strategy;
  cfg.candidates = 30;
  cfg.n_query = 5;
  cfg.budget = budget;
  cfg.initial_labeled = 8;
  cfg.train.base_steps = 40;
  cfg.seed = 5;
  return cfg;
}

NetworkFactory factory_for(const Dataset& d) {
  return [&d] { return Network(make_arch(Arch::B, d.input_shape, d.class_count, 17)); };
}

Dataset ten_classes() {
  Dataset d = gen_blobs({10, 6, 2, 2.0, 0.1, 2});
  return d;
}

}  // namespace

TEST_CASE("init_pools: stratified, disjoint, deterministic") {
  const Dataset d = ten_classes();
  const PoolState p = init_pools(d, 10, 4);
  std::set<std::size_t> classes;
  for (const auto& l : p.labeled) {
    classes.insert(l.label);
    CHECK(l.label == d.labels[l.index]);
  }
  CHECK(classes.size() == 10);
  CHECK(p.labeled.size() + p.unlabeled.size() == d.size());
  for (const auto& l : p.labeled) CHECK_FALSE(p.is_unlabeled(l.index));
  CHECK(std::is_sorted(p.unlabeled.begin(), p.unlabeled.end()));

  const PoolState q = init_pools(d, 10, 4);
  CHECK(q.labeled == p.labeled);
  CHECK(q.unlabeled == p.unlabeled);

  CHECK(init_pools(d, 13, 1).labeled.size() == 13);
  CHECK_THROWS_AS(init_pools(d, 0, 1), InvalidInput);
  CHECK_THROWS_AS(init_pools(d, 9, 1), InvalidInput);
  CHECK_THROWS_AS(init_pools(d, 61, 1), InvalidInput);
}

TEST_CASE("sample_candidates") {
  const Dataset d = ten_classes();
  const PoolState p = init_pools(d, 10, 4);
  CHECK(sample_candidates(p, 1000, 1) == p.unlabeled);

  const auto s = sample_candidates(p, 12, 7);
  CHECK(s.size() == 12);
  CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 12);
  for (std::size_t i : s) CHECK(p.is_unlabeled(i));
  CHECK(sample_candidates(p, 12, 7) == s);

  // Each of the 50 unlabeled indices should appear with probability 12/50.
  std::map<std::size_t, int> hits;
  const int rounds = 5000;
  for (int r = 0; r < rounds; ++r)
    for (std::size_t i : sample_candidates(p, 12, 100 + r)) ++hits[i];
  const double expect = rounds * 12.0 / 50.0;
  const double sigma = std::sqrt(rounds * (12.0 / 50.0) * (38.0 / 50.0));
  CHECK(hits.size() == 50);
  for (const auto& [i, h] : hits) CHECK(std::abs(h - expect) < 4 * sigma);
}

TEST_CASE("apply_query: set algebra") {
  PoolState p;
  p.labeled = {{0, 0}, {1, 1}};
  p.unlabeled = {2, 3, 4};
  const Oracle oracle = [](std::size_t i) { return i % 2; };
  QueryBatch b;
  b.queried = {3, 2};
  b.annotations_charged = 2;
  const BudgetLedger l = apply_query(p, {2, 2, 0, 0}, b, oracle);
  CHECK(p.labeled == std::vector<LabeledIndex>{{0, 0}, {1, 1}, {2, 0}, {3, 1}});
  CHECK(p.unlabeled == std::vector<std::size_t>{4});
  CHECK(l.annotations_used == 4);
  CHECK(l.training_set_size == 4);
}

TEST_CASE("apply_query: guards") {
  const Oracle oracle = [](std::size_t) { return std::size_t{0}; };
  PoolState p;
  p.labeled = {{0, 0}};
  p.unlabeled = {1, 2};
  QueryBatch dup;
  dup.queried = {1, 1};
  dup.annotations_charged = 2;
  CHECK_THROWS_AS(apply_query(p, {}, dup, oracle), InvariantViolation);
  QueryBatch labeled;
  labeled.queried = {0};
  labeled.annotations_charged = 1;
  CHECK_THROWS_AS(apply_query(p, {}, labeled, oracle), InvariantViolation);
  QueryBatch undercharged;
  undercharged.queried = {1};
  CHECK_THROWS_AS(apply_query(p, {}, undercharged, oracle), InvariantViolation);
  QueryBatch orphan;
  orphan.queried = {1};
  orphan.annotations_charged = 1;
  orphan.synthetic_additions.push_back({Tensor::vector({0}), std::nullopt, Provenance::adversarial_twin, 2});
  CHECK_THROWS_AS(apply_query(p, {}, orphan, oracle), InvariantViolation);
}

TEST_CASE("apply_query: DFAL batch adds twice the annotations") {
  PoolState p;
  for (std::size_t i = 0; i < 30; ++i) p.unlabeled.push_back(i);
  const Oracle oracle = [](std::size_t i) { return i % 3; };
  QueryBatch b;
  for (std::size_t i = 0; i < 10; ++i) {
    b.queried.push_back(2 * i);
    b.synthetic_additions.push_back(
        {Tensor::vector({double(i)}), std::nullopt, Provenance::adversarial_twin, 2 * i});
  }
  b.annotations_charged = 10;
  const BudgetLedger l = apply_query(p, {}, b, oracle);
  CHECK(l.annotations_used == 10);
  CHECK(l.training_set_size == 20);
  for (const auto& s : p.synthetic) CHECK(s.label == oracle(s.source_index));
  CHECK(l.corrupted_pseudo == 0);
}

TEST_CASE("apply_query: CEAL pseudo-labels are free and replaced each round") {
  PoolState p;
  for (std::size_t i = 0; i < 20; ++i) p.unlabeled.push_back(i);
  const Oracle oracle = [](std::size_t i) { return i % 2; };
  QueryBatch b;
  b.queried = {0, 1};
  b.annotations_charged = 2;
  b.synthetic_additions = {{Tensor::vector({0}), 0, Provenance::ceal_pseudo, 4},
                           {Tensor::vector({0}), 0, Provenance::ceal_pseudo, 5},
                           {Tensor::vector({0}), 1, Provenance::ceal_pseudo, 7}};
  BudgetLedger l = apply_query(p, {}, b, oracle);
  CHECK(l.annotations_used == 2);
  CHECK(l.training_set_size == 5);
  CHECK(l.pseudo_additions == 3);
  CHECK(l.corrupted_pseudo == 1);
  CHECK(p.is_unlabeled(4));

  QueryBatch next;
  next.queried = {4};
  next.annotations_charged = 1;
  l = apply_query(p, l, next, oracle);
  CHECK(l.annotations_used == 3);
  CHECK(l.training_set_size == 3);
  CHECK(p.synthetic.empty());
  CHECK(l.corrupted_pseudo == 0);
}

TEST_CASE("run: zero budget trains once") {
  const auto& s = small_blobs();
  ActiveConfig cfg = quick_config(StrategyId::dfal, 8);
  const auto records = run_active_learning(cfg, s.train, s.test, factory_for(s.train));
  REQUIRE(records.size() == 1);
  CHECK(records[0].annotations_used == 8);
  CHECK(records[0].selection_seconds == 0.0);
}

TEST_CASE("run: round count follows the budget") {
  const auto& s = small_blobs();
  ActiveConfig cfg = quick_config(StrategyId::random, 8 + 100);
  cfg.n_query = 10;
  const auto records = run_active_learning(cfg, s.train, s.test, factory_for(s.train));
  CHECK(records.size() == 11);
  CHECK(records.back().annotations_used == 108);

  cfg.budget = 8 + 25;
  const auto capped = run_active_learning(cfg, s.train, s.test, factory_for(s.train));
  CHECK(capped.size() == 4);
  CHECK(capped.back().annotations_used == 33);
}

TEST_CASE("run: budget accounting for every strategy") {
  const auto& s = small_blobs();
  for (StrategyId id : all_strategies()) {
    CAPTURE(strategy_name(id));
    const ActiveConfig cfg = quick_config(id);
    std::size_t observed = 0;
    const auto records = run_active_learning(
        cfg, s.train, s.test, factory_for(s.train),
        [&](const PoolState& pools, std::span<const TrainingExample> examples, RoundRecord& r) {
          ++observed;
          CHECK(examples.size() == r.training_set_size);
          CHECK(pools.labeled.size() == r.annotations_used);
        });
    CHECK(observed == records.size());
    CHECK(records.size() == 8);
    CHECK(records.back().annotations_used == 40);
    for (const auto& r : records) {
      CHECK(r.test_accuracy >= 0.0);
      CHECK(r.test_accuracy <= 1.0);
      if (id == StrategyId::dfal) {
        CHECK(r.training_set_size == 8 + 2 * (r.annotations_used - 8));
        CHECK(r.pseudo_corruptions == 0);
      } else if (id != StrategyId::ceal) {
        CHECK(r.training_set_size == r.annotations_used);
      } else {
        CHECK(r.training_set_size >= r.annotations_used);
      }
    }
  }
}

TEST_CASE("run: identical configs give identical records") {
  const auto& s = small_blobs();
  for (StrategyId id : {StrategyId::dfal, StrategyId::bald, StrategyId::coreset}) {
    ActiveConfig cfg = quick_config(id, 23);
    const auto a = run_active_learning(cfg, s.train, s.test, factory_for(s.train));
    cfg.exec = Execution::serial;
    const auto b = run_active_learning(cfg, s.train, s.test, factory_for(s.train));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].test_accuracy == b[i].test_accuracy);
      CHECK(a[i].training_set_size == b[i].training_set_size);
    }
  }
}

TEST_CASE("select_queries returns distinct unlabeled indices") {
  const auto& s = small_blobs();
  const PoolState pools = init_pools(s.train, 8, 1);
  const Network net(make_arch(Arch::B, s.train.input_shape, s.train.class_count, 3));
  for (StrategyId id : all_strategies()) {
    CAPTURE(strategy_name(id));
    ActiveConfig cfg = quick_config(id);
    const QueryBatch b = select_queries(cfg, net, pools, s.train, 5, 11);
    CHECK(b.queried.size() == 5);
    CHECK(b.annotations_charged == 5);
    CHECK(std::set<std::size_t>(b.queried.begin(), b.queried.end()).size() == 5);
    for (std::size_t q : b.queried) CHECK(pools.is_unlabeled(q));
  }
}

TEST_CASE("config validation") {
  ActiveConfig cfg = quick_config(StrategyId::dfal);
  cfg.n_query = 0;
  CHECK_THROWS_AS(cfg.validate(4), InvalidInput);
  cfg = quick_config(StrategyId::dfal);
  cfg.n_query = 31;
  CHECK_THROWS_AS(cfg.validate(4), InvalidInput);
  cfg = quick_config(StrategyId::dfal);
  cfg.initial_labeled = 3;
  CHECK_THROWS_AS(cfg.validate(4), InvalidInput);
  cfg = quick_config(StrategyId::dfal);
  cfg.budget = 4;
  CHECK_THROWS_AS(cfg.validate(4), InvalidInput);
  cfg = quick_config(StrategyId::bald);
  cfg.params.bald_samples = 1;
  CHECK_THROWS_AS(cfg.validate(4), InvalidInput);
}
