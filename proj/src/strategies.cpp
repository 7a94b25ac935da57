#include "dfal/strategies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

#include "dfal/errors.hpp"
#include "dfal/seed.hpp"

namespace dfal {

namespace {

std::vector<std::size_t> pool_keys(const CandidatePool& pool) {
  std::vector<std::size_t> keys(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) keys[i] = pool[i].index;
  return keys;
}

std::vector<std::vector<double>> probabilities(const Network& net, const CandidatePool& pool,
                                               Execution exec) {
  std::vector<std::vector<double>> probs(pool.size());
  for_each_index(pool.size(), exec, [&](std::size_t i) {
    probs[i] = softmax_probs(net.forward(pool[i].input.get()).values());
  });
  return probs;
}

QueryBatch queries_at(const CandidatePool& pool, std::span<const std::size_t> positions) {
  QueryBatch batch;
  for (std::size_t pos : positions) batch.queried.push_back(pool[pos].index);
  batch.annotations_charged = batch.queried.size();
  return batch;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

constexpr std::array kAllStrategies = {StrategyId::dfal, StrategyId::bald,        StrategyId::ceal,
                                       StrategyId::coreset, StrategyId::egl, StrategyId::uncertainty,
                                       StrategyId::random};

}  // namespace

std::vector<std::size_t> top_n(std::span<const double> scores, std::span<const std::size_t> tie_key,
                               std::size_t n, ScoreDirection direction) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b])
      return direction == ScoreDirection::smaller_better ? scores[a] < scores[b] : scores[a] > scores[b];
    return tie_key[a] < tie_key[b];
  };
  n = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), better);
  order.resize(n);
  return order;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return std::max(h, 0.0);
}

std::vector<double> entropy_scores(const Network& net, const CandidatePool& pool, Execution exec) {
  std::vector<double> out(pool.size());
  for_each_index(pool.size(), exec, [&](std::size_t i) {
    out[i] = entropy(softmax_probs(net.forward(pool[i].input.get()).values()));
  });
  return out;
}

double egl_score(const Network& net, const Tensor& x) {
  const auto probs = softmax_probs(net.forward(x).values());
  double score = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (probs[c] == 0.0) continue;
    score += probs[c] * norm_l2(net.grad_params(x, c));
  }
  return score;
}

std::vector<double> egl_scores(const Network& net, const CandidatePool& pool, Execution exec) {
  std::vector<double> out(pool.size());
  for_each_index(pool.size(), exec, [&](std::size_t i) { out[i] = egl_score(net, pool[i].input.get()); });
  return out;
}

std::vector<std::vector<double>> bald_probabilities(const Network& net, const Tensor& x,
                                                    std::size_t samples, std::uint64_t round_seed,
                                                    std::size_t candidate_index) {
  std::vector<std::vector<double>> probs(samples);
  for (std::size_t t = 0; t < samples; ++t) {
    const std::uint64_t seed = derive_seed(round_seed, {candidate_index, t});
    probs[t] = softmax_probs(net.forward(x, StochasticDropout{seed}).values());
  }
  return probs;
}

double bald_score(std::span<const std::vector<double>> probs) {
  if (probs.empty()) return 0.0;
  std::vector<double> mean(probs.front().size(), 0.0);
  double mean_entropy = 0.0;
  for (const auto& p : probs) {
    for (std::size_t c = 0; c < p.size(); ++c) mean[c] += p[c];
    mean_entropy += entropy(p);
  }
  const double inv = 1.0 / static_cast<double>(probs.size());
  for (double& m : mean) m *= inv;
  return entropy(mean) - mean_entropy * inv;
}

std::vector<double> bald_scores(const Network& net, const CandidatePool& pool, std::size_t samples,
                                std::uint64_t round_seed, Execution exec) {
  if (!net.spec().has_dropout())
    throw UnsupportedArchitecture("BALD needs a network with a dropout layer");
  if (samples < 2) throw InvalidInput("BALD needs at least two dropout samples");
  std::vector<double> out(pool.size());
  for_each_index(pool.size(), exec, [&](std::size_t i) {
    out[i] = bald_score(bald_probabilities(net, pool[i].input.get(), samples, round_seed, pool[i].index));
  });
  return out;
}

DfalScores dfal_scores(const Network& net, const CandidatePool& pool, const AttackConfig& cfg,
                       Execution exec) {
  std::vector<std::reference_wrapper<const Tensor>> xs;
  xs.reserve(pool.size());
  for (const auto& c : pool) xs.push_back(c.input);
  DfalScores out{{}, batch_deepfool(net, xs, cfg, exec)};
  out.scores.reserve(pool.size());
  for (const auto& r : out.attacks)
    out.scores.push_back(r.success ? r.norm : std::numeric_limits<double>::infinity());
  return out;
}

// ---------------------------------------------------------------------------
// Greedy k-center
// ---------------------------------------------------------------------------

std::vector<std::size_t> greedy_k_center(std::span<const std::vector<double>> centers,
                                         std::span<const std::vector<double>> points,
                                         std::span<const std::size_t> tie_key, std::size_t count,
                                         Execution exec) {
  count = std::min(count, points.size());
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  for_each_index(points.size(), exec, [&](std::size_t i) {
    for (const auto& c : centers) nearest[i] = std::min(nearest[i], squared_distance(c, points[i]));
  });

  std::vector<char> taken(points.size(), 0);
  std::vector<std::size_t> picks;
  picks.reserve(count);
  while (picks.size() < count) {
    std::size_t best = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (taken[i]) continue;
      if (best == points.size() || nearest[i] > nearest[best] ||
          (nearest[i] == nearest[best] && tie_key[i] < tie_key[best]))
        best = i;
    }
    taken[best] = 1;
    picks.push_back(best);
    const auto& chosen = points[best];
    for_each_index(points.size(), exec, [&](std::size_t i) {
      nearest[i] = std::min(nearest[i], squared_distance(chosen, points[i]));
    });
  }
  return picks;
}

double cover_radius(std::span<const std::vector<double>> centers,
                    std::span<const std::vector<double>> points) {
  double radius = 0.0;
  for (const auto& p : points) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) nearest = std::min(nearest, squared_distance(c, p));
    radius = std::max(radius, nearest);
  }
  return std::sqrt(radius);
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

StrategyId parse_strategy(const std::string& name) {
  std::string s;
  for (char ch : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (s == "dfal") return StrategyId::dfal;
  if (s == "uncertainty") return StrategyId::uncertainty;
  if (s == "ceal") return StrategyId::ceal;
  if (s == "egl") return StrategyId::egl;
  if (s == "bald") return StrategyId::bald;
  if (s == "coreset" || s == "core-set" || s == "coreset-greedy") return StrategyId::coreset;
  if (s == "random") return StrategyId::random;
  throw InvalidInput("unknown strategy '" + name + "'");
}

std::string strategy_name(StrategyId id) {
  switch (id) {
    case StrategyId::dfal: return "dfal";
    case StrategyId::uncertainty: return "uncertainty";
    case StrategyId::ceal: return "ceal";
    case StrategyId::egl: return "egl";
    case StrategyId::bald: return "bald";
    case StrategyId::coreset: return "coreset";
    case StrategyId::random: return "random";
  }
  return "unknown";
}

std::span<const StrategyId> all_strategies() { return kAllStrategies; }

QueryBatch select_dfal(const Network& net, const CandidatePool& pool, std::size_t n_query,
                       const AttackConfig& cfg, std::uint64_t fallback_seed, Execution exec) {
  if (pool.empty()) throw InvalidInput("candidate pool is empty");
  const DfalScores scored = dfal_scores(net, pool, cfg, exec);
  const auto keys = pool_keys(pool);

  std::vector<std::size_t> positions;
  const bool all_failed = std::all_of(scored.scores.begin(), scored.scores.end(),
                                      [](double s) { return std::isinf(s); });
  if (all_failed) {
    std::cerr << "warning: every DeepFool attack failed on " << pool.size()
              << " candidates; falling back to random selection\n";
    positions.resize(pool.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    std::mt19937_64 rng(fallback_seed);
    std::shuffle(positions.begin(), positions.end(), rng);
    positions.resize(std::min(n_query, pool.size()));
  } else {
    positions = top_n(scored.scores, keys, n_query, ScoreDirection::smaller_better);
  }

  QueryBatch batch = queries_at(pool, positions);
  for (std::size_t pos : positions) {
    const Tensor& x = pool[pos].input.get();
    const AdversarialResult& attack = scored.attacks[pos];
    Tensor twin = x;
    if (attack.perturbation.size() == x.size() && attack.perturbation.all_finite())
      for (std::size_t i = 0; i < x.size(); ++i) twin[i] += attack.perturbation[i];
    batch.synthetic_additions.push_back(
        SyntheticItem{std::move(twin), std::nullopt, Provenance::adversarial_twin, pool[pos].index});
  }
  return batch;
}

QueryBatch select_uncertainty(const Network& net, const CandidatePool& pool, std::size_t n_query,
                              Execution exec) {
  const auto scores = entropy_scores(net, pool, exec);
  const auto keys = pool_keys(pool);
  return queries_at(pool, top_n(scores, keys, n_query, ScoreDirection::larger_better));
}

QueryBatch select_ceal(const Network& net, const CandidatePool& pool, std::size_t n_query,
                       double delta, Execution exec) {
  if (!(delta >= 0.0)) throw InvalidInput("CEAL threshold must be nonnegative");
  const auto probs = probabilities(net, pool, exec);
  std::vector<double> scores(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) scores[i] = entropy(probs[i]);
  const auto keys = pool_keys(pool);
  const auto positions = top_n(scores, keys, n_query, ScoreDirection::larger_better);

  QueryBatch batch = queries_at(pool, positions);
  std::vector<char> queried(pool.size(), 0);
  for (std::size_t pos : positions) queried[pos] = 1;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (queried[i] || !(scores[i] < delta)) continue;
    batch.synthetic_additions.push_back(SyntheticItem{pool[i].input.get(), argmax(probs[i]),
                                                      Provenance::ceal_pseudo, pool[i].index});
  }
  return batch;
}

QueryBatch select_egl(const Network& net, const CandidatePool& pool, std::size_t n_query,
                      Execution exec) {
  const auto scores = egl_scores(net, pool, exec);
  const auto keys = pool_keys(pool);
  return queries_at(pool, top_n(scores, keys, n_query, ScoreDirection::larger_better));
}

QueryBatch select_bald(const Network& net, const CandidatePool& pool, std::size_t n_query,
                       std::size_t samples, std::uint64_t round_seed, Execution exec) {
  const auto scores = bald_scores(net, pool, samples, round_seed, exec);
  const auto keys = pool_keys(pool);
  return queries_at(pool, top_n(scores, keys, n_query, ScoreDirection::larger_better));
}

QueryBatch select_coreset_greedy(const Network& net,
                                 std::span<const std::reference_wrapper<const Tensor>> labeled,
                                 const CandidatePool& pool, std::size_t n_query, Execution exec) {
  std::vector<std::vector<double>> centers(labeled.size()), points(pool.size());
  for_each_index(labeled.size(), exec, [&](std::size_t i) { centers[i] = net.embed(labeled[i].get()); });
  for_each_index(pool.size(), exec, [&](std::size_t i) { points[i] = net.embed(pool[i].input.get()); });
  const auto keys = pool_keys(pool);
  return queries_at(pool, greedy_k_center(centers, points, keys, n_query, exec));
}

QueryBatch select_random(const CandidatePool& pool, std::size_t n_query, std::uint64_t seed) {
  std::vector<std::size_t> positions(pool.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(positions.begin(), positions.end(), rng);
  positions.resize(std::min(n_query, pool.size()));
  return queries_at(pool, positions);
}

}  // namespace dfal
