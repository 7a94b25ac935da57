#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfal/attacks.hpp"
#include "dfal/nn.hpp"
#include "dfal/parallel.hpp"
#include "dfal/tensor.hpp"

namespace dfal {

/// One unlabeled item offered to a strategy: its dataset index and input.
struct Candidate {
  std::size_t index;
  std::reference_wrapper<const Tensor> input;
};
using CandidatePool = std::vector<Candidate>;

enum class ScoreDirection { smaller_better, larger_better };

enum class Provenance { adversarial_twin, ceal_pseudo };

/// A training item that is not a dataset index. Adversarial twins carry
/// no label until the oracle labels their source; pseudo-labeled items
/// carry the model's prediction.
struct SyntheticItem {
  Tensor input;
  std::optional<std::size_t> label;
  Provenance provenance;
  std::size_t source_index;
};

struct QueryBatch {
  std::vector<std::size_t> queried;
  std::vector<SyntheticItem> synthetic_additions;
  std::size_t annotations_charged = 0;
};

/// Positions of the n extreme scores in `direction`, best first. Ties go
/// to the lower tie_key (the candidate's dataset index).
std::vector<std::size_t> top_n(std::span<const double> scores, std::span<const std::size_t> tie_key,
                               std::size_t n, ScoreDirection direction);

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

/// Shannon entropy in nats; 0 * ln 0 counts as 0.
double entropy(std::span<const double> probs);

/// Entropy of the deterministic softmax output for every candidate.
std::vector<double> entropy_scores(const Network& net, const CandidatePool& pool,
                                   Execution exec = Execution::parallel);

/// Expected gradient length: sum over classes c of p(c|x) times the L2
/// norm of the full cross-entropy parameter gradient for label c.
double egl_score(const Network& net, const Tensor& x);
std::vector<double> egl_scores(const Network& net, const CandidatePool& pool,
                               Execution exec = Execution::parallel);

/// T softmax vectors from dropout-sampled forward passes. Sample t uses
/// the mask seed derive_seed(round_seed, {candidate_index, t}).
std::vector<std::vector<double>> bald_probabilities(const Network& net, const Tensor& x,
                                                    std::size_t samples, std::uint64_t round_seed,
                                                    std::size_t candidate_index);
/// Mutual information estimate H[mean_t p_t] - mean_t H[p_t].
double bald_score(std::span<const std::vector<double>> probs);
std::vector<double> bald_scores(const Network& net, const CandidatePool& pool,
                                std::size_t samples, std::uint64_t round_seed,
                                Execution exec = Execution::parallel);

/// DeepFool norm per candidate; failed attacks score +inf.
struct DfalScores {
  std::vector<double> scores;
  std::vector<AdversarialResult> attacks;
};
DfalScores dfal_scores(const Network& net, const CandidatePool& pool, const AttackConfig& cfg,
                       Execution exec = Execution::parallel);

// ---------------------------------------------------------------------------
// Greedy k-center
// ---------------------------------------------------------------------------

/// Farthest-first traversal in Euclidean space. `centers` are fixed
/// (already covered) points; returns positions into `points`, in pick
/// order. Ties, including the first pick when there are no centers, go to the
/// lower tie_key.
std::vector<std::size_t> greedy_k_center(std::span<const std::vector<double>> centers,
                                         std::span<const std::vector<double>> points,
                                         std::span<const std::size_t> tie_key, std::size_t count,
                                         Execution exec = Execution::parallel);

/// Max over points of the distance to the nearest center.
double cover_radius(std::span<const std::vector<double>> centers,
                    std::span<const std::vector<double>> points);

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class StrategyId { dfal, uncertainty, ceal, egl, bald, coreset, random };

StrategyId parse_strategy(const std::string& name);
std::string strategy_name(StrategyId id);
/// The seven strategies in their canonical order.
std::span<const StrategyId> all_strategies();

/// Query the n smallest DeepFool norms and add one adversarial twin
/// (x + perturbation) per query. Falls back to random selection, with a
/// warning on stderr, when every attack fails.
QueryBatch select_dfal(const Network& net, const CandidatePool& pool, std::size_t n_query,
                       const AttackConfig& cfg, std::uint64_t fallback_seed = 0,
                       Execution exec = Execution::parallel);

QueryBatch select_uncertainty(const Network& net, const CandidatePool& pool, std::size_t n_query,
                              Execution exec = Execution::parallel);

/// Uncertainty selection plus every remaining candidate whose entropy is
/// below delta, pseudo-labeled with the predicted class (not charged).
QueryBatch select_ceal(const Network& net, const CandidatePool& pool, std::size_t n_query,
                       double delta, Execution exec = Execution::parallel);

QueryBatch select_egl(const Network& net, const CandidatePool& pool, std::size_t n_query,
                      Execution exec = Execution::parallel);

/// Throws UnsupportedArchitecture if the network has no dropout layer.
QueryBatch select_bald(const Network& net, const CandidatePool& pool, std::size_t n_query,
                       std::size_t samples, std::uint64_t round_seed,
                       Execution exec = Execution::parallel);

/// Greedy k-center on embeddings, seeded with the labeled inputs as centers.
QueryBatch select_coreset_greedy(const Network& net,
                                 std::span<const std::reference_wrapper<const Tensor>> labeled,
                                 const CandidatePool& pool, std::size_t n_query,
                                 Execution exec = Execution::parallel);

QueryBatch select_random(const CandidatePool& pool, std::size_t n_query, std::uint64_t seed);

}  // namespace dfal
