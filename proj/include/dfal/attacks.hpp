#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dfal/nn.hpp"
#include "dfal/parallel.hpp"
#include "dfal/tensor.hpp"

namespace dfal {

enum class NormOrder { l2, linf };

struct AttackConfig {
  NormOrder p = NormOrder::l2;
  double overshoot = 0.02;
  std::size_t max_iter = 50;
  /// Clamp every iterate to [clip_min, clip_max]. Off by default: clipping
  /// can pull the point back across the boundary it just crossed.
  bool clip = false;
  double clip_min = 0.0;
  double clip_max = 1.0;

  void validate() const;
};

struct AdversarialResult {
  /// Displacement actually applied: x + perturbation is the adversarial
  /// point. Already includes the (1 + overshoot) factor.
  Tensor perturbation;
  /// L_p norm of `perturbation`; +inf when the attack broke down.
  double norm = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool success = false;
  std::size_t original_label = 0;
  /// Prediction at x + perturbation; empty if the attack broke down.
  std::optional<std::size_t> adversarial_label;
};

/// Multi-class DeepFool. At each iterate x_t it linearizes every logit
/// difference f_k - f_k0 against the original class k0, steps onto the
/// nearest linearized boundary, and stops once the prediction at
/// x + (1 + overshoot) * sum(steps) leaves k0 or max_iter steps were taken.
///
/// Ties in the nearest-boundary search go to the lowest class index.
/// Non-finite logits or gradients yield success=false and norm=+inf.
AdversarialResult deepfool(const Network& net, const Tensor& x, const AttackConfig& cfg);

/// Element i equals deepfool(net, xs[i], cfg) for either execution mode.
std::vector<AdversarialResult> batch_deepfool(const Network& net,
                                              std::span<const std::reference_wrapper<const Tensor>> xs,
                                              const AttackConfig& cfg,
                                              Execution exec = Execution::parallel);

}  // namespace dfal
