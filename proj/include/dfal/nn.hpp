#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dfal/tensor.hpp"

namespace dfal {

// ---------------------------------------------------------------------------
// Architecture description
// ---------------------------------------------------------------------------

/// Fully connected layer over a flat input of `in` values.
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
};

/// Valid (unpadded) 2-D convolution over a [channels, height, width] input.
/// `channels` is the number of output filters; input channels are inferred.
struct Conv2d {
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
};

/// Non-overlapping max pooling with window and stride `size`.
struct MaxPool {
  std::size_t size = 2;
};

struct Relu {};

/// Inverted dropout: kept units are scaled by 1/(1-rate) so the
/// deterministic pass is the identity.
struct Dropout {
  double rate = 0.0;
};

struct Flatten {};

using Layer = std::variant<Dense, Conv2d, MaxPool, Relu, Dropout, Flatten>;

struct NetworkSpec {
  Shape input_shape;
  std::vector<Layer> layers;
  std::size_t class_count = 0;
  std::uint64_t init_seed = 0;

  /// Throws InvalidInput when layer shapes do not compose or the output
  /// width differs from class_count.
  void validate() const;
  bool has_dropout() const;
};

enum class Arch { A, B };

Arch parse_arch(const std::string& name);
std::string arch_name(Arch arch);

/// Desk-scale architectures.
///  arch-A: conv(8, 5x5) -> maxpool(2) -> dense(64) -> dense(C) on image
///          input [channels, h, w]; on flat input the convolution stage is
///          dropped, leaving dense(64) -> dense(C).
///  arch-B: dense(256) -> dense(64) -> dense(C).
/// Both use relu activations and dropout 0.25 before the final layer.
NetworkSpec make_arch(Arch arch, const Shape& input_shape, std::size_t class_count,
                      std::uint64_t init_seed);

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingExample {
  std::reference_wrapper<const Tensor> input;
  std::size_t label;
};

// ---------------------------------------------------------------------------
// Network state and differentiation
// ---------------------------------------------------------------------------

struct Deterministic {};
struct StochasticDropout {
  std::uint64_t seed = 0;
};
using ForwardMode = std::variant<Deterministic, StochasticDropout>;

/// Per-layer bookkeeping derived from the NetworkSpec.
struct LayerPlan {
  Layer layer;
  Shape in_shape;
  Shape out_shape;
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
};

/// Logits at a point together with the gradient of every logit with
/// respect to the input (one row per class, each shaped like the input).
struct LogitJacobian {
  std::vector<double> logits;
  std::vector<std::vector<double>> gradients;
};

/// A feed-forward classifier. Parameters live in one flat buffer laid out
/// layer by layer (weights then biases), which is also the layout of every
/// parameter gradient this class returns.
///
/// A const Network is safe to share between threads.
class Network {
 public:
  /// Builds the network and draws Glorot-uniform weights from
  /// spec.init_seed; biases start at zero.
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerPlan>& plan() const noexcept { return plan_; }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<const double> weights(std::size_t layer) const;
  std::span<double> weights(std::size_t layer);
  std::span<const double> biases(std::size_t layer) const;
  std::span<double> biases(std::size_t layer);

  std::size_t epochs_trained() const noexcept { return epochs_; }

  Tensor forward(const Tensor& x, ForwardMode mode = Deterministic{}) const;
  std::size_t predict(const Tensor& x) const;

  /// Gradient of the cross-entropy loss at (x, label), deterministic pass.
  std::vector<double> grad_params(const Tensor& x, std::size_t label) const;

  /// Gradient of logit k with respect to the input, deterministic pass.
  Tensor grad_input_logit(const Tensor& x, std::size_t k) const;

  /// All logits and all logit-input gradients from one forward pass.
  LogitJacobian logit_jacobian(const Tensor& x) const;

  /// Input of the final dense layer on the deterministic pass.
  std::vector<double> embed(const Tensor& x) const;
  std::size_t embed_dim() const;

 private:
  friend Network train(Network net, std::span<const TrainingExample> examples,
                       const TrainConfig& cfg);

  struct Trace;
  void check_input(const Tensor& x) const;
  void run_forward(std::span<const double> x, Trace& trace, std::mt19937_64* dropout_rng,
                   std::size_t stop_layer) const;
  void run_backward(Trace& trace, std::span<const double> grad_out,
                    std::vector<double>* param_grad, std::vector<double>* input_grad) const;

  NetworkSpec spec_;
  std::vector<LayerPlan> plan_;
  std::vector<double> params_;
  std::size_t epochs_ = 0;
};

std::vector<double> softmax_probs(std::span<const double> logits);

/// Minibatch Adam on mean cross-entropy. Deterministic in (net, examples
/// order, cfg.seed). Throws InvalidInput on an empty set or a bad label.
Network train(Network net, std::span<const TrainingExample> examples, const TrainConfig& cfg);

/// Epoch count that keeps the number of optimizer steps near base_steps:
/// ceil(base_steps * batch_size / n).
std::size_t epochs_for_steps(std::size_t base_steps, std::size_t batch_size, std::size_t n);

/// Mean cross-entropy over the examples, deterministic pass.
double mean_loss(const Network& net, std::span<const TrainingExample> examples);

}  // namespace dfal
