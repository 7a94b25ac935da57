#include "dfal/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dfal/errors.hpp"

namespace dfal {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

std::vector<LayerPlan> build_plan(const NetworkSpec& spec) {
  if (spec.input_shape.empty() || shape_size(spec.input_shape) == 0)
    throw InvalidInput("network input shape must be nonempty");
  if (spec.class_count == 0) throw InvalidInput("class_count must be positive");
  if (spec.layers.empty()) throw InvalidInput("network needs at least one layer");

  std::vector<LayerPlan> plan;
  Shape shape = spec.input_shape;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    LayerPlan p{spec.layers[i], shape, {}, 0, 0, 0, 0};
    const std::string where = "layer " + std::to_string(i) + ": ";
    std::visit(
        overloaded{
            [&](const Dense& d) {
              if (shape.size() != 1 || shape[0] != d.in)
                throw InvalidInput(where + "dense expects flat input of " + std::to_string(d.in) +
                                   ", got " + shape_string(shape));
              if (d.out == 0) throw InvalidInput(where + "dense output width must be positive");
              p.out_shape = {d.out};
              p.weight_count = d.in * d.out;
              p.bias_count = d.out;
            },
            [&](const Conv2d& c) {
              if (shape.size() != 3)
                throw InvalidInput(where + "conv2d expects [c,h,w] input, got " +
                                   shape_string(shape));
              if (c.channels == 0 || c.kernel == 0 || c.stride == 0)
                throw InvalidInput(where + "conv2d parameters must be positive");
              if (c.kernel > shape[1] || c.kernel > shape[2])
                throw InvalidInput(where + "conv2d kernel larger than input");
              const std::size_t oh = (shape[1] - c.kernel) / c.stride + 1;
              const std::size_t ow = (shape[2] - c.kernel) / c.stride + 1;
              p.out_shape = {c.channels, oh, ow};
              p.weight_count = c.channels * shape[0] * c.kernel * c.kernel;
              p.bias_count = c.channels;
            },
            [&](const MaxPool& m) {
              if (shape.size() != 3)
                throw InvalidInput(where + "maxpool expects [c,h,w] input, got " +
                                   shape_string(shape));
              if (m.size == 0 || m.size > shape[1] || m.size > shape[2])
                throw InvalidInput(where + "maxpool window does not fit the input");
              p.out_shape = {shape[0], shape[1] / m.size, shape[2] / m.size};
            },
            [&](const Relu&) { p.out_shape = shape; },
            [&](const Dropout& d) {
              if (!(d.rate >= 0.0 && d.rate < 1.0))
                throw InvalidInput(where + "dropout rate must lie in [0, 1)");
              p.out_shape = shape;
            },
            [&](const Flatten&) { p.out_shape = {shape_size(shape)}; },
        },
        spec.layers[i]);
    p.weight_offset = offset;
    p.bias_offset = offset + p.weight_count;
    offset += p.weight_count + p.bias_count;
    shape = p.out_shape;
    plan.push_back(std::move(p));
  }
  if (shape.size() != 1 || shape[0] != spec.class_count)
    throw InvalidInput("network output " + shape_string(shape) + " does not match class_count " +
                       std::to_string(spec.class_count));
  return plan;
}

std::size_t last_dense_layer(const NetworkSpec& spec) {
  for (std::size_t i = spec.layers.size(); i-- > 0;)
    if (std::holds_alternative<Dense>(spec.layers[i])) return i;
  throw UnsupportedArchitecture("network has no dense layer to embed from");
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec helpers
// ---------------------------------------------------------------------------

void NetworkSpec::validate() const { build_plan(*this); }

bool NetworkSpec::has_dropout() const {
  return std::any_of(layers.begin(), layers.end(),
                     [](const Layer& l) { return std::holds_alternative<Dropout>(l); });
}

Arch parse_arch(const std::string& name) {
  if (name == "arch-A" || name == "A" || name == "a") return Arch::A;
  if (name == "arch-B" || name == "B" || name == "b") return Arch::B;
  throw InvalidInput("unknown architecture '" + name + "' (expected arch-A or arch-B)");
}

std::string arch_name(Arch arch) { return arch == Arch::A ? "arch-A" : "arch-B"; }

NetworkSpec make_arch(Arch arch, const Shape& input_shape, std::size_t class_count,
                      std::uint64_t init_seed) {
  NetworkSpec spec{input_shape, {}, class_count, init_seed};
  const std::size_t flat = shape_size(input_shape);
  if (arch == Arch::A) {
    std::size_t dense_in = flat;
    if (input_shape.size() == 3) {
      constexpr std::size_t filters = 8, kernel = 5, pool = 2;
      spec.layers.push_back(Conv2d{filters, kernel, 1});
      spec.layers.push_back(Relu{});
      spec.layers.push_back(MaxPool{pool});
      dense_in = filters * ((input_shape[1] - kernel + 1) / pool) *
                 ((input_shape[2] - kernel + 1) / pool);
    }
    if (input_shape.size() != 1) spec.layers.push_back(Flatten{});
    spec.layers.push_back(Dense{dense_in, 64});
    spec.layers.push_back(Relu{});
  } else {
    if (input_shape.size() != 1) spec.layers.push_back(Flatten{});
    spec.layers.push_back(Dense{flat, 256});
    spec.layers.push_back(Relu{});
    spec.layers.push_back(Dense{256, 64});
    spec.layers.push_back(Relu{});
  }
  spec.layers.push_back(Dropout{0.25});
  spec.layers.push_back(Dense{64, class_count});
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

struct Network::Trace {
  // acts[i] is the input of layer i; acts.back() holds the logits.
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<std::size_t>> pool_argmax;
  // Empty means the dropout layer acted as the identity.
  std::vector<std::vector<double>> dropout_scale;
  std::vector<double> grad_a, grad_b;
};

Network::Network(NetworkSpec spec) : spec_(std::move(spec)), plan_(build_plan(spec_)) {
  std::size_t total = 0;
  for (const auto& p : plan_) total += p.weight_count + p.bias_count;
  params_.assign(total, 0.0);

  std::mt19937_64 rng(spec_.init_seed);
  for (const auto& p : plan_) {
    double fan_in = 0, fan_out = 0;
    if (const auto* d = std::get_if<Dense>(&p.layer)) {
      fan_in = static_cast<double>(d->in);
      fan_out = static_cast<double>(d->out);
    } else if (const auto* c = std::get_if<Conv2d>(&p.layer)) {
      const double area = static_cast<double>(c->kernel * c->kernel);
      fan_in = static_cast<double>(p.in_shape[0]) * area;
      fan_out = static_cast<double>(c->channels) * area;
    } else {
      continue;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < p.weight_count; ++i) params_[p.weight_offset + i] = dist(rng);
  }
}

std::span<const double> Network::weights(std::size_t layer) const {
  const auto& p = plan_.at(layer);
  return std::span<const double>(params_).subspan(p.weight_offset, p.weight_count);
}
std::span<double> Network::weights(std::size_t layer) {
  const auto& p = plan_.at(layer);
  return std::span<double>(params_).subspan(p.weight_offset, p.weight_count);
}
std::span<const double> Network::biases(std::size_t layer) const {
  const auto& p = plan_.at(layer);
  return std::span<const double>(params_).subspan(p.bias_offset, p.bias_count);
}
std::span<double> Network::biases(std::size_t layer) {
  const auto& p = plan_.at(layer);
  return std::span<double>(params_).subspan(p.bias_offset, p.bias_count);
}

void Network::check_input(const Tensor& x) const {
  if (shape_size(x.shape()) != shape_size(spec_.input_shape) ||
      (x.shape() != spec_.input_shape &&
       !(x.shape().size() == 1 && x.size() == shape_size(spec_.input_shape))))
    throw InvalidInput("input shape " + shape_string(x.shape()) + " does not match network input " +
                       shape_string(spec_.input_shape));
}

void Network::run_forward(std::span<const double> x, Trace& trace, std::mt19937_64* dropout_rng,
                          std::size_t stop_layer) const {
  const std::size_t n_layers = plan_.size();
  trace.acts.resize(n_layers + 1);
  trace.pool_argmax.resize(n_layers);
  trace.dropout_scale.resize(n_layers);
  trace.acts[0].assign(x.begin(), x.end());

  const double* w = params_.data();
  for (std::size_t li = 0; li < stop_layer; ++li) {
    const LayerPlan& p = plan_[li];
    const std::vector<double>& in = trace.acts[li];
    std::vector<double>& out = trace.acts[li + 1];
    out.resize(shape_size(p.out_shape));
    std::visit(
        overloaded{
            [&](const Dense& d) {
              const double* W = w + p.weight_offset;
              const double* b = w + p.bias_offset;
              for (std::size_t o = 0; o < d.out; ++o) out[o] = b[o] + dot(W + o * d.in, in.data(), d.in);
            },
            [&](const Conv2d& c) {
              const std::size_t C = p.in_shape[0], H = p.in_shape[1], Wd = p.in_shape[2];
              const std::size_t OH = p.out_shape[1], OW = p.out_shape[2], k = c.kernel;
              const double* W = w + p.weight_offset;
              const double* b = w + p.bias_offset;
              for (std::size_t f = 0; f < c.channels; ++f) {
                double* plane = out.data() + f * OH * OW;
                std::fill(plane, plane + OH * OW, b[f]);
                for (std::size_t ch = 0; ch < C; ++ch) {
                  for (std::size_t i = 0; i < k; ++i) {
                    for (std::size_t j = 0; j < k; ++j) {
                      const double wv = W[((f * C + ch) * k + i) * k + j];
                      for (std::size_t oh = 0; oh < OH; ++oh) {
                        const double* row = in.data() + (ch * H + oh * c.stride + i) * Wd + j;
                        double* orow = plane + oh * OW;
                        if (c.stride == 1) {
                          axpy(wv, row, orow, OW);
                        } else {
                          for (std::size_t ow = 0; ow < OW; ++ow) orow[ow] += wv * row[ow * c.stride];
                        }
                      }
                    }
                  }
                }
              }
            },
            [&](const MaxPool& m) {
              const std::size_t C = p.in_shape[0], H = p.in_shape[1], Wd = p.in_shape[2];
              const std::size_t OH = p.out_shape[1], OW = p.out_shape[2];
              auto& arg = trace.pool_argmax[li];
              arg.resize(out.size());
              for (std::size_t ch = 0; ch < C; ++ch)
                for (std::size_t oh = 0; oh < OH; ++oh)
                  for (std::size_t ow = 0; ow < OW; ++ow) {
                    std::size_t best = (ch * H + oh * m.size) * Wd + ow * m.size;
                    for (std::size_t i = 0; i < m.size; ++i)
                      for (std::size_t j = 0; j < m.size; ++j) {
                        const std::size_t idx = (ch * H + oh * m.size + i) * Wd + ow * m.size + j;
                        if (in[idx] > in[best]) best = idx;
                      }
                    const std::size_t o = (ch * OH + oh) * OW + ow;
                    out[o] = in[best];
                    arg[o] = best;
                  }
            },
            [&](const Relu&) {
              for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
            },
            [&](const Dropout& d) {
              auto& scale = trace.dropout_scale[li];
              if (dropout_rng == nullptr || d.rate == 0.0) {
                scale.clear();
                out = in;
                return;
              }
              scale.resize(in.size());
              std::bernoulli_distribution keep(1.0 - d.rate);
              const double kept = 1.0 / (1.0 - d.rate);
              for (std::size_t i = 0; i < in.size(); ++i) {
                scale[i] = keep(*dropout_rng) ? kept : 0.0;
                out[i] = in[i] * scale[i];
              }
            },
            [&](const Flatten&) { out = in; },
        },
        p.layer);
  }
}

void Network::run_backward(Trace& trace, std::span<const double> grad_out,
                           std::vector<double>* param_grad, std::vector<double>* input_grad) const {
  std::vector<double>& g = trace.grad_a;
  std::vector<double>& dx = trace.grad_b;
  g.assign(grad_out.begin(), grad_out.end());
  const double* w = params_.data();
  double* pg = param_grad ? param_grad->data() : nullptr;

  for (std::size_t li = plan_.size(); li-- > 0;) {
    const LayerPlan& p = plan_[li];
    const std::vector<double>& in = trace.acts[li];
    const bool need_dx = li > 0 || input_grad != nullptr;
    dx.assign(in.size(), 0.0);
    std::visit(
        overloaded{
            [&](const Dense& d) {
              const double* W = w + p.weight_offset;
              for (std::size_t o = 0; o < d.out; ++o) {
                const double go = g[o];
                if (go == 0.0) continue;
                if (pg) {
                  axpy(go, in.data(), pg + p.weight_offset + o * d.in, d.in);
                  pg[p.bias_offset + o] += go;
                }
                if (need_dx) axpy(go, W + o * d.in, dx.data(), d.in);
              }
            },
            [&](const Conv2d& c) {
              const std::size_t C = p.in_shape[0], H = p.in_shape[1], Wd = p.in_shape[2];
              const std::size_t OH = p.out_shape[1], OW = p.out_shape[2], k = c.kernel;
              const double* W = w + p.weight_offset;
              for (std::size_t f = 0; f < c.channels; ++f) {
                const double* gplane = g.data() + f * OH * OW;
                if (pg) {
                  double bsum = 0.0;
                  for (std::size_t i = 0; i < OH * OW; ++i) bsum += gplane[i];
                  pg[p.bias_offset + f] += bsum;
                }
                for (std::size_t ch = 0; ch < C; ++ch) {
                  for (std::size_t i = 0; i < k; ++i) {
                    for (std::size_t j = 0; j < k; ++j) {
                      const std::size_t widx = ((f * C + ch) * k + i) * k + j;
                      const double wv = W[widx];
                      double wsum = 0.0;
                      for (std::size_t oh = 0; oh < OH; ++oh) {
                        const std::size_t base = (ch * H + oh * c.stride + i) * Wd + j;
                        const double* grow = gplane + oh * OW;
                        if (pg) {
                          const double* row = in.data() + base;
                          if (c.stride == 1) {
                            wsum += dot(grow, row, OW);
                          } else {
                            for (std::size_t ow = 0; ow < OW; ++ow) wsum += grow[ow] * row[ow * c.stride];
                          }
                        }
                        if (need_dx) {
                          double* drow = dx.data() + base;
                          if (c.stride == 1) {
                            axpy(wv, grow, drow, OW);
                          } else {
                            for (std::size_t ow = 0; ow < OW; ++ow) drow[ow * c.stride] += wv * grow[ow];
                          }
                        }
                      }
                      if (pg) pg[p.weight_offset + widx] += wsum;
                    }
                  }
                }
              }
            },
            [&](const MaxPool&) {
              const auto& arg = trace.pool_argmax[li];
              for (std::size_t o = 0; o < g.size(); ++o) dx[arg[o]] += g[o];
            },
            [&](const Relu&) {
              for (std::size_t i = 0; i < in.size(); ++i) dx[i] = in[i] > 0.0 ? g[i] : 0.0;
            },
            [&](const Dropout&) {
              const auto& scale = trace.dropout_scale[li];
              if (scale.empty()) {
                dx = g;
              } else {
                for (std::size_t i = 0; i < in.size(); ++i) dx[i] = g[i] * scale[i];
              }
            },
            [&](const Flatten&) { dx = g; },
        },
        p.layer);
    std::swap(g, dx);
  }
  if (input_grad) *input_grad = g;
}

Tensor Network::forward(const Tensor& x, ForwardMode mode) const {
  check_input(x);
  Trace trace;
  if (const auto* s = std::get_if<StochasticDropout>(&mode)) {
    std::mt19937_64 rng(s->seed);
    run_forward(x.values(), trace, &rng, plan_.size());
  } else {
    run_forward(x.values(), trace, nullptr, plan_.size());
  }
  return Tensor::vector(std::move(trace.acts.back()));
}

std::size_t Network::predict(const Tensor& x) const { return argmax(forward(x).values()); }

std::vector<double> Network::grad_params(const Tensor& x, std::size_t label) const {
  if (label >= spec_.class_count)
    throw InvalidInput("label " + std::to_string(label) + " out of range for " +
                       std::to_string(spec_.class_count) + " classes");
  check_input(x);
  Trace trace;
  run_forward(x.values(), trace, nullptr, plan_.size());
  std::vector<double> g = softmax_probs(trace.acts.back());
  g[label] -= 1.0;
  std::vector<double> grad(params_.size(), 0.0);
  run_backward(trace, g, &grad, nullptr);
  return grad;
}

Tensor Network::grad_input_logit(const Tensor& x, std::size_t k) const {
  if (k >= spec_.class_count)
    throw InvalidInput("class " + std::to_string(k) + " out of range for " +
                       std::to_string(spec_.class_count) + " classes");
  check_input(x);
  Trace trace;
  run_forward(x.values(), trace, nullptr, plan_.size());
  std::vector<double> onehot(spec_.class_count, 0.0);
  onehot[k] = 1.0;
  std::vector<double> dx;
  run_backward(trace, onehot, nullptr, &dx);
  return Tensor(x.shape(), std::move(dx));
}

LogitJacobian Network::logit_jacobian(const Tensor& x) const {
  check_input(x);
  Trace trace;
  run_forward(x.values(), trace, nullptr, plan_.size());
  LogitJacobian out;
  out.logits = trace.acts.back();
  out.gradients.resize(spec_.class_count);
  std::vector<double> onehot(spec_.class_count, 0.0);
  for (std::size_t k = 0; k < spec_.class_count; ++k) {
    onehot[k] = 1.0;
    run_backward(trace, onehot, nullptr, &out.gradients[k]);
    onehot[k] = 0.0;
  }
  return out;
}

std::vector<double> Network::embed(const Tensor& x) const {
  const std::size_t layer = last_dense_layer(spec_);
  check_input(x);
  Trace trace;
  run_forward(x.values(), trace, nullptr, layer);
  return std::move(trace.acts[layer]);
}

std::size_t Network::embed_dim() const {
  return std::get<Dense>(spec_.layers[last_dense_layer(spec_)]).in;
}

std::vector<double> softmax_probs(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(adam.learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw InvalidInput("Adam betas must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw InvalidInput("Adam epsilon must be positive");
  if (batch_size == 0) throw InvalidInput("batch_size must be at least 1");
  if (epochs == 0) throw InvalidInput("epochs must be at least 1");
}

Network train(Network net, std::span<const TrainingExample> examples, const TrainConfig& cfg) {
  cfg.validate();
  if (examples.empty()) throw InvalidInput("training set is empty");
  for (const auto& ex : examples) {
    if (ex.label >= net.spec_.class_count)
      throw InvalidInput("training label " + std::to_string(ex.label) + " out of range");
    net.check_input(ex.input.get());
  }

  const std::size_t n_params = net.params_.size();
  std::vector<double> grad(n_params), m(n_params, 0.0), v(n_params, 0.0);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  Network::Trace trace;
  const AdamConfig& a = cfg.adam;
  double beta1_t = 1.0, beta2_t = 1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const TrainingExample& ex = examples[order[b]];
        net.run_forward(ex.input.get().values(), trace, &rng, net.plan_.size());
        std::vector<double> g = softmax_probs(trace.acts.back());
        g[ex.label] -= 1.0;
        net.run_backward(trace, g, &grad, nullptr);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      beta1_t *= a.beta1;
      beta2_t *= a.beta2;
      const double step = a.learning_rate / (1.0 - beta1_t);
      const double vcorr = 1.0 / (1.0 - beta2_t);
      double* p = net.params_.data();
#pragma omp simd
      for (std::size_t i = 0; i < n_params; ++i) {
        const double gi = grad[i] * inv;
        m[i] = a.beta1 * m[i] + (1.0 - a.beta1) * gi;
        v[i] = a.beta2 * v[i] + (1.0 - a.beta2) * gi * gi;
        p[i] -= step * m[i] / (std::sqrt(v[i] * vcorr) + a.epsilon);
      }
    }
  }
  net.epochs_ += cfg.epochs;
  return net;
}

std::size_t epochs_for_steps(std::size_t base_steps, std::size_t batch_size, std::size_t n) {
  if (n == 0) throw InvalidInput("training set is empty");
  return std::max<std::size_t>(1, (base_steps * batch_size + n - 1) / n);
}

double mean_loss(const Network& net, std::span<const TrainingExample> examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) {
    const Tensor logits = net.forward(ex.input.get());
    const auto p = softmax_probs(logits.values());
    total -= std::log(std::max(p.at(ex.label), std::numeric_limits<double>::min()));
  }
  return total / static_cast<double>(examples.size());
}

}  // namespace dfal
