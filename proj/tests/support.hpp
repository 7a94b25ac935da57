#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dfal/data.hpp"
#include "dfal/nn.hpp"
#include "dfal/tensor.hpp"

namespace dfal::testing {

/// Single dense layer with the given rows (one per class) and biases.
inline Network linear_net(const std::vector<std::vector<double>>& rows,
                          std::vector<double> bias = {}) {
  const std::size_t in = rows.front().size();
  Network net(NetworkSpec{{in}, {Dense{in, rows.size()}}, rows.size(), 0});
  auto w = net.weights(0);
  for (std::size_t o = 0; o < rows.size(); ++o)
    for (std::size_t i = 0; i < in; ++i) w[o * in + i] = rows[o][i];
  if (bias.empty()) bias.assign(rows.size(), 0.0);
  auto b = net.biases(0);
  for (std::size_t o = 0; o < rows.size(); ++o) b[o] = bias[o];
  return net;
}

/// dense(hidden) -> relu [-> dropout] -> dense(C), random weights and biases.
inline Network random_mlp(std::size_t in, std::size_t hidden, std::size_t classes,
                          std::uint64_t seed, double dropout = 0.0) {
  std::vector<Layer> layers{Dense{in, hidden}, Relu{}};
  if (dropout > 0.0) layers.push_back(Dropout{dropout});
  layers.push_back(Dense{hidden, classes});
  Network net(NetworkSpec{{in}, layers, classes, seed});
  std::mt19937_64 rng(seed ^ 0xb1a5);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (double& p : net.parameters()) p += noise(rng);
  return net;
}

inline Tensor random_input(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return Tensor::vector(std::move(v));
}

inline std::vector<TrainingExample> examples_of(const Dataset& d) {
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < d.size(); ++i) out.push_back({d.inputs[i], d.labels[i]});
  return out;
}

/// Blobs on the default circle, trained with a small dense net.
struct TrainedBlobs {
  Dataset data;
  Network net;
};

inline TrainedBlobs trained_blobs(std::size_t classes, std::size_t per_class, std::uint64_t seed,
                                  double scale = 0.5, std::size_t epochs = 60) {
  Dataset data = gen_blobs({classes, per_class, 2, 2.0, scale, seed});
  Network net(NetworkSpec{{2}, {Dense{2, 32}, Relu{}, Dense{32, classes}}, classes, seed});
  const auto ex = examples_of(data);
  net = train(std::move(net), ex, TrainConfig{{0.01, 0.9, 0.999, 1e-8}, 32, epochs, seed});
  return {std::move(data), std::move(net)};
}

/// Relative error below tol, or absolute error below floor.
inline bool gradient_close(double analytic, double numeric, double tol = 1e-4,
                           double floor = 1e-6) {
  const double diff = std::abs(analytic - numeric);
  if (diff < floor) return true;
  return diff / std::max(std::abs(analytic), std::abs(numeric)) < tol;
}

}  // namespace dfal::testing
