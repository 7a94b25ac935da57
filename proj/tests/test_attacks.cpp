#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dfal/attacks.hpp"
#include "dfal/data.hpp"
#include "dfal/errors.hpp"
#include "support.hpp"

using namespace dfal;
using namespace dfal::testing;

namespace {

// Logit difference f1 - f0 = 3 x0 + 4 x1.
Network binary_34() { return linear_net({{-1.5, -2}, {1.5, 2}}); }

bool same(const AdversarialResult& a, const AdversarialResult& b) {
  return a.perturbation == b.perturbation &&
         (a.norm == b.norm || (std::isinf(a.norm) && std::isinf(b.norm))) &&
         a.iterations == b.iterations && a.success == b.success &&
         a.original_label == b.original_label && a.adversarial_label == b.adversarial_label;
}

const TrainedBlobs& three_class() {
  static const TrainedBlobs blobs = trained_blobs(3, 120, 13, 1.0);
  return blobs;
}

}  // namespace

TEST_CASE("linear binary model: one step onto the boundary") {
  const Network net = binary_34();
  const Tensor x = Tensor::vector({1, 1});
  const AdversarialResult r = deepfool(net, x, AttackConfig{});
  REQUIRE(r.success);
  CHECK(r.iterations == 1);
  CHECK(r.original_label == 1);
  CHECK(r.adversarial_label == 0);
  CHECK(std::abs(r.norm - 1.4 * 1.02) < 1e-6);
  CHECK(r.perturbation[0] / r.norm == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(r.perturbation[1] / r.norm == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(net.predict(Tensor::vector({x[0] + r.perturbation[0], x[1] + r.perturbation[1]})) == 0);
}

TEST_CASE("linear binary model under the max norm") {
  AttackConfig cfg;
  cfg.p = NormOrder::linf;
  const AdversarialResult r = deepfool(binary_34(), Tensor::vector({1, 1}), cfg);
  REQUIRE(r.success);
  CHECK(r.iterations == 1);
  CHECK(std::abs(r.norm - 1.0 * 1.02) < 1e-6);
  CHECK(r.perturbation[0] == doctest::Approx(r.perturbation[1]));
}

TEST_CASE("exact tie flips after an infinitesimal step") {
  const Network net = linear_net({{1, 0}, {0, 1}});
  const AdversarialResult r = deepfool(net, Tensor::vector({1, 1}), AttackConfig{});
  CHECK(r.original_label == 0);
  CHECK(r.success);
  CHECK(r.iterations == 1);
  CHECK(r.norm < 1e-9);
}

TEST_CASE("multi-class linear models converge in one step") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t C = 3 + trial % 5, d = 2 + trial % 7;
    std::vector<std::vector<double>> rows(C, std::vector<double>(d));
    std::vector<double> bias(C);
    for (auto& row : rows)
      for (double& v : row) v = g(rng);
    for (double& b : bias) b = g(rng);
    const Network net = linear_net(rows, bias);
    const Tensor x = random_input(d, rng);

    const Tensor logits = net.forward(x);
    const std::size_t k0 = argmax(logits.values());
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < C; ++k) {
      if (k == k0) continue;
      double wn = 0;
      for (std::size_t i = 0; i < d; ++i) wn += (rows[k][i] - rows[k0][i]) * (rows[k][i] - rows[k0][i]);
      margin = std::min(margin, (logits[k0] - logits[k]) / std::sqrt(wn));
    }
    const AdversarialResult r = deepfool(net, x, AttackConfig{});
    CHECK(r.success);
    CHECK(r.iterations == 1);
    CHECK(std::abs(r.norm - 1.02 * margin) <= 1e-6 * 1.02 * margin + 1e-9);
  }
}

TEST_CASE("trained 3-class net: attack norm against the brute-force margin") {
  const auto& [data, net] = three_class();
  const Dataset test = gen_blobs({3, 34, 2, 2.0, 1.0, 99});
  std::size_t tight = 0, total = 0;
  for (std::size_t i = 0; i < test.size() && total < 100; ++i, ++total) {
    const AdversarialResult r = deepfool(net, test.inputs[i], AttackConfig{});
    REQUIRE(r.success);
    const double truth = margin_oracle(net, test.inputs[i]);
    CHECK(truth <= r.norm + 1e-3);
    if (r.norm <= 1.5 * truth) ++tight;
  }
  CHECK(total == 100);
  CHECK(tight >= 90);
}

TEST_CASE("batch_deepfool matches sequential calls") {
  const auto& [data, net] = three_class();
  std::vector<std::reference_wrapper<const Tensor>> xs;
  for (std::size_t i = 0; i < 50; ++i) xs.push_back(data.inputs[i * 7]);
  const AttackConfig cfg;

  const auto serial = batch_deepfool(net, xs, cfg, Execution::serial);
  const auto parallel = batch_deepfool(net, xs, cfg, Execution::parallel);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(same(serial[i], deepfool(net, xs[i], cfg)));
    CHECK(same(serial[i], parallel[i]));
  }
  const auto one = batch_deepfool(net, std::span(xs).first(1), cfg);
  CHECK(same(one[0], deepfool(net, xs[0], cfg)));
}

TEST_CASE("broken inputs give an infinite norm") {
  Network net = linear_net({{1, 0}, {0, 1}});
  net.weights(0)[0] = std::numeric_limits<double>::quiet_NaN();
  const AdversarialResult r = deepfool(net, Tensor::vector({1, 2}), AttackConfig{});
  CHECK_FALSE(r.success);
  CHECK(std::isinf(r.norm));
  CHECK_FALSE(r.adversarial_label.has_value());

  const Network good = linear_net({{1, 0}, {0, 1}});
  const Tensor wrong = Tensor::vector({1, 2, 3});
  const std::vector<std::reference_wrapper<const Tensor>> xs{wrong};
  const auto batch = batch_deepfool(good, xs, AttackConfig{});
  CHECK_FALSE(batch[0].success);
  CHECK(std::isinf(batch[0].norm));
}

TEST_CASE("flat logits stop the attack without success") {
  const Network net = linear_net({{1, 1}, {1, 1}}, {1, 0});
  const AdversarialResult r = deepfool(net, Tensor::vector({0.3, 0.4}), AttackConfig{});
  CHECK_FALSE(r.success);
  CHECK(r.iterations == 0);
}

TEST_CASE("config guards") {
  AttackConfig cfg;
  cfg.overshoot = -0.1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = AttackConfig{};
  cfg.max_iter = 0;
  CHECK_THROWS_AS(deepfool(binary_34(), Tensor::vector({1, 1}), cfg), InvalidInput);
  cfg = AttackConfig{};
  cfg.clip = true;
  cfg.clip_min = 1;
  cfg.clip_max = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("clipping keeps the adversarial point in range") {
  AttackConfig cfg;
  cfg.clip = true;
  const Network net = linear_net({{-1.5, -2}, {1.5, 2}}, {0, 0.5});
  const AdversarialResult r = deepfool(net, Tensor::vector({0.3, 0.2}), cfg);
  CHECK(0.3 + r.perturbation[0] >= 0.0);
  CHECK(0.2 + r.perturbation[1] >= 0.0);
  CHECK_FALSE(r.success);
}
