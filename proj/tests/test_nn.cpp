#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dfal/errors.hpp"
#include "dfal/nn.hpp"
#include "support.hpp"

using namespace dfal;
using namespace dfal::testing;

namespace {

double loss_at(const Network& net, const Tensor& x, std::size_t label) {
  const auto p = softmax_probs(net.forward(x).values());
  return -std::log(p[label]);
}

double numeric_param_grad(Network& net, const Tensor& x, std::size_t label, std::size_t i,
                          double h = 1e-4) {
  auto params = net.parameters();
  const double saved = params[i];
  params[i] = saved + h;
  const double up = loss_at(net, x, label);
  params[i] = saved - h;
  const double down = loss_at(net, x, label);
  params[i] = saved;
  return (up - down) / (2 * h);
}

double numeric_input_grad(const Network& net, Tensor x, std::size_t k, std::size_t i,
                          double h = 1e-4) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = net.forward(x)[k];
  x[i] = saved - h;
  const double down = net.forward(x)[k];
  return (up - down) / (2 * h);
}

Network small_conv_net(std::uint64_t seed) {
  Network net(NetworkSpec{{1, 6, 6},
                          {Conv2d{2, 3, 1}, Relu{}, MaxPool{2}, Flatten{}, Dense{8, 5}, Relu{},
                           Dense{5, 3}},
                          3,
                          seed});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.2);
  for (double& p : net.parameters()) p += g(rng);
  return net;
}

}  // namespace

TEST_CASE("tensor basics") {
  const Tensor t({2, 3}, {1, -2, 3, -4, 5, -6});
  CHECK(t.size() == 6);
  CHECK(shape_string(t.shape()) == "[2x3]");
  CHECK(norm_l1(t.values()) == doctest::Approx(21.0));
  CHECK(norm_linf(t.values()) == doctest::Approx(6.0));
  CHECK(norm_l2(std::vector<double>{3, 4}) == doctest::Approx(5.0));
  CHECK(argmax(std::vector<double>{1, 3, 3, 2}) == 1);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), InvalidInput);
  CHECK_THROWS_AS(Tensor({0, 2}), InvalidInput);
  CHECK_FALSE(Tensor::vector({1.0, NAN}).all_finite());
}

TEST_CASE("forward: identity dense layer") {
  const Network net = linear_net({{1, 0}, {0, 1}});
  const Tensor logits = net.forward(Tensor::vector({1, 2}));
  CHECK(logits[0] == 1.0);
  CHECK(logits[1] == 2.0);
}

TEST_CASE("forward: deterministic mode is repeatable") {
  const Network net = random_mlp(4, 7, 3, 11, 0.25);
  std::mt19937_64 rng(3);
  const Tensor x = random_input(4, rng);
  CHECK(net.forward(x) == net.forward(x));
}

TEST_CASE("forward: matches hand-written affine, relu, affine") {
  const Network net = random_mlp(3, 4, 2, 5);
  std::mt19937_64 rng(9);
  const Tensor x = random_input(3, rng);
  const auto W1 = net.weights(0), b1 = net.biases(0);
  const auto W2 = net.weights(2), b2 = net.biases(2);
  double h[4];
  for (int j = 0; j < 4; ++j) {
    double s = b1[j];
    for (int i = 0; i < 3; ++i) s += W1[j * 3 + i] * x[i];
    h[j] = s > 0 ? s : 0;
  }
  const Tensor logits = net.forward(x);
  for (int k = 0; k < 2; ++k) {
    double s = b2[k];
    for (int j = 0; j < 4; ++j) s += W2[k * 4 + j] * h[j];
    CHECK(logits[k] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("forward: dropout sampling") {
  const Network net = random_mlp(4, 16, 3, 2, 0.5);
  std::mt19937_64 rng(1);
  const Tensor x = random_input(4, rng);
  CHECK(net.forward(x, StochasticDropout{7}) == net.forward(x, StochasticDropout{7}));
  CHECK_FALSE(net.forward(x, StochasticDropout{7}) == net.forward(x, StochasticDropout{8}));

  const Network no_drop = random_mlp(4, 16, 3, 2, 0.0);
  Network zero_rate(NetworkSpec{{4}, {Dense{4, 16}, Relu{}, Dropout{0.0}, Dense{16, 3}}, 3, 2});
  std::copy(no_drop.parameters().begin(), no_drop.parameters().end(),
            zero_rate.parameters().begin());
  CHECK(zero_rate.forward(x, StochasticDropout{3}) == no_drop.forward(x));
}

TEST_CASE("forward: bad input shape") {
  const Network net = random_mlp(4, 5, 2, 1);
  CHECK_THROWS_AS(net.forward(Tensor::vector({1, 2, 3})), InvalidInput);
}

TEST_CASE("softmax") {
  const auto uniform = softmax_probs(std::vector<double>{0, 0, 0});
  for (double p : uniform) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));

  const auto big = softmax_probs(std::vector<double>{1000, 0});
  CHECK(std::abs(big[0] - 1.0) < 1e-12);
  CHECK(std::abs(big[1]) < 1e-12);

  const auto two = softmax_probs(std::vector<double>{1, 2});
  const double logistic = 1.0 / (1.0 + std::exp(1.0));
  CHECK(std::abs(two[0] - 0.26894) < 1e-5);
  CHECK(std::abs(two[1] - 0.73106) < 1e-5);
  CHECK(two[0] == doctest::Approx(logistic).epsilon(1e-14));
}

TEST_CASE("grad_params: zero final layer stops the gradient") {
  Network net = random_mlp(3, 5, 4, 8);
  for (double& w : net.weights(2)) w = 0.0;
  std::mt19937_64 rng(2);
  const auto g = net.grad_params(random_input(3, rng), 1);
  const auto& first = net.plan()[0];
  for (std::size_t i = 0; i < first.weight_count; ++i) CHECK(g[first.weight_offset + i] == 0.0);
  for (std::size_t i = 0; i < first.bias_count; ++i) CHECK(g[first.bias_offset + i] == 0.0);
}

TEST_CASE("grad_params: single layer closed form") {
  const Network net = linear_net({{0.5, -1, 2}, {1, 0.25, -0.5}, {-1, 1, 1}}, {0.1, 0.2, -0.3});
  const Tensor x = Tensor::vector({0.3, -1.2, 0.7});
  const std::size_t label = 2;
  const auto p = softmax_probs(net.forward(x).values());
  const auto g = net.grad_params(x, label);
  for (std::size_t o = 0; o < 3; ++o) {
    const double delta = p[o] - (o == label ? 1.0 : 0.0);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(g[o * 3 + i] == doctest::Approx(delta * x[i]).epsilon(1e-12));
    CHECK(g[9 + o] == doctest::Approx(delta).epsilon(1e-12));
  }
  CHECK_THROWS_AS(net.grad_params(x, 3), InvalidInput);
}

TEST_CASE("grad_params: central differences on a two-layer net") {
  Network net = random_mlp(4, 6, 3, 21);
  std::mt19937_64 rng(21);
  const Tensor x = random_input(4, rng);
  const auto g = net.grad_params(x, 1);
  std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
  for (int s = 0; s < 5; ++s) {
    const std::size_t i = pick(rng);
    CHECK(gradient_close(g[i], numeric_param_grad(net, x, 1, i)));
  }
}

TEST_CASE("grad_params: central differences through conv and pooling") {
  Network net = small_conv_net(4);
  std::mt19937_64 rng(4);
  const Tensor x = Tensor({1, 6, 6}, [&] {
    std::vector<double> v(36);
    std::uniform_real_distribution<double> u(0, 1);
    for (double& e : v) e = u(rng);
    return v;
  }());
  const auto g = net.grad_params(x, 2);
  for (std::size_t i = 0; i < net.parameter_count(); ++i)
    CHECK(gradient_close(g[i], numeric_param_grad(net, x, 2, i)));
  for (std::size_t k = 0; k < 3; ++k) {
    const Tensor gx = net.grad_input_logit(x, k);
    for (std::size_t i = 0; i < 36; ++i) CHECK(gradient_close(gx[i], numeric_input_grad(net, x, k, i)));
  }
}

TEST_CASE("grad_input_logit: linear model") {
  const Network net = linear_net({{1, 2}, {3, 4}});
  const Tensor g = net.grad_input_logit(Tensor::vector({0.5, -7}), 1);
  CHECK(g[0] == 3.0);
  CHECK(g[1] == 4.0);
  CHECK_THROWS_AS(net.grad_input_logit(Tensor::vector({0, 0}), 2), InvalidInput);
}

TEST_CASE("grad_input_logit: central differences") {
  const Network net = random_mlp(5, 8, 4, 33);
  std::mt19937_64 rng(33);
  const Tensor x = random_input(5, rng);
  for (std::size_t k = 0; k < 4; ++k) {
    const Tensor g = net.grad_input_logit(x, k);
    for (std::size_t i = 0; i < 5; ++i) CHECK(gradient_close(g[i], numeric_input_grad(net, x, k, i)));
  }
}

TEST_CASE("grad_input_logit: inactive relu unit contributes nothing") {
  Network net(NetworkSpec{{2}, {Dense{2, 2}, Relu{}, Dense{2, 1}}, 1, 0});
  auto w1 = net.weights(0);
  w1[0] = -1; w1[1] = -1;  // unit 0: -x0 - x1, dead for positive inputs
  w1[2] = 2;  w1[3] = 5;
  auto w2 = net.weights(2);
  w2[0] = 10; w2[1] = 3;
  for (double& b : net.biases(0)) b = 0;
  const Tensor g = net.grad_input_logit(Tensor::vector({1, 1}), 0);
  CHECK(g[0] == 6.0);
  CHECK(g[1] == 15.0);
}

TEST_CASE("logit_jacobian agrees with per-class gradients") {
  const Network net = random_mlp(3, 6, 4, 17);
  std::mt19937_64 rng(17);
  const Tensor x = random_input(3, rng);
  const LogitJacobian jac = net.logit_jacobian(x);
  const Tensor logits = net.forward(x);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(jac.logits[k] == logits[k]);
    const Tensor g = net.grad_input_logit(x, k);
    for (std::size_t i = 0; i < 3; ++i) CHECK(jac.gradients[k][i] == doctest::Approx(g[i]).epsilon(1e-12));
  }
}

TEST_CASE("train: separable pair") {
  const Tensor a = Tensor::vector({-1, -1}), b = Tensor::vector({1, 1});
  const std::vector<TrainingExample> ex{{a, 0}, {b, 1}};
  Network net(NetworkSpec{{2}, {Dense{2, 2}}, 2, 3});
  net = train(std::move(net), ex, TrainConfig{{}, 32, 200, 1});
  CHECK(net.predict(a) == 0);
  CHECK(net.predict(b) == 1);
  CHECK(net.epochs_trained() == 200);
}

TEST_CASE("train: same seed and data give identical parameters") {
  const Dataset d = gen_blobs({3, 40, 2, 2.0, 0.5, 1});
  const auto ex = examples_of(d);
  const auto spec = make_arch(Arch::B, {2}, 3, 9);
  const Network a = train(Network(spec), ex, TrainConfig{{}, 16, 5, 42});
  const Network b = train(Network(spec), ex, TrainConfig{{}, 16, 5, 42});
  const Network c = train(Network(spec), ex, TrainConfig{{}, 16, 5, 43});
  CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  CHECK_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST_CASE("train: 4-class blobs reach 95% training accuracy") {
  const auto [data, net] = trained_blobs(4, 100, 5);
  CHECK(accuracy(net, data, Execution::serial) >= 0.95);
}

TEST_CASE("train: guards") {
  const Tensor a = Tensor::vector({0, 0});
  Network net = linear_net({{1, 0}, {0, 1}});
  CHECK_THROWS_AS(train(net, {}, TrainConfig{}), InvalidInput);
  const std::vector<TrainingExample> bad{{a, 5}};
  CHECK_THROWS_AS(train(net, bad, TrainConfig{}), InvalidInput);
  CHECK_THROWS_AS(TrainConfig({}, 0, 1, 0).validate(), InvalidInput);
}

TEST_CASE("epochs_for_steps") {
  CHECK(epochs_for_steps(2000, 32, 20) == 3200);
  CHECK(epochs_for_steps(2000, 32, 1000) == 64);
  CHECK(epochs_for_steps(10, 32, 33) == 10);
}

TEST_CASE("embed") {
  Network net(NetworkSpec{{3}, {Dense{3, 3}, Relu{}, Dense{3, 2}}, 2, 1});
  auto w = net.weights(0);
  for (std::size_t i = 0; i < 9; ++i) w[i] = (i % 4 == 0) ? 1.0 : 0.0;
  for (double& b : net.biases(0)) b = 0;
  const Tensor x = Tensor::vector({0.5, -2, 3});
  const auto e = net.embed(x);
  CHECK(e == std::vector<double>{0.5, 0, 3});
  CHECK(net.embed_dim() == 3);
  CHECK(net.embed(x) == net.embed(Tensor::vector({0.5, -2, 3})));

  const Network b = Network(make_arch(Arch::B, {2}, 4, 0));
  CHECK(b.embed_dim() == 64);
  CHECK(b.embed(Tensor::vector({1, 1})).size() == 64);
}

TEST_CASE("architectures") {
  CHECK(parse_arch("arch-A") == Arch::A);
  CHECK(parse_arch("b") == Arch::B);
  CHECK(arch_name(Arch::B) == "arch-B");
  CHECK_THROWS_AS(parse_arch("arch-C"), InvalidInput);

  const Network image(make_arch(Arch::A, {1, 28, 28}, 10, 1));
  CHECK(image.spec().has_dropout());
  CHECK(std::holds_alternative<Conv2d>(image.spec().layers.front()));
  CHECK(image.forward(Tensor({1, 28, 28})).size() == 10);

  const Network flat(make_arch(Arch::A, {2}, 4, 1));
  CHECK(std::holds_alternative<Dense>(flat.spec().layers.front()));
  CHECK(flat.embed_dim() == 64);

  NetworkSpec broken{{3}, {Dense{4, 2}}, 2, 0};
  CHECK_THROWS_AS(broken.validate(), InvalidInput);
  NetworkSpec wrong_width{{3}, {Dense{3, 5}}, 2, 0};
  CHECK_THROWS_AS(wrong_width.validate(), InvalidInput);
}
