#include <doctest.h>

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "pdmotion/inception.hpp"
#include "pdmotion/nnet.hpp"

using namespace pdmotion;
using namespace pdmotion::nn;

namespace {

Tensor random_batch(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  return oracle::random_tensor(std::move(shape), rng);
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("gradient check: every layer kind in isolation") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CAPTURE(seed);
    {
      Conv1d c(3, 4, 5);
      CHECK(oracle::layer_gradient_error(c, {random_batch({2, 3, 11}, seed)}, seed) < kTol);
    }
    {
      Conv1d c(2, 3, 4);  // even filter: asymmetric padding
      CHECK(oracle::layer_gradient_error(c, {random_batch({2, 2, 9}, seed)}, seed) < kTol);
    }
    {
      Conv1d c(3, 2, 1);
      CHECK(oracle::layer_gradient_error(c, {random_batch({3, 3, 7}, seed)}, seed) < kTol);
    }
    {
      Dense d(6, 4);
      CHECK(oracle::layer_gradient_error(d, {random_batch({5, 6}, seed)}, seed) < kTol);
    }
    {
      BatchNorm bn(3);
      CHECK(oracle::layer_gradient_error(bn, {random_batch({4, 3, 6}, seed)}, seed) < kTol);
    }
    {
      BatchNorm bn(5);
      CHECK(oracle::layer_gradient_error(bn, {random_batch({6, 5}, seed)}, seed) < kTol);
    }
    for (auto f : {Activation::Linear, Activation::ReLU, Activation::Sigmoid}) {
      ActivationLayer a(f);
      CHECK(oracle::layer_gradient_error(a, {random_batch({3, 2, 5}, seed)}, seed) < kTol);
    }
    {
      GlobalAvgPool g;
      CHECK(oracle::layer_gradient_error(g, {random_batch({3, 4, 6}, seed)}, seed) < kTol);
    }
    {
      MaxPool m(3);
      CHECK(oracle::layer_gradient_error(m, {random_batch({2, 3, 8}, seed)}, seed) < kTol);
    }
    {
      Concat c;
      CHECK(oracle::layer_gradient_error(c, {random_batch({2, 2, 5}, seed), random_batch({2, 3, 5}, seed + 9)},
                                         seed) < kTol);
    }
    {
      Add a;
      CHECK(oracle::layer_gradient_error(a, {random_batch({2, 3, 5}, seed), random_batch({2, 3, 5}, seed + 9)},
                                         seed) < kTol);
    }
  }
}

TEST_CASE("gradient check: composed inception network with a residual shortcut") {
  InceptionHyperparams hp;
  hp.filter_len = 8;
  hp.n_filters = 2;
  hp.depth = 3;
  hp.bottleneck_channels = 2;
  auto net = build_network(hp, 3, 3, 12);
  net.init(4);
  const auto x = random_batch({4, 3, 12}, 5);
  const std::vector<int> y = {0, 1, 2, 1};
  CHECK(oracle::network_gradient_error(net, x, y) < kTol);
}

TEST_CASE("gradient check: MLP") {
  auto net = build_mlp(5, 3, 7);
  net.init(1);
  const auto x = random_batch({6, 5}, 2);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2};
  CHECK(oracle::network_gradient_error(net, x, y) < kTol);
}

TEST_CASE("kink signature tracks ReLU signs and max-pool winners") {
  Network net({1, 4});
  const int relu = net.add(std::make_unique<ActivationLayer>(Activation::ReLU), {Network::kInput});
  net.add(std::make_unique<MaxPool>(3), {relu});
  Tensor x({1, 1, 4});
  x.data = {0.5, 1e-5, 2.0, -1.0};
  const auto base = oracle::kink_signature(net, x);
  x.data[1] = -1e-5;
  CHECK(oracle::kink_signature(net, x) != base);
  x.data = {0.5, 1e-5, 2.0, -1.0};
  x.data[0] = 0.6;
  CHECK(oracle::kink_signature(net, x) == base);
  x.data[0] = 2.5;  // beats 2.0 in the window centred on position 1
  CHECK(oracle::kink_signature(net, x) != base);
}

TEST_CASE("softmax and cross-entropy") {
  RowMatrix z = RowMatrix::Zero(2, 4);
  const auto p = softmax(z);
  CHECK(p(0, 2) == doctest::Approx(0.25));
  Rng rng(1);
  std::normal_distribution<double> n(0, 30);
  RowMatrix big(50, 6);
  for (long i = 0; i < big.size(); ++i) big.data()[i] = n(rng);
  const auto q = softmax(big);
  for (long r = 0; r < q.rows(); ++r) CHECK(std::abs(q.row(r).sum() - 1.0) < 1e-9);

  const std::vector<int> y4 = {0, 3};
  CHECK(cross_entropy(p, y4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  RowMatrix perfect(1, 2);
  perfect << 1.0, 0.0;
  CHECK(cross_entropy(perfect, std::vector<int>{0}) == 0.0);
  RowMatrix p73(1, 2);
  p73 << 0.7, 0.3;
  CHECK(cross_entropy(p73, std::vector<int>{0}) == doctest::Approx(-std::log(0.7)).epsilon(1e-12));
}

TEST_CASE("logit gradient of softmax cross-entropy is (p - y) / batch") {
  // For a single dense layer the bias gradient is the batch sum of the logit gradient.
  Network net({3});
  net.add(std::make_unique<Dense>(3, 3), {Network::kInput});
  net.init(0);
  const auto x = random_batch({4, 3}, 8);
  const std::vector<int> y = {2, 0, 1, 1};
  net.compute_gradients(x, y);
  const auto p = net.predict(x);
  const auto& bias_grad = net.params()[1]->grad;
  for (int c = 0; c < 3; ++c) {
    double expect = 0;
    for (int b = 0; b < 4; ++b) expect += (p(b, c) - (y[b] == c ? 1.0 : 0.0)) / 4.0;
    CHECK(bias_grad[c] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("zero input through a bias-free conv stack gives zero conv gradients") {
  Network net({2, 10});
  int h = net.add(std::make_unique<Conv1d>(2, 3, 3), {Network::kInput});
  h = net.add(std::make_unique<Conv1d>(3, 3, 5), {h});
  h = net.add(std::make_unique<GlobalAvgPool>(), {h});
  net.add(std::make_unique<Dense>(3, 2), {h});
  net.init(1);
  Tensor x({3, 2, 10});
  net.compute_gradients(x, std::vector<int>{0, 1, 0});
  const auto params = net.params();  // two conv filters, then dense weight and bias
  for (int k = 0; k < 2; ++k)
    for (double g : params[k]->grad) CHECK(g == 0.0);
}

TEST_CASE("MLP hidden activations lie in (0, 1)") {
  auto net = build_mlp(4, 2, 8);
  net.init(3);
  Network probe({4});
  // Rebuild the first two layers with the same weights to read hidden units.
  int h = probe.add(std::make_unique<Dense>(4, 8), {Network::kInput});
  probe.add(std::make_unique<ActivationLayer>(Activation::Sigmoid), {h});
  probe.params()[0]->value = net.params()[0]->value;
  probe.params()[1]->value = net.params()[1]->value;
  const auto x = random_batch({16, 4}, 4);
  const auto hidden = probe.logits(x);
  for (double v : hidden.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("inference is deterministic per row") {
  auto net = build_mlp(5, 3);
  net.init(2);
  Tensor x({2, 5});
  for (int i = 0; i < 5; ++i) x.data[i] = x.data[5 + i] = 0.1 * i;
  const auto p = net.predict(x);
  CHECK(p.row(0) == p.row(1));
}

TEST_CASE("shape errors name the offending layer") {
  Network net({3, 20});
  const int c = net.add(std::make_unique<Conv1d>(3, 4, 3), {Network::kInput}, "first_conv");
  CHECK_THROWS_WITH_AS(net.add(std::make_unique<Conv1d>(5, 4, 3), {c}, "second_conv"),
                       doctest::Contains("second_conv"), ConfigError);
  const auto bad = random_batch({2, 4, 20}, 1);
  CHECK_THROWS_AS(net.logits(bad), DataError);
}

TEST_CASE("Adam: zero gradients leave parameters unchanged") {
  Param p;
  p.resize(3);
  p.value = {1.0, -2.0, 3.0};
  AdamState s;
  std::vector<Param*> ps = {&p};
  for (int i = 0; i < 5; ++i) adam_step(s, ps);
  CHECK(p.value == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("Adam: first step is scale invariant and a constant gradient gives steps of lr") {
  Param p;
  p.resize(2);
  p.grad = {0.3, 0.6};
  AdamState s;
  std::vector<Param*> ps = {&p};
  adam_step(s, ps);
  CHECK(p.value[0] == doctest::Approx(p.value[1]).epsilon(1e-6));
  CHECK(std::abs(p.value[0]) == doctest::Approx(1e-3).epsilon(1e-4));
  double prev = p.value[0];
  for (int i = 0; i < 2000; ++i) {
    adam_step(s, ps);
    const double step = std::abs(p.value[0] - prev);
    prev = p.value[0];
    if (i == 1999) CHECK(step == doctest::Approx(1e-3).epsilon(1e-4));
  }
}

namespace {

struct Toy {
  Tensor x;
  std::vector<int> y;
};

// Two Gaussian blobs separated along the first axis.
Toy separable(std::size_t n, std::uint64_t seed) {
  Toy t{Tensor({n, 4}), {}};
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    t.y.push_back(c);
    for (std::size_t j = 0; j < 4; ++j) t.x.data[i * 4 + j] = noise(rng);
    t.x.data[i * 4] += c ? 2.0 : -2.0;
  }
  return t;
}

}  // namespace

TEST_CASE("training: separable toy data reaches accuracy 1 in 200 epochs") {
  const auto toy = separable(64, 1);
  auto net = build_mlp(4, 2);
  net.init(7);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.seed = 3;
  const auto result = train(net, toy.x, toy.y, cfg);
  CHECK(result.loss_trace.size() == 200);
  CHECK(net.epochs_trained == 200);
  const auto p = net.predict(toy.x);
  int correct = 0;
  for (std::size_t i = 0; i < toy.y.size(); ++i) {
    Eigen::Index arg;
    p.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    correct += arg == toy.y[i];
  }
  CHECK(correct == 64);
}

TEST_CASE("training: epochs must be positive and seeds are reproducible") {
  const auto toy = separable(20, 2);
  auto net = build_mlp(4, 2, 8);
  net.init(1);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(net, toy.x, toy.y, cfg), ConfigError);
  cfg.epochs = 5;
  cfg.batch_size = 6;  // last batch is partial
  auto a = net, b = net;
  train(a, toy.x, toy.y, cfg);
  train(b, toy.x, toy.y, cfg);
  for (std::size_t k = 0; k < a.params().size(); ++k) CHECK(a.params()[k]->value == b.params()[k]->value);
}

TEST_CASE("training: full-batch loss is non-increasing with a small step") {
  const auto toy = separable(32, 5);
  auto net = build_mlp(4, 2, 16);
  net.init(5);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 32;
  cfg.adam.learning_rate = 1e-4;
  const auto trace = train(net, toy.x, toy.y, cfg).loss_trace;
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
}

TEST_CASE("training: non-finite data aborts") {
  auto toy = separable(8, 1);
  toy.x.data[3] = std::nan("");
  auto net = build_mlp(4, 2, 4);
  net.init(0);
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(net, toy.x, toy.y, cfg), TrainingError);
}

TEST_CASE("MLP parameter count and JSON round trip") {
  auto net = build_mlp(70, 4);
  CHECK(net.parameter_count() == 70 * 128 + 128 + 128 * 128 + 128 + 128 * 4 + 4);
  net.init(9);
  net.epochs_trained = 3;
  const auto copy = Network::from_json(net.to_json());
  CHECK(copy.epochs_trained == 3);
  CHECK(copy.seed == net.seed);
  const auto x = random_batch({3, 70}, 1);
  CHECK(copy.predict(x) == net.predict(x));
}
