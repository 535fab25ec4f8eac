#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "pdmotion/rocket.hpp"
#include "support.hpp"

using namespace pdmotion;

namespace {

// Direct evaluation with an explicitly zero-padded copy of the series.
PooledFeatures naive_apply(const std::vector<double>& x, const RandomKernel& k) {
  const int pad = k.padding ? (k.length - 1) * k.dilation / 2 : 0;
  std::vector<double> padded(static_cast<std::size_t>(pad), 0.0);
  padded.insert(padded.end(), x.begin(), x.end());
  padded.insert(padded.end(), static_cast<std::size_t>(pad), 0.0);
  const long span = (k.length - 1) * k.dilation + 1;
  double positive = 0, mx = -1e300, n = 0;
  for (long t = 0; t + span <= static_cast<long>(padded.size()); ++t) {
    double s = k.bias;
    for (int j = 0; j < k.length; ++j) s += k.weights[j] * padded[t + j * k.dilation];
    positive += s > 0;
    mx = std::max(mx, s);
    ++n;
  }
  return {positive / n, mx};
}

RandomKernel kernel(std::vector<double> w, double bias, int dilation = 1, bool padding = false) {
  RandomKernel k;
  k.length = static_cast<int>(w.size());
  k.weights = std::move(w);
  k.bias = bias;
  k.dilation = dilation;
  k.padding = padding;
  return k;
}

}  // namespace

TEST_CASE("apply_kernel: hand convolutions") {
  const std::vector<double> x = {0, 0, 1, 0, 0};
  auto f = apply_kernel(x, kernel({1, 1, 1}, 0.0));
  CHECK(f.ppv == 1.0);
  CHECK(f.max == 1.0);
  f = apply_kernel(x, kernel({1, 1, 1}, -2.0));
  CHECK(f.ppv == 0.0);
  CHECK(f.max == -1.0);
  const std::vector<double> zeros(30, 0.0);
  f = apply_kernel(zeros, kernel({0.5, -1, 0.5, 0.2, -0.2, 0.1, -0.1}, 0.0, 3, true));
  CHECK(f.ppv == 0.0);
  CHECK(f.max == 0.0);
  CHECK_THROWS_WITH_AS(apply_kernel(x, kernel({1, 1, 1}, 0.0, 3)), "kernel exceeds input", DataError);
}

TEST_CASE("apply_kernel agrees with a direct padded convolution") {
  const auto bank = generate_kernels(300, 64, 5);
  Rng rng(2);
  std::normal_distribution<double> n;
  std::vector<double> x(64);
  for (double& v : x) v = n(rng);
  for (const auto& k : bank.kernels) {
    const auto a = apply_kernel(x, k);
    const auto b = naive_apply(x, k);
    CHECK(a.ppv == b.ppv);
    CHECK(a.max == doctest::Approx(b.max).epsilon(1e-12));
  }
}

TEST_CASE("generate_kernels: distribution scan") {
  CHECK(generate_kernels(0, 1500, 1).size() == 0);
  const auto bank = generate_kernels(10000, 1500, 7);
  REQUIRE(bank.size() == 10000);
  int padded = 0;
  for (const auto& k : bank.kernels) {
    CHECK((k.length == 7 || k.length == 9 || k.length == 11));
    CHECK(k.bias >= -1.0);
    CHECK(k.bias <= 1.0);
    CHECK(k.dilation >= 1);
    CHECK(k.span() <= 1500);
    const double mean = std::accumulate(k.weights.begin(), k.weights.end(), 0.0) / k.length;
    CHECK(std::abs(mean) <= 1e-9);
    padded += k.padding;
  }
  CHECK(padded > 4500);
  CHECK(padded < 5500);
  CHECK_THROWS_AS(generate_kernels(5, 8, 0), ConfigError);
}

TEST_CASE("generate_kernels: reproducible from the seed") {
  const auto a = generate_kernels(50, 300, 11), b = generate_kernels(50, 300, 11);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.kernels[i].weights == b.kernels[i].weights);
    CHECK(a.kernels[i].bias == b.kernels[i].bias);
    CHECK(a.kernels[i].dilation == b.kernels[i].dilation);
    CHECK(a.kernels[i].padding == b.kernels[i].padding);
  }
  const auto c = kernel_bank_from_json(to_json(a));
  CHECK(c.kernels[49].weights == a.kernels[49].weights);
}

TEST_CASE("transform: layout, bounds and thread independence") {
  const auto bank = generate_kernels(1, 40, 3);
  std::vector<Window> one = {testing::window(std::vector<double>(120, 0.5), 3)};
  CHECK(transform(one, bank).cols() == 6);
  CHECK(transform(std::span<const Window>(), bank).rows() == 0);
  CHECK(transform(std::span<const Window>(), bank).cols() == 6);

  const auto big = generate_kernels(40, 50, 9);
  Rng rng(4);
  std::normal_distribution<double> n;
  std::vector<Window> w;
  for (int i = 0; i < 7; ++i) {
    std::vector<double> v(150);
    for (double& x : v) x = n(rng);
    w.push_back(testing::window(v, 3));
  }
  set_thread_count(1);
  const auto serial = transform(w, big);
  set_thread_count(4);
  const auto parallel = transform(w, big);
  set_thread_count(1);
  CHECK(serial == parallel);
  for (long i = 0; i < serial.rows(); ++i)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < 40; ++k) {
        const auto col = static_cast<long>(c * 80 + 2 * k);
        const auto ref = naive_apply({w[i].channel(c).begin(), w[i].channel(c).end()}, big.kernels[k]);
        CHECK(serial(i, col) == ref.ppv);
        CHECK(serial(i, col + 1) == doctest::Approx(ref.max).epsilon(1e-12));
        CHECK(serial(i, col) >= 0.0);
        CHECK(serial(i, col) <= 1.0);
      }

  std::vector<Window> wrong = {testing::window(std::vector<double>(90, 0.0), 3)};
  CHECK_THROWS(transform(wrong, big));
}

TEST_CASE("transform: one bank per channel") {
  std::vector<KernelBank> banks = {generate_kernels(3, 20, 1), generate_kernels(3, 20, 2), generate_kernels(3, 20, 3)};
  std::vector<Window> w = {testing::window(std::vector<double>(60, 1.0), 3)};
  for (std::size_t i = 0; i < 60; ++i) w[0].values[i] = std::sin(0.3 * static_cast<double>(i));
  const auto f = transform(w, banks);
  CHECK(f.cols() == 18);
  const auto ref = naive_apply({w[0].channel(2).begin(), w[0].channel(2).end()}, banks[2].kernels[1]);
  CHECK(f(0, 12 + 2) == ref.ppv);
  banks.pop_back();
  CHECK_THROWS(transform(w, banks));
}
