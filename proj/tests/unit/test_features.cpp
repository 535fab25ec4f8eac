#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pdmotion/features.hpp"
#include "support.hpp"

using namespace pdmotion;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

double energy(const WaveletDecomposition& d) {
  double e = 0;
  for (const auto& level : d.details)
    for (double v : level) e += v * v;
  for (double v : d.approximation) e += v * v;
  return e;
}

}  // namespace

TEST_CASE("dwt: constants live in the approximation") {
  const std::vector<double> c(1024, 2.5);
  const auto d = dwt(c);
  CHECK(d.details.size() == 9);
  for (const auto& level : d.details)
    for (double v : level) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("dwt: energy is conserved at dyadic lengths") {
  std::vector<double> impulse(512, 0.0);
  impulse[37] = 1.0;
  CHECK(std::abs(energy(dwt(impulse)) - 1.0) < 1e-10);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = noise(1024, s);
    double e = 0;
    for (double v : x) e += v * v;
    CHECK(std::abs(energy(dwt(x)) - e) < 1e-8 * e);
  }
}

TEST_CASE("dwt: inverse reconstructs the input") {
  for (std::size_t n : {512u, 1000u, 1500u}) {
    const auto x = noise(n, n);
    const auto y = idwt(dwt(x));
    REQUIRE(y.size() == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(x[i] - y[i]) < 1e-9);
  }
  CHECK_THROWS_AS(dwt(noise(300, 1)), DataError);
}

TEST_CASE("stats7: hand examples") {
  const std::vector<double> ones = {1, 1, 1, 1};
  const auto s = stats7(ones);
  CHECK(s.rms == 1.0);
  CHECK(s.std == 0.0);
  CHECK(s.max == 1.0);
  CHECK(s.kurtosis == 0.0);
  CHECK(s.skew == 0.0);
  const std::vector<double> ramp = {1, 2, 3, 4};
  CHECK(stats7(ramp).rms == doctest::Approx(std::sqrt(30.0 / 4.0)).epsilon(1e-14));
  CHECK(stats7(ramp).std == doctest::Approx(std::sqrt(1.25)).epsilon(1e-14));
  CHECK(stats7(ramp).skew == doctest::Approx(0.0));
}

TEST_CASE("stats7: pure tone peaks at its bin") {
  std::vector<double> tone(64);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = std::sin(std::numbers::pi / 2 * static_cast<double>(i));
  const auto p = periodogram(tone);
  REQUIRE(p.size() == 32);
  std::size_t arg = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[arg]) arg = k;
  CHECK(arg + 1 == 16);  // quarter of the sample rate: bin 64/4
  const auto s = stats7(tone);
  CHECK(s.psd_max == p[arg]);
  CHECK(s.psd_max / std::max(s.psd_min, 1e-300) > 1e6);
}

TEST_CASE("wavelet features: shape, purity and sign invariance") {
  const std::size_t n = 1500;
  auto a = noise(3 * n, 3);
  const auto w = testing::window(a, 3);
  const auto f = wavelet_features(w);
  CHECK(f.size() == 70);
  for (double v : f) CHECK(std::isfinite(v));
  CHECK(wavelet_features(w) == f);
  auto flipped = a;
  for (std::size_t i = n; i < 2 * n; ++i) flipped[i] = -flipped[i];
  CHECK(wavelet_features(testing::window(flipped, 3)) == f);

  const auto z = wavelet_features(testing::window(std::vector<double>(3 * n, 0.0), 3));
  for (std::size_t sig = 0; sig < 10; ++sig) CHECK(z[sig * 7] == 0.0);
  const auto c = wavelet_features(testing::window(std::vector<double>(3 * n, 0.3), 3));
  for (double v : c) CHECK(std::isfinite(v));
  CHECK(min_wavelet_window() == 512);
  CHECK_THROWS_AS(wavelet_features(testing::window(std::vector<double>(3 * 300, 0.0), 3)), DataError);
}

TEST_CASE("wavelet feature matrix stacks per-window vectors") {
  std::vector<Window> w = {testing::window(noise(1536, 1), 3), testing::window(noise(1536, 2), 3)};
  const auto m = wavelet_feature_matrix(w);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 70);
  const auto f1 = wavelet_features(w[1]);
  for (int j = 0; j < 70; ++j) CHECK(m(1, j) == f1[j]);
}
