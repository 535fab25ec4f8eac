#include <doctest.h>

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "pdmotion/common.hpp"
#include "pdmotion/metrics.hpp"

using namespace pdmotion;

TEST_CASE("average precision: hand example and extremes") {
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
  const std::vector<int> y = {1, 0, 1, 0};
  CHECK(average_precision(s, y) == 0.5 * 1.0 + 0.5 * (2.0 / 3.0));
  CHECK(average_precision(s, std::vector<int>{1, 1, 1, 1}) == 1.0);
  CHECK_THROWS_WITH_AS(average_precision(s, std::vector<int>{0, 0, 0, 0}), "undefined AP", DataError);
}

TEST_CASE("average precision: matches the threshold-sweep oracle on random instances") {
  Rng rng(1);
  std::uniform_int_distribution<int> len(1, 50), level(0, 6);
  std::bernoulli_distribution pos(0.4);
  for (int t = 0; t < 500; ++t) {
    const int n = len(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = level(rng) / 6.0;  // coarse levels force ties
      y[i] = pos(rng);
    }
    y[0] = 1;
    CHECK(std::abs(average_precision(s, y) - oracle::average_precision(s, y)) < 1e-12);
  }
}

TEST_CASE("average precision: invariant under monotone transforms") {
  Rng rng(2);
  std::normal_distribution<double> n;
  std::vector<double> s(40), t(40);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) {
    s[i] = n(rng);
    t[i] = std::exp(3.0 * s[i]) + 1.0;
    y[i] = i % 3 == 0;
  }
  CHECK(average_precision(s, y) == average_precision(t, y));
}

TEST_CASE("average precision: random ranker approaches prevalence") {
  Rng rng(3);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(10000);
  std::vector<int> y(10000);
  for (int i = 0; i < 10000; ++i) {
    s[i] = u(rng);
    y[i] = u(rng) < 0.3;
  }
  CHECK(std::abs(average_precision(s, y) - 0.3) < 0.03);
}

TEST_CASE("mean AP: perfect one-hot, constant scores and absent classes") {
  for (int classes = 2; classes <= 5; ++classes) {
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) y.push_back(i % classes);
    RowMatrix s = RowMatrix::Zero(20, classes);
    for (int i = 0; i < 20; ++i) s(i, y[i]) = 1.0;
    CHECK(mean_ap(s, y).mean == 1.0);
  }
  const std::vector<int> y = {0, 1, 1, 0, 1, 1, 1, 0};
  const auto m = mean_ap(RowMatrix::Constant(8, 2, 0.4), y);
  CHECK(*m.per_class[0] == 3.0 / 8.0);
  CHECK(*m.per_class[1] == 5.0 / 8.0);

  RowMatrix s3 = RowMatrix::Zero(8, 3);
  for (int i = 0; i < 8; ++i) s3(i, y[i]) = 1.0;
  const auto skip = mean_ap(s3, y);
  CHECK_FALSE(skip.per_class[2].has_value());
  CHECK(skip.mean == 1.0);
}

TEST_CASE("balanced accuracy: examples and oracle") {
  CHECK(balanced_accuracy(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 1, 1}) == 0.75);
  CHECK(balanced_accuracy(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}) == 1.0);
  CHECK(balanced_accuracy(std::vector<int>{0, 1, 2, 3, 0, 1, 2, 3}, std::vector<int>(8, 2)) == 0.25);
  CHECK_THROWS_AS(balanced_accuracy(std::vector<int>{}, std::vector<int>{}), DataError);

  Rng rng(4);
  std::uniform_int_distribution<int> len(1, 50), cls(2, 5);
  for (int t = 0; t < 500; ++t) {
    const int n = len(rng), k = cls(rng);
    std::uniform_int_distribution<int> c(0, k - 1);
    std::vector<int> y(n), p(n);
    for (int i = 0; i < n; ++i) {
      y[i] = c(rng);
      p[i] = c(rng);
    }
    CHECK(std::abs(balanced_accuracy(y, p) - oracle::balanced_accuracy(y, p)) < 1e-12);
    // relabeling both arguments does not matter
    std::vector<int> y2(n), p2(n);
    for (int i = 0; i < n; ++i) {
      y2[i] = (y[i] + 1) % k;
      p2[i] = (p[i] + 1) % k;
    }
    CHECK(std::abs(balanced_accuracy(y, p) - balanced_accuracy(y2, p2)) < 1e-12);
  }
}

TEST_CASE("balanced accuracy equals accuracy on balanced binary data") {
  const std::vector<int> y = {0, 1, 0, 1, 0, 1};
  const std::vector<int> p = {0, 0, 1, 1, 0, 1};
  CHECK(balanced_accuracy(y, p) == doctest::Approx(accuracy(y, p)));
}

TEST_CASE("chance baselines") {
  auto r = rc_baseline(std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(r.mean_ap == 0.25);
  CHECK(r.balanced_accuracy == 0.25);
  r = rc_baseline(std::vector<double>{0.5, 0.5});
  CHECK(r.mean_ap == 0.5);
  CHECK(r.balanced_accuracy == 0.5);
  r = rc_baseline(std::vector<double>{0.2, 0.3, 0.5, 0.0});
  CHECK(r.mean_ap == doctest::Approx(1.0 / 3.0));
  CHECK(r.balanced_accuracy == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(rc_baseline(std::vector<double>{0.0, 0.0}), DataError);
  CHECK_THROWS_AS(rc_baseline(std::vector<double>{}), DataError);
  r = rc_baseline(std::vector<double>{1.0});
  CHECK(r.mean_ap == 1.0);
  CHECK(r.balanced_accuracy == 1.0);
}

TEST_CASE("spearman correlation") {
  const std::vector<double> x = {1, 2, 3, 4};
  CHECK(spearman_rho(x, std::vector<double>{1, 4, 9, 16}) == doctest::Approx(1.0));
  CHECK(spearman_rho(x, std::vector<double>{8, 3, 2, -1}) == doctest::Approx(-1.0));
  CHECK(spearman_rho(x, std::vector<double>{2, 1, 4, 3}) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(spearman_rho(x, std::vector<double>{5, 5, 5, 5}), "undefined correlation", DataError);
}

TEST_CASE("score report") {
  RowMatrix s(4, 2);
  s << 0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7;
  const std::vector<int> y = {0, 1, 1, 1};
  const auto r = score_report(s, y);
  CHECK(r.n_windows == 4);
  CHECK(r.accuracy == 0.75);
  CHECK(r.prevalences == std::vector<double>{0.25, 0.75});
  CHECK(r.mean_ap == doctest::Approx((*r.per_class_ap[0] + *r.per_class_ap[1]) / 2));
  const auto back = score_report_from_json(to_json(r));
  CHECK(back.mean_ap == r.mean_ap);
  CHECK(back.balanced_accuracy == r.balanced_accuracy);
}
