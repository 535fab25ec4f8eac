#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace pdmotion {

inline constexpr int kQuantileGridSize = 1000;
inline constexpr double kDominanceThreshold = 0.2;

/// Empirical quantile function (order statistics, linear interpolation).
double empirical_quantile(std::span<const double> sorted, double t);

/// Violation ratio of the squared quantile difference: the share of the W2
/// distance where Qa(t) < Qb(t). Small values mean `a` dominates `b`.
/// Identical quantile functions give 0.5.
double epsilon_w2(std::span<const double> a, std::span<const double> b);

struct AsoResult {
  double epsilon_hat = 0.5;
  double epsilon_min = 0.5;
  double sigma_hat = 0.0;
  double alpha = 0.05;
  int bootstrap_iters = 0;
  bool dominant = false;  // epsilon_min < 0.2
};

struct AsoOptions {
  double alpha = 0.05;
  int bootstrap_iters = 1000;
  std::uint64_t seed = 0;
};

/// Tests whether `a` almost stochastically dominates `b`.
AsoResult aso(std::span<const double> a, std::span<const double> b, const AsoOptions& options);

double bonferroni(double alpha, int comparisons);

struct PowerOptions {
  double alpha = 0.05;
  int iters = 5000;
  int inner_bootstrap_iters = 200;  // bootstrap size of each nested ASO decision
  std::uint64_t seed = 0;
};

/// Share of bootstrap replicates in which a copy of `sample` scaled by
/// (1 + uplift) is declared dominant over the sample.
double bootstrap_power(std::span<const double> sample, double uplift, const PowerOptions& options);

nlohmann::json to_json(const AsoResult& r);

}  // namespace pdmotion
