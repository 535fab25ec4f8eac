#include "pdmotion/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "pdmotion/common.hpp"

namespace pdmotion {
namespace {

// Interpolation positions of the quantile grid for one sample size.
struct QuantileGrid {
  std::vector<std::size_t> lo;
  std::vector<double> frac;

  explicit QuantileGrid(std::size_t n) : lo(kQuantileGridSize), frac(kQuantileGridSize) {
    for (int i = 0; i < kQuantileGridSize; ++i) {
      const double h = (static_cast<double>(i) + 0.5) / kQuantileGridSize * static_cast<double>(n - 1);
      std::size_t l = static_cast<std::size_t>(std::floor(h));
      if (l + 1 >= n) l = n >= 2 ? n - 2 : 0;
      lo[static_cast<std::size_t>(i)] = l;
      frac[static_cast<std::size_t>(i)] = n >= 2 ? h - static_cast<double>(l) : 0.0;
    }
  }

  double at(const std::vector<double>& sorted, int i) const {
    const auto k = static_cast<std::size_t>(i);
    if (sorted.size() == 1) return sorted[0];
    return sorted[lo[k]] + frac[k] * (sorted[lo[k] + 1] - sorted[lo[k]]);
  }
};

double epsilon_sorted(const std::vector<double>& a, const QuantileGrid& ga, const std::vector<double>& b,
                      const QuantileGrid& gb) {
  double violation = 0.0, total = 0.0;
  for (int i = 0; i < kQuantileGridSize; ++i) {
    const double d = ga.at(a, i) - gb.at(b, i);
    const double d2 = d * d;
    total += d2;
    if (d < 0.0) violation += d2;
  }
  return total > 0.0 ? violation / total : 0.5;
}

void check_sample(std::span<const double> s, const char* name) {
  if (s.empty()) throw DataError(std::string("sample ") + name + " is empty");
  for (double v : s)
    if (!std::isfinite(v)) throw DataError(std::string("sample ") + name + " has a non-finite value");
}

std::vector<double> sorted_copy(std::span<const double> s) {
  std::vector<double> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

void resample_sorted(const std::vector<double>& src, std::vector<double>& dst, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
  dst.resize(src.size());
  for (auto& v : dst) v = src[pick(rng)];
  std::sort(dst.begin(), dst.end());
}

struct AsoCore {
  double eps_hat, sigma;
};

// epsilon of (a, b) and the population std of epsilon over paired bootstrap
// resamples; iteration i draws from derive_seed(seed, i).
AsoCore aso_core(const std::vector<double>& a, const QuantileGrid& ga, const std::vector<double>& b,
                 const QuantileGrid& gb, int iters, std::uint64_t seed, bool parallel) {
  const double eps_hat = epsilon_sorted(a, ga, b, gb);
  std::vector<double> eps(static_cast<std::size_t>(iters));
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < iters; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::vector<double> ra, rb;
    resample_sorted(a, ra, rng);
    resample_sorted(b, rb, rng);
    eps[static_cast<std::size_t>(i)] = epsilon_sorted(ra, ga, rb, gb);
  }
  double mean = 0.0;
  for (double e : eps) mean += e;
  mean /= static_cast<double>(iters);
  double var = 0.0;
  for (double e : eps) var += (e - mean) * (e - mean);
  return {eps_hat, std::sqrt(var / static_cast<double>(iters))};
}

double upper_bound(double eps_hat, double sigma, double alpha, std::size_t na, std::size_t nb) {
  const boost::math::normal_distribution<double> z;
  const double q = boost::math::quantile(z, 1.0 - alpha);
  const double scale = std::sqrt(static_cast<double>(na + nb) / static_cast<double>(na * nb));
  return std::clamp(eps_hat + q * sigma * scale, 0.0, 1.0);
}

void check_aso_options(double alpha, int iters) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  if (iters < 100) throw ConfigError("bootstrap iterations must be >= 100");
}

}  // namespace

double empirical_quantile(std::span<const double> sorted, double t) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = std::clamp(t, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = std::min(static_cast<std::size_t>(std::floor(h)), sorted.size() - 2);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double epsilon_w2(std::span<const double> a, std::span<const double> b) {
  check_sample(a, "a");
  check_sample(b, "b");
  const auto sa = sorted_copy(a), sb = sorted_copy(b);
  return epsilon_sorted(sa, QuantileGrid(sa.size()), sb, QuantileGrid(sb.size()));
}

AsoResult aso(std::span<const double> a, std::span<const double> b, const AsoOptions& opt) {
  check_aso_options(opt.alpha, opt.bootstrap_iters);
  check_sample(a, "a");
  check_sample(b, "b");
  if (a.size() < 2 || b.size() < 2) throw DataError("ASO needs at least 2 scores per sample");
  const auto sa = sorted_copy(a), sb = sorted_copy(b);
  const QuantileGrid ga(sa.size()), gb(sb.size());
  const auto core = aso_core(sa, ga, sb, gb, opt.bootstrap_iters, opt.seed, true);
  AsoResult r;
  r.epsilon_hat = core.eps_hat;
  r.sigma_hat = core.sigma;
  r.alpha = opt.alpha;
  r.bootstrap_iters = opt.bootstrap_iters;
  r.epsilon_min = upper_bound(core.eps_hat, core.sigma, opt.alpha, sa.size(), sb.size());
  r.dominant = r.epsilon_min < kDominanceThreshold;
  return r;
}

double bonferroni(double alpha, int comparisons) {
  if (comparisons < 1) throw ConfigError("comparison count must be >= 1");
  return alpha / static_cast<double>(comparisons);
}

double bootstrap_power(std::span<const double> sample, double uplift, const PowerOptions& opt) {
  check_aso_options(opt.alpha, opt.inner_bootstrap_iters);
  if (opt.iters < 100) throw ConfigError("power iterations must be >= 100");
  check_sample(sample, "sample");
  if (sample.size() < 2) throw DataError("power analysis needs at least 2 scores");
  const auto base = sorted_copy(sample);
  std::vector<double> shifted(base);
  for (double& v : shifted) v *= 1.0 + uplift;
  const QuantileGrid g(base.size());

  std::vector<char> hit(static_cast<std::size_t>(opt.iters), 0);
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < opt.iters; ++i) {
    const auto s = derive_seed(opt.seed, static_cast<std::uint64_t>(i));
    Rng rng(s);
    std::vector<double> rs, rb;
    resample_sorted(shifted, rs, rng);
    resample_sorted(base, rb, rng);
    const auto core = aso_core(rs, g, rb, g, opt.inner_bootstrap_iters, derive_seed(s, 1), false);
    hit[static_cast<std::size_t>(i)] =
        upper_bound(core.eps_hat, core.sigma, opt.alpha, rs.size(), rb.size()) < kDominanceThreshold;
  }
  long count = 0;
  for (char h : hit) count += h;
  return static_cast<double>(count) / static_cast<double>(opt.iters);
}

nlohmann::json to_json(const AsoResult& r) {
  return {{"epsilon_hat", r.epsilon_hat}, {"epsilon_min", r.epsilon_min}, {"sigma_hat", r.sigma_hat},
          {"alpha", r.alpha},             {"bootstrap_iters", r.bootstrap_iters}, {"dominant", r.dominant}};
}

}  // namespace pdmotion
