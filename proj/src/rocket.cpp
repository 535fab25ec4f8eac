#include "pdmotion/rocket.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pdmotion/common.hpp"

namespace pdmotion {

KernelBank generate_kernels(std::size_t n, std::size_t input_len, std::uint64_t seed) {
  if (input_len < 12)
    throw ConfigError("kernel generation needs input_len >= 12, got " + std::to_string(input_len));
  KernelBank bank;
  bank.input_len = input_len;
  bank.seed = seed;
  bank.kernels.reserve(n);

  Rng rng(seed);
  std::uniform_int_distribution<int> pick_len(0, 2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> bias_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  for (std::size_t i = 0; i < n; ++i) {
    RandomKernel k;
    k.length = 7 + 2 * pick_len(rng);
    k.weights.resize(static_cast<std::size_t>(k.length));
    for (double& w : k.weights) w = gauss(rng);
    const double mean = std::accumulate(k.weights.begin(), k.weights.end(), 0.0) / k.length;
    for (double& w : k.weights) w -= mean;
    k.bias = bias_dist(rng);
    const double max_exp =
        std::log2(static_cast<double>(input_len - 1) / static_cast<double>(k.length - 1));
    k.dilation = std::max(1, static_cast<int>(std::floor(std::exp2(unit(rng) * max_exp))));
    k.padding = coin(rng);
    bank.kernels.push_back(std::move(k));
  }
  return bank;
}

namespace {

// `xp` points at the input sample aligned with the first tap of output 0.
template <int L>
PooledFeatures conv_pool(const double* xp, long n_out, const double* w, double bias, int d) {
  double wl[L];
  for (int j = 0; j < L; ++j) wl[j] = w[j];
  long positive = 0;
  double mx = -std::numeric_limits<double>::infinity();
#pragma omp simd reduction(+ : positive) reduction(max : mx)
  for (long t = 0; t < n_out; ++t) {
    double s = bias;
    for (int j = 0; j < L; ++j) s += wl[j] * xp[t + j * d];
    positive += s > 0.0 ? 1 : 0;
    mx = s > mx ? s : mx;
  }
  return {static_cast<double>(positive) / static_cast<double>(n_out), mx};
}

PooledFeatures conv_pool_any(const double* xp, long n_out, const RandomKernel& k) {
  switch (k.length) {
    case 7: return conv_pool<7>(xp, n_out, k.weights.data(), k.bias, k.dilation);
    case 9: return conv_pool<9>(xp, n_out, k.weights.data(), k.bias, k.dilation);
    case 11: return conv_pool<11>(xp, n_out, k.weights.data(), k.bias, k.dilation);
    default: break;
  }
  long positive = 0;
  double mx = -std::numeric_limits<double>::infinity();
  for (long t = 0; t < n_out; ++t) {
    double s = k.bias;
    for (int j = 0; j < k.length; ++j) s += k.weights[j] * xp[t + static_cast<long>(j) * k.dilation];
    positive += s > 0.0 ? 1 : 0;
    mx = std::max(mx, s);
  }
  return {static_cast<double>(positive) / static_cast<double>(n_out), mx};
}

// Zero-padded copy of one channel with `margin` zeros on each side.
class PaddedSeries {
 public:
  void assign(std::span<const double> x, std::size_t margin) {
    margin_ = margin;
    buf_.assign(x.size() + 2 * margin, 0.0);
    std::copy(x.begin(), x.end(), buf_.begin() + static_cast<long>(margin));
  }
  const double* aligned(int pad) const { return buf_.data() + margin_ - static_cast<std::size_t>(pad); }

 private:
  std::vector<double> buf_;
  std::size_t margin_ = 0;
};

std::size_t max_pad(std::span<const KernelBank> banks) {
  std::size_t m = 0;
  for (const auto& b : banks)
    for (const auto& k : b.kernels) m = std::max(m, static_cast<std::size_t>(k.pad()));
  return m;
}

}  // namespace

PooledFeatures apply_kernel(std::span<const double> series, const RandomKernel& kernel) {
  if (kernel.length < 1 || kernel.dilation < 1 ||
      kernel.weights.size() != static_cast<std::size_t>(kernel.length))
    throw ConfigError("malformed kernel");
  const long n_out = kernel.output_length(series.size());
  if (n_out <= 0) throw DataError("kernel exceeds input");
  PaddedSeries padded;
  padded.assign(series, static_cast<std::size_t>(kernel.pad()));
  return conv_pool_any(padded.aligned(kernel.pad()), n_out, kernel);
}

RowMatrix transform(std::span<const Window> windows, std::span<const KernelBank> banks) {
  if (banks.empty()) throw ConfigError("transform needs at least one kernel bank");
  const std::size_t n = banks[0].size();
  const std::size_t input_len = banks[0].input_len;
  for (const auto& b : banks)
    if (b.size() != n || b.input_len != input_len)
      throw ConfigError("per-channel kernel banks must agree in size and input length");

  const std::size_t channels = windows.empty() ? (banks.size() == 1 ? kAxes : banks.size()) : windows[0].channels;
  if (banks.size() != 1 && banks.size() != channels)
    throw ConfigError("need one kernel bank or one per channel");
  for (const auto& w : windows) {
    if (w.length != input_len)
      throw DataError("window length " + std::to_string(w.length) + " does not match kernel bank input length " +
                      std::to_string(input_len));
    if (w.channels != channels) throw DataError("windows differ in channel count");
  }

  RowMatrix out(static_cast<long>(windows.size()), static_cast<long>(2 * n * channels));
  const std::size_t margin = max_pad(banks);

#pragma omp parallel
  {
    PaddedSeries padded;
#pragma omp for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(windows.size()); ++i) {
      double* row = out.row(i).data();
      for (std::size_t c = 0; c < channels; ++c) {
        padded.assign(windows[i].channel(c), margin);
        const auto& bank = banks.size() == 1 ? banks[0] : banks[c];
        for (std::size_t k = 0; k < n; ++k) {
          const auto& ker = bank.kernels[k];
          const long n_out = ker.output_length(input_len);
          PooledFeatures f{0.0, 0.0};
          if (n_out > 0) f = conv_pool_any(padded.aligned(ker.pad()), n_out, ker);
          row[c * 2 * n + 2 * k] = f.ppv;
          row[c * 2 * n + 2 * k + 1] = f.max;
        }
      }
    }
  }
  return out;
}

RowMatrix transform(std::span<const Window> windows, const KernelBank& bank) {
  return transform(windows, std::span<const KernelBank>(&bank, 1));
}

namespace {

double checksum(const KernelBank& bank) {
  double s = 0.0;
  for (const auto& k : bank.kernels) {
    for (double w : k.weights) s += w;
    s += k.bias + k.dilation + (k.padding ? 1.0 : 0.0) + k.length;
  }
  return s;
}

}  // namespace

nlohmann::json to_json(const KernelBank& bank) {
  return {
      {"format", "pdmotion.kernel_bank"},
      {"version", 1},
      {"seed", bank.seed},
      {"n_kernels", bank.size()},
      {"input_len", bank.input_len},
      {"checksum", checksum(bank)},
  };
}

KernelBank kernel_bank_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pdmotion.kernel_bank" || doc.value("version", 0) != 1)
    throw DataError("not a version-1 kernel bank document");
  auto bank = generate_kernels(doc.at("n_kernels").get<std::size_t>(),
                               doc.at("input_len").get<std::size_t>(),
                               doc.at("seed").get<std::uint64_t>());
  const double expect = doc.at("checksum").get<double>();
  const double got = checksum(bank);
  if (std::abs(expect - got) > 1e-6 * (1.0 + std::abs(expect)))
    throw DataError("kernel bank checksum mismatch: random generator differs from the one that wrote it");
  return bank;
}

}  // namespace pdmotion
