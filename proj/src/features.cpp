#include "pdmotion/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include <unsupported/Eigen/FFT>

#include "pdmotion/common.hpp"

namespace pdmotion {
namespace {

// 4-tap Daubechies scaling filter; the wavelet filter is its quadrature mirror.
struct Db4 {
  std::array<double, 4> lo;
  std::array<double, 4> hi;
  Db4() {
    const double s3 = std::sqrt(3.0);
    const double d = 4.0 * std::sqrt(2.0);
    lo = {(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d};
    for (int k = 0; k < 4; ++k) hi[k] = (k % 2 == 0 ? 1.0 : -1.0) * lo[3 - k];
  }
};

const Db4& db4() {
  static const Db4 f;
  return f;
}

}  // namespace

WaveletDecomposition dwt(std::span<const double> series, const WaveletConfig& config) {
  if (config.levels < 1) throw ConfigError("wavelet levels must be >= 1");
  const std::size_t need = std::size_t{1} << config.levels;
  if (series.size() < need)
    throw DataError("series of length " + std::to_string(series.size()) + " is too short for " +
                    std::to_string(config.levels) + " decomposition levels (need " + std::to_string(need) + ")");

  const auto& f = db4();
  WaveletDecomposition out;
  std::vector<double> a(series.begin(), series.end());
  for (int level = 0; level < config.levels; ++level) {
    out.lengths.push_back(a.size());
    if (a.size() % 2 != 0) a.push_back(0.0);
    const std::size_t n = a.size();
    const std::size_t half = n / 2;
    std::vector<double> approx(half), detail(half);
    for (std::size_t i = 0; i < half; ++i) {
      double sa = 0.0, sd = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        const double x = a[(2 * i + k) % n];
        sa += f.lo[k] * x;
        sd += f.hi[k] * x;
      }
      approx[i] = sa;
      detail[i] = sd;
    }
    out.details.push_back(std::move(detail));
    a = std::move(approx);
  }
  out.approximation = std::move(a);
  return out;
}

std::vector<double> idwt(const WaveletDecomposition& dec, const WaveletConfig& config) {
  if (static_cast<int>(dec.details.size()) != config.levels || dec.lengths.size() != dec.details.size())
    throw DataError("decomposition does not match the wavelet configuration");
  const auto& f = db4();
  std::vector<double> a = dec.approximation;
  for (int level = config.levels - 1; level >= 0; --level) {
    const auto& d = dec.details[static_cast<std::size_t>(level)];
    if (d.size() != a.size()) throw DataError("detail and approximation lengths disagree");
    const std::size_t n = 2 * a.size();
    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < 4; ++k) x[(2 * i + k) % n] += f.lo[k] * a[i] + f.hi[k] * d[i];
    x.resize(dec.lengths[static_cast<std::size_t>(level)]);
    a = std::move(x);
  }
  return a;
}

std::vector<double> periodogram(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) return {};
  std::vector<double> in(series.begin(), series.end());
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, in);
  std::vector<double> out;
  out.reserve(n / 2);
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double p = std::norm(spec[k]) / static_cast<double>(n);
    const bool nyquist = n % 2 == 0 && k == n / 2;
    out.push_back(nyquist ? p : 2.0 * p);
  }
  return out;
}

Stats7 stats7(std::span<const double> series) {
  if (series.empty()) throw DataError("stats7 of an empty series");
  const double n = static_cast<double>(series.size());
  Stats7 s;
  double sum = 0.0, sq = 0.0;
  s.max = series[0];
  for (double v : series) {
    sum += v;
    sq += v * v;
    s.max = std::max(s.max, v);
  }
  const double mean = sum / n;
  s.rms = std::sqrt(sq / n);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : series) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.std = std::sqrt(m2);
  if (s.std > 1e-12 * std::max(1.0, std::abs(mean))) {
    s.skew = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  const auto psd = periodogram(series);
  if (psd.empty()) return s;  // a single coefficient has no spectrum; both stay 0
  const auto [lo, hi] = std::minmax_element(psd.begin(), psd.end());
  s.psd_min = *lo;
  s.psd_max = *hi;
  return s;
}

std::size_t min_wavelet_window() {
  return std::size_t{1} << WaveletConfig{}.levels;
}

std::array<double, kWaveletFeatureCount> wavelet_features(const Window& window) {
  if (window.length < min_wavelet_window())
    throw DataError("wavelet features need windows of at least " + std::to_string(min_wavelet_window()) + " samples");
  std::vector<double> mag(window.length, 0.0);
  for (std::size_t c = 0; c < window.channels; ++c) {
    const auto ch = window.channel(c);
    for (std::size_t i = 0; i < window.length; ++i) mag[i] += ch[i] * ch[i];
  }
  for (double& v : mag) v = std::sqrt(v);

  std::array<double, kWaveletFeatureCount> out{};
  auto put = [&](std::size_t block, const Stats7& s) {
    const auto a = s.as_array();
    std::copy(a.begin(), a.end(), out.begin() + static_cast<long>(block * 7));
  };
  put(0, stats7(mag));
  const auto dec = dwt(mag);
  for (std::size_t j = 0; j < dec.details.size(); ++j) put(j + 1, stats7(dec.details[j]));
  return out;
}

RowMatrix wavelet_feature_matrix(std::span<const Window> windows) {
  for (const auto& w : windows)
    if (w.length < min_wavelet_window())
      throw DataError("wavelet features need windows of at least " + std::to_string(min_wavelet_window()) + " samples");
  RowMatrix out(static_cast<long>(windows.size()), static_cast<long>(kWaveletFeatureCount));
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(windows.size()); ++i) {
    const auto f = wavelet_features(windows[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < f.size(); ++j) out(i, static_cast<long>(j)) = f[j];
  }
  return out;
}

}  // namespace pdmotion
