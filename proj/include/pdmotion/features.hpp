#pragma once

#include <array>
#include <span>
#include <vector>

#include "pdmotion/dataset.hpp"
#include "pdmotion/matrix.hpp"

namespace pdmotion {

enum class WaveletFamily { Daubechies4 };

struct WaveletConfig {
  WaveletFamily family = WaveletFamily::Daubechies4;
  int levels = 9;
};

struct WaveletDecomposition {
  std::vector<std::vector<double>> details;  // details[j] is level j+1
  std::vector<double> approximation;         // final level
  std::vector<std::size_t> lengths;          // input length at each level before padding
};

/// Periodic multilevel DWT. Odd-length intermediate signals are zero-padded by
/// one sample before each level. Throws DataError when the series is shorter
/// than 2^levels.
WaveletDecomposition dwt(std::span<const double> series, const WaveletConfig& config = {});

/// Inverse of dwt(); returns a series of the original length.
std::vector<double> idwt(const WaveletDecomposition& decomposition, const WaveletConfig& config = {});

struct Stats7 {
  double rms = 0.0;
  double std = 0.0;
  double max = 0.0;
  double kurtosis = 0.0;
  double skew = 0.0;
  double psd_max = 0.0;
  double psd_min = 0.0;

  std::array<double, 7> as_array() const { return {rms, std, max, kurtosis, skew, psd_max, psd_min}; }
};

/// Population moments; excess kurtosis and skew are 0 for (near-)constant input.
/// The power spectrum is a one-sided periodogram without the zero-frequency bin;
/// a single value has no spectrum and reports psd_max = psd_min = 0.
Stats7 stats7(std::span<const double> series);

/// One-sided periodogram density (fs = 1) for bins 1..n/2.
std::vector<double> periodogram(std::span<const double> series);

inline constexpr std::size_t kWaveletFeatureCount = 70;

/// stats7 of the acceleration magnitude followed by stats7 of each of its nine
/// detail sequences (level 1 first).
std::array<double, kWaveletFeatureCount> wavelet_features(const Window& window);

/// Shortest window the 70-feature extractor accepts.
std::size_t min_wavelet_window();

RowMatrix wavelet_feature_matrix(std::span<const Window> windows);

}  // namespace pdmotion
