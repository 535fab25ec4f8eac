#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdmotion/dataset.hpp"
#include "pdmotion/matrix.hpp"

namespace pdmotion {

struct RandomKernel {
  int length = 9;
  std::vector<double> weights;
  double bias = 0.0;
  int dilation = 1;
  bool padding = false;

  /// Zeros added on each side when padding is on.
  int pad() const { return padding ? ((length - 1) * dilation) / 2 : 0; }
  int span() const { return (length - 1) * dilation + 1; }
  /// Number of convolution outputs for an input of n samples (may be <= 0).
  long output_length(std::size_t n) const {
    return static_cast<long>(n) + 2L * pad() - static_cast<long>((length - 1) * dilation);
  }
};

struct KernelBank {
  std::vector<RandomKernel> kernels;
  std::size_t input_len = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return kernels.size(); }
};

struct PooledFeatures {
  double ppv = 0.0;
  double max = 0.0;
};

/// Draws n kernels with the standard ROCKET parameter distributions.
KernelBank generate_kernels(std::size_t n, std::size_t input_len, std::uint64_t seed);

/// Dilated convolution plus bias, pooled to (proportion of positive values, max).
PooledFeatures apply_kernel(std::span<const double> series, const RandomKernel& kernel);

/// Feature row per window; column c*2n + 2k holds ppv and +1 holds max for
/// kernel k on channel c. Rows are computed in parallel.
RowMatrix transform(std::span<const Window> windows, const KernelBank& bank);

/// Variant with an independent bank per channel; banks.size() must equal the
/// window channel count and all banks must have the same kernel count.
RowMatrix transform(std::span<const Window> windows, std::span<const KernelBank> banks);

/// Versioned document holding the generation parameters and a checksum; the
/// kernels themselves are replayed from the seed.
nlohmann::json to_json(const KernelBank& bank);
KernelBank kernel_bank_from_json(const nlohmann::json& doc);

}  // namespace pdmotion
