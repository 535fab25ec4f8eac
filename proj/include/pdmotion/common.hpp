#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pdmotion {

/// Raised when input data violates a documented contract (bad CSV rows,
/// too-short signals, degenerate labels). The CLI maps it to exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid configuration or hyperparameters. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Child seed number `index` of `seed`. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Warnings go through a replaceable sink so tests can capture or silence them.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

/// Sets the worker count for OpenMP regions and Eigen. n = 0 keeps the default.
void set_thread_count(int n);
int thread_count();

}  // namespace pdmotion
