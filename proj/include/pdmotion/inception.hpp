#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdmotion/nnet.hpp"

namespace pdmotion {

struct InceptionHyperparams {
  double window_seconds = 30.0;
  int filter_len = 40;
  int n_filters = 32;  // output channels of every branch
  int depth = 6;
  bool residual = true;
  int bottleneck_channels = 32;
  int n_branches = 3;  // parallel convolutions per module, lengths halve

  /// Throws ConfigError when a value leaves its searchable range.
  void validate() const;
  std::size_t window_len() const;
  std::size_t module_channels() const { return static_cast<std::size_t>((n_branches + 1) * n_filters); }
};

nlohmann::json to_json(const InceptionHyperparams& hp);
InceptionHyperparams inception_hyperparams_from_json(const nlohmann::json& doc);

/// filter_len, filter_len/2, ... (count values, integer halving, minimum 1).
std::vector<int> filter_lengths(int filter_len, int count);

/// Layout of a single module; looser than the hyperparameter ranges so small
/// illustrative modules can be built.
struct ModuleSpec {
  std::size_t bottleneck_channels = 32;  // 0 disables the bottleneck
  std::size_t branch_channels = 32;
  std::vector<int> filter_lengths = {40, 20, 10};
  std::size_t pool_width = 3;

  std::size_t out_channels() const { return (filter_lengths.size() + 1) * branch_channels; }
};

ModuleSpec module_spec(const InceptionHyperparams& hp);

/// Appends one module reading `input` (with `in_channels` channels) and
/// returns the node holding its BN+ReLU output. The bottleneck is used when
/// in_channels > 1.
int append_module(nn::Network& net, int input, std::size_t in_channels, const ModuleSpec& spec,
                  const std::string& prefix = "m");

/// Stand-alone graph of a single module over a (in_channels, time_len) input.
nn::Network build_module(std::size_t in_channels, std::size_t time_len, const ModuleSpec& spec);
nn::Network build_module(std::size_t in_channels, const InceptionHyperparams& hp);

/// Stacked modules with a residual shortcut after every third one, global
/// average pooling and a dense output. `time_len` = 0 uses hp.window_len().
nn::Network build_network(const InceptionHyperparams& hp, std::size_t n_classes, std::size_t input_channels = 3,
                          std::size_t time_len = 0);

struct EnsembleModel {
  InceptionHyperparams hyperparams;
  std::vector<nn::Network> members;

  /// Mean of member probabilities. Per entry the member values are summed in
  /// sorted order, so the result does not depend on member order.
  RowMatrix predict(const nn::Tensor& batch) const;

  nlohmann::json to_json() const;
  static EnsembleModel from_json(const nlohmann::json& doc);
};

struct EnsembleTrainConfig {
  int epochs = 1500;
  std::size_t batch_size = 64;
  std::vector<std::uint64_t> seeds;  // one per member
  bool require_distinct_seeds = true;
};

/// Trains one network per seed. Members train concurrently when threads allow.
EnsembleModel train_ensemble(const InceptionHyperparams& hp, const nn::Tensor& inputs, std::span<const int> labels,
                             std::size_t n_classes, const EnsembleTrainConfig& config);

}  // namespace pdmotion
