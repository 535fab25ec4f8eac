#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdmotion/dataset.hpp"
#include "pdmotion/inception.hpp"
#include "pdmotion/linear.hpp"
#include "pdmotion/matrix.hpp"
#include "pdmotion/nnet.hpp"
#include "pdmotion/rocket.hpp"

namespace pdmotion {

enum class ModelKind { Rocket, Inception, InceptionDefault, WaveletMlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct RocketSettings {
  std::size_t n_kernels = 10000;
  bool per_channel_banks = false;  // one shared bank applied to each axis by default
  std::vector<double> lambdas = default_lambda_grid();
  int cv_folds = 5;
};

struct InceptionSettings {
  InceptionHyperparams hyperparams;
  int epochs = 600;
  std::size_t ensemble_size = 5;
  std::size_t batch_size = 64;
};

struct MlpSettings {
  int epochs = 500;
  std::size_t batch_size = 64;
  std::size_t hidden = 128;
};

struct ModelSpec {
  ModelKind kind = ModelKind::Rocket;
  double window_seconds = 30.0;  // inception kinds use hyperparams.window_seconds
  RocketSettings rocket;
  InceptionSettings inception;
  MlpSettings mlp;

  /// Window length the model is trained on, in seconds.
  double effective_window_seconds() const;
  void validate() const;
};

/// Defaults for a model family: the inception-default kind uses the reference
/// architecture with a 1500-epoch budget.
ModelSpec default_model_spec(ModelKind kind);

nlohmann::json to_json(const ModelSpec& spec);

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ModelKind kind() const = 0;
  /// Trains from scratch; all randomness derives from `seed`.
  virtual void fit(std::span<const Window> windows, int n_classes, std::uint64_t seed) = 0;
  /// Rows x classes class scores (probabilities or decision values).
  virtual RowMatrix scores(std::span<const Window> windows) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

std::unique_ptr<Classifier> make_classifier(const ModelSpec& spec);
std::unique_ptr<Classifier> load_classifier(const nlohmann::json& doc);

/// Stacks equally shaped windows into a (batch, channels, time) tensor.
nn::Tensor windows_to_tensor(std::span<const Window> windows);

std::vector<int> window_labels(std::span<const Window> windows);

/// Class probabilities computed in chunks to bound activation memory.
RowMatrix predict_windows(const nn::Network& net, std::span<const Window> windows, std::size_t chunk = 256);
RowMatrix predict_windows(const EnsembleModel& model, std::span<const Window> windows, std::size_t chunk = 256);

/// Row folds grouped by patient when there are enough patients, else
/// round-robin per class.
std::vector<int> patient_row_folds(std::span<const Window> windows, int n_classes, int k, std::uint64_t seed);

}  // namespace pdmotion
