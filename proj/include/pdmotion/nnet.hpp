#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdmotion/common.hpp"
#include "pdmotion/matrix.hpp"

namespace pdmotion::nn {

/// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-sample shape: {channels, time} for sequences, {features} for vectors.
using Shape = std::vector<std::size_t>;

/// Dense batch-major tensor. The first axis is always the batch.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);

  std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t sample_size() const;
  Shape sample_shape() const { return {shape.begin() + 1, shape.end()}; }
  double* sample(std::size_t b) { return data.data() + b * sample_size(); }
  const double* sample(std::size_t b) const { return data.data() + b * sample_size(); }
};

struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;

  void resize(std::size_t n) {
    value.assign(n, 0.0);
    grad.assign(n, 0.0);
  }
};

enum class Activation { Linear, ReLU, Sigmoid };

/// A differentiable operation with 1+ inputs. `forward` is const so a trained
/// network can serve concurrent inference; `backward` accumulates into the
/// parameter gradients and into `grad_in` (entries may be null).
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(std::span<const Shape> in) const = 0;
  virtual void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const = 0;
  virtual void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                        std::span<Tensor* const> grad_in, bool training) = 0;

  virtual std::vector<Param*> params() { return {}; }
  virtual void init(Rng& /*rng*/) {}
  /// Running statistics update after a training-mode forward pass.
  virtual void observe(std::span<const Tensor* const> /*in*/) {}

  virtual nlohmann::json config() const { return nlohmann::json::object(); }
  virtual nlohmann::json state() const { return nullptr; }
  virtual void load_state(const nlohmann::json& /*state*/) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
};

/// Same-padded 1-D convolution without bias. Padding puts (k-1)/2 zeros
/// before the sequence and the rest after.
class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t filter_len);
  std::string kind() const override { return "conv1d"; }
  Shape output_shape(std::span<const Shape> in) const override;
  void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const override;
  void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                std::span<Tensor* const> grad_in, bool training) override;
  std::vector<Param*> params() override { return {&weight_}; }
  void init(Rng& rng) override;
  nlohmann::json config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1d>(*this); }

  Param& weight() { return weight_; }

 private:
  std::size_t in_, out_, k_;
  Param weight_;  // [out][in][k]
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in_features, std::size_t out_features);
  std::string kind() const override { return "dense"; }
  Shape output_shape(std::span<const Shape> in) const override;
  void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const override;
  void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                std::span<Tensor* const> grad_in, bool training) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  void init(Rng& rng) override;
  nlohmann::json config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  std::size_t in_, out_;
  Param weight_;  // [out][in]
  Param bias_;
};

/// Normalizes each channel over batch (and time for sequences). Training mode
/// uses batch statistics; inference uses running averages.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(std::size_t channels, double momentum = 0.9, double eps = 1e-5);
  std::string kind() const override { return "batchnorm"; }
  Shape output_shape(std::span<const Shape> in) const override;
  void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const override;
  void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                std::span<Tensor* const> grad_in, bool training) override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  void init(Rng& rng) override;
  void observe(std::span<const Tensor* const> in) override;
  nlohmann::json config() const override;
  nlohmann::json state() const override;
  void load_state(const nlohmann::json& state) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }

 private:
  void batch_stats(const Tensor& x, std::vector<double>& mean, std::vector<double>& var) const;

  std::size_t channels_;
  double momentum_, eps_;
  Param gamma_, beta_;
  std::vector<double> running_mean_, running_var_;
};

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(Activation f) : f_(f) {}
  std::string kind() const override { return "activation"; }
  Shape output_shape(std::span<const Shape> in) const override;
  void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const override;
  void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                std::span<Tensor* const> grad_in, bool training) override;
  nlohmann::json config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ActivationLayer>(*this); }

 private:
  Activation f_;
};

class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "global_avg_pool"; }
  Shape output_shape(std::span<const Shape> in) const override;
  void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const override;
  void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                std::span<Tensor* const> grad_in, bool training) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
};

/// Max pooling along time, stride 1, same padding.
class MaxPool final : public Layer {
 public:
  explicit MaxPool(std::size_t width = 3) : width_(width) {}
  std::string kind() const override { return "maxpool"; }
  Shape output_shape(std::span<const Shape> in) const override;
  void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const override;
  void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                std::span<Tensor* const> grad_in, bool training) override;
  nlohmann::json config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool>(*this); }

 private:
  std::size_t width_;
};

/// Channel-axis concatenation of sequences of equal length.
class Concat final : public Layer {
 public:
  std::string kind() const override { return "concat"; }
  Shape output_shape(std::span<const Shape> in) const override;
  void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const override;
  void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                std::span<Tensor* const> grad_in, bool training) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Concat>(*this); }
};

/// Elementwise sum of equally shaped inputs (residual shortcuts).
class Add final : public Layer {
 public:
  std::string kind() const override { return "add"; }
  Shape output_shape(std::span<const Shape> in) const override;
  void forward(std::span<const Tensor* const> in, Tensor& out, bool training) const override;
  void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& grad_out,
                std::span<Tensor* const> grad_in, bool training) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Add>(*this); }
};

std::unique_ptr<Layer> make_layer(const std::string& kind, const nlohmann::json& config);

/// Directed acyclic graph of layers in insertion order. Node -1 is the
/// network input; the last node must produce per-sample logits, which
/// `predict` turns into class probabilities with a softmax.
class Network {
 public:
  static constexpr int kInput = -1;

  explicit Network(Shape input_shape);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// Appends a node; throws ConfigError naming the layer if shapes do not compose.
  int add(std::unique_ptr<Layer> layer, std::vector<int> inputs, std::string name = {});

  const Shape& input_shape() const { return input_shape_; }
  const Shape& node_shape(int node) const;
  std::size_t node_count() const { return nodes_.size(); }
  const Layer& layer(int node) const { return *nodes_.at(static_cast<std::size_t>(node)).layer; }
  const std::string& node_name(int node) const { return nodes_.at(static_cast<std::size_t>(node)).name; }
  const std::vector<int>& node_inputs(int node) const { return nodes_.at(static_cast<std::size_t>(node)).inputs; }
  std::size_t n_outputs() const;

  /// Output of the last node (logits for classifiers). Thread-safe.
  Tensor logits(const Tensor& batch, bool training = false) const;
  /// Output of every node, in node order. Thread-safe.
  std::vector<Tensor> node_outputs(const Tensor& batch, bool training = false) const { return run(batch, training); }
  /// Class probabilities, one row per sample. Thread-safe.
  RowMatrix predict(const Tensor& batch) const;

  /// Mean cross-entropy gradients for every parameter (training-mode
  /// statistics). Parameter grads are overwritten. Returns the loss.
  double compute_gradients(const Tensor& batch, std::span<const int> labels, bool update_running_stats = false);

  std::vector<Param*> params();
  std::size_t parameter_count() const;
  void init(std::uint64_t seed);

  std::uint64_t seed = 0;
  int epochs_trained = 0;

  nlohmann::json to_json() const;
  static Network from_json(const nlohmann::json& doc);

 private:
  struct Node {
    std::unique_ptr<Layer> layer;
    std::vector<int> inputs;
    std::string name;
    Shape shape;
  };

  void check_batch(const Tensor& batch) const;
  void require_vector_output() const;
  std::vector<Tensor> run(const Tensor& batch, bool training) const;

  Shape input_shape_;
  std::vector<Node> nodes_;
};

RowMatrix softmax(const RowMatrix& logits);

/// Mean over rows of -sum_i y_i log(max(p_i, 1e-12)) with one-hot y.
double cross_entropy(const RowMatrix& probs, std::span<const int> labels);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step = 0;
  std::vector<std::vector<double>> m, v;
};

/// Bias-corrected Adam update of every param from its `grad`.
void adam_step(AdamState& state, std::span<Param* const> params);

struct TrainConfig {
  int epochs = 1;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  AdamConfig adam;
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Mini-batch Adam on shuffled data; the last partial batch is kept.
TrainResult train(Network& net, const Tensor& inputs, std::span<const int> labels, const TrainConfig& config);

/// Dense(128)+sigmoid, Dense(128)+sigmoid, Dense(n_classes); softmax on output.
Network build_mlp(std::size_t input_dim, std::size_t n_classes, std::size_t hidden = 128);

/// Gathers rows `index` of `source` into a new batch tensor.
Tensor gather(const Tensor& source, std::span<const std::size_t> index);

Tensor from_rows(const RowMatrix& X);

}  // namespace pdmotion::nn
