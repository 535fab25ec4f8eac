#include "pdmotion/inception.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>

#include "pdmotion/dataset.hpp"

namespace pdmotion {

using nn::Network;

void InceptionHyperparams::validate() const {
  if (!(window_seconds >= 3.0 && window_seconds <= 30.0)) throw ConfigError("window_seconds must be in [3, 30]");
  if (filter_len < 8 || filter_len > 256) throw ConfigError("filter_len must be in [8, 256]");
  if (n_filters < 2 || n_filters > 128 || (n_filters & (n_filters - 1)) != 0)
    throw ConfigError("n_filters must be a power of two in [2, 128]");
  if (depth < 1 || depth > 12) throw ConfigError("depth must be in [1, 12]");
  if (bottleneck_channels < 1) throw ConfigError("bottleneck_channels must be >= 1");
  if (n_branches < 1 || n_branches > 8) throw ConfigError("n_branches must be in [1, 8]");
  if ((filter_len >> (n_branches - 1)) < 1) throw ConfigError("filter_len too short for n_branches halvings");
}

std::size_t InceptionHyperparams::window_len() const {
  return static_cast<std::size_t>(std::lround(window_seconds * kTargetRate));
}

nlohmann::json to_json(const InceptionHyperparams& hp) {
  return {{"window_seconds", hp.window_seconds}, {"filter_len", hp.filter_len},
          {"n_filters", hp.n_filters},           {"depth", hp.depth},
          {"residual", hp.residual},             {"bottleneck_channels", hp.bottleneck_channels},
          {"n_branches", hp.n_branches}};
}

InceptionHyperparams inception_hyperparams_from_json(const nlohmann::json& doc) {
  InceptionHyperparams hp;
  hp.window_seconds = doc.at("window_seconds").get<double>();
  hp.filter_len = doc.at("filter_len").get<int>();
  hp.n_filters = doc.at("n_filters").get<int>();
  hp.depth = doc.at("depth").get<int>();
  hp.residual = doc.at("residual").get<bool>();
  hp.bottleneck_channels = doc.value("bottleneck_channels", 32);
  hp.n_branches = doc.value("n_branches", 3);
  hp.validate();
  return hp;
}

std::vector<int> filter_lengths(int filter_len, int count) {
  if (count < 1) throw ConfigError("filter count must be >= 1");
  if (filter_len < 1) throw ConfigError("filter_len must be >= 1");
  std::vector<int> out;
  int len = filter_len;
  for (int i = 0; i < count; ++i) {
    out.push_back(std::max(1, len));
    len /= 2;
  }
  return out;
}

ModuleSpec module_spec(const InceptionHyperparams& hp) {
  hp.validate();
  ModuleSpec s;
  s.bottleneck_channels = static_cast<std::size_t>(hp.bottleneck_channels);
  s.branch_channels = static_cast<std::size_t>(hp.n_filters);
  s.filter_lengths = filter_lengths(hp.filter_len, hp.n_branches);
  return s;
}

int append_module(Network& net, int input, std::size_t in_channels, const ModuleSpec& spec, const std::string& p) {
  if (in_channels < 1) throw ConfigError("module input needs at least one channel");
  if (spec.branch_channels < 1 || spec.filter_lengths.empty()) throw ConfigError("module needs at least one branch");
  int trunk = input;
  std::size_t trunk_channels = in_channels;
  if (spec.bottleneck_channels > 0 && in_channels > 1) {
    trunk = net.add(std::make_unique<nn::Conv1d>(in_channels, spec.bottleneck_channels, 1), {input}, p + "_bottleneck");
    trunk_channels = spec.bottleneck_channels;
  }
  std::vector<int> branches;
  for (std::size_t i = 0; i < spec.filter_lengths.size(); ++i) {
    const int len = spec.filter_lengths[i];
    if (len < 1) throw ConfigError("conv1d filter_len must be >= 1");
    branches.push_back(net.add(
        std::make_unique<nn::Conv1d>(trunk_channels, spec.branch_channels, static_cast<std::size_t>(len)), {trunk},
        p + "_conv" + std::to_string(len)));
  }
  const int pool = net.add(std::make_unique<nn::MaxPool>(spec.pool_width), {input}, p + "_maxpool");
  branches.push_back(
      net.add(std::make_unique<nn::Conv1d>(in_channels, spec.branch_channels, 1), {pool}, p + "_pool_conv"));
  const int cat = net.add(std::make_unique<nn::Concat>(), branches, p + "_concat");
  const int bn = net.add(std::make_unique<nn::BatchNorm>(spec.out_channels()), {cat}, p + "_bn");
  return net.add(std::make_unique<nn::ActivationLayer>(nn::Activation::ReLU), {bn}, p + "_relu");
}

Network build_module(std::size_t in_channels, std::size_t time_len, const ModuleSpec& spec) {
  Network net({in_channels, time_len});
  append_module(net, Network::kInput, in_channels, spec);
  return net;
}

Network build_module(std::size_t in_channels, const InceptionHyperparams& hp) {
  return build_module(in_channels, hp.window_len(), module_spec(hp));
}

Network build_network(const InceptionHyperparams& hp, std::size_t n_classes, std::size_t input_channels,
                      std::size_t time_len) {
  const ModuleSpec spec = module_spec(hp);
  if (n_classes < 2) throw ConfigError("network needs at least 2 classes");
  if (input_channels < 1) throw ConfigError("network needs at least one input channel");
  if (time_len == 0) time_len = hp.window_len();
  Network net({input_channels, time_len});
  int x = Network::kInput;
  std::size_t channels = input_channels;
  int residual = Network::kInput;
  std::size_t residual_channels = input_channels;
  for (int d = 1; d <= hp.depth; ++d) {
    const std::string p = "module" + std::to_string(d);
    x = append_module(net, x, channels, spec, p);
    channels = spec.out_channels();
    if (hp.residual && d % 3 == 0) {
      const int sc = net.add(std::make_unique<nn::Conv1d>(residual_channels, channels, 1), {residual}, p + "_shortcut");
      const int sbn = net.add(std::make_unique<nn::BatchNorm>(channels), {sc}, p + "_shortcut_bn");
      const int sum = net.add(std::make_unique<nn::Add>(), {sbn, x}, p + "_add");
      x = net.add(std::make_unique<nn::ActivationLayer>(nn::Activation::ReLU), {sum}, p + "_add_relu");
      residual = x;
      residual_channels = channels;
    }
  }
  x = net.add(std::make_unique<nn::GlobalAvgPool>(), {x}, "gap");
  net.add(std::make_unique<nn::Dense>(channels, n_classes), {x}, "output");
  return net;
}

RowMatrix EnsembleModel::predict(const nn::Tensor& batch) const {
  if (members.empty()) throw ConfigError("ensemble has no members");
  std::vector<RowMatrix> probs;
  probs.reserve(members.size());
  for (const auto& m : members) probs.push_back(m.predict(batch));
  RowMatrix out(probs[0].rows(), probs[0].cols());
  std::vector<double> vals(members.size());
  for (long i = 0; i < out.rows(); ++i)
    for (long j = 0; j < out.cols(); ++j) {
      for (std::size_t k = 0; k < probs.size(); ++k) vals[k] = probs[k](i, j);
      std::sort(vals.begin(), vals.end());
      double s = 0.0;
      for (double v : vals) s += v;
      out(i, j) = s / static_cast<double>(vals.size());
    }
  return out;
}

nlohmann::json EnsembleModel::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& net : members) m.push_back(net.to_json());
  return {{"format", "pdmotion.ensemble"}, {"version", 1}, {"hyperparams", pdmotion::to_json(hyperparams)},
          {"members", m}};
}

EnsembleModel EnsembleModel::from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pdmotion.ensemble") throw DataError("not a pdmotion.ensemble document");
  if (doc.value("version", 0) != 1) throw DataError("unsupported ensemble version");
  EnsembleModel e;
  e.hyperparams = inception_hyperparams_from_json(doc.at("hyperparams"));
  for (const auto& m : doc.at("members")) e.members.push_back(Network::from_json(m));
  if (e.members.empty()) throw DataError("ensemble has no members");
  for (const auto& m : e.members)
    if (m.input_shape() != e.members[0].input_shape() || m.n_outputs() != e.members[0].n_outputs())
      throw DataError("ensemble members have different input or output shapes");
  return e;
}

EnsembleModel train_ensemble(const InceptionHyperparams& hp, const nn::Tensor& inputs, std::span<const int> labels,
                             std::size_t n_classes, const EnsembleTrainConfig& cfg) {
  hp.validate();
  if (cfg.seeds.empty()) throw ConfigError("ensemble needs at least one seed");
  if (cfg.require_distinct_seeds && std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size())
    throw ConfigError("ensemble seeds must be distinct");
  if (inputs.shape.size() != 3) throw DataError("ensemble inputs must be (batch, channels, time)");

  const Network proto = build_network(hp, n_classes, inputs.shape[1], inputs.shape[2]);
  EnsembleModel model;
  model.hyperparams = hp;
  model.members.assign(cfg.seeds.size(), proto);
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(cfg.seeds.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      auto& net = model.members[k];
      net.init(cfg.seeds[k]);
      nn::TrainConfig tc;
      tc.epochs = cfg.epochs;
      tc.batch_size = cfg.batch_size;
      tc.seed = derive_seed(cfg.seeds[k], 1);
      nn::train(net, inputs, labels, tc);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return model;
}

}  // namespace pdmotion
