#include "pdmotion/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pdmotion::nn {

Network::Network(Shape input_shape) : input_shape_(std::move(input_shape)) {
  if (input_shape_.empty() || input_shape_.size() > 2)
    throw ConfigError("network input must be (features) or (channels, time)");
  for (auto d : input_shape_)
    if (d == 0) throw ConfigError("network input dimensions must be >= 1");
}

Network::Network(const Network& other)
    : seed(other.seed), epochs_trained(other.epochs_trained), input_shape_(other.input_shape_) {
  nodes_.reserve(other.nodes_.size());
  for (const auto& n : other.nodes_) nodes_.push_back({n.layer->clone(), n.inputs, n.name, n.shape});
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

int Network::add(std::unique_ptr<Layer> layer, std::vector<int> inputs, std::string name) {
  if (!layer) throw ConfigError("null layer");
  const int id = static_cast<int>(nodes_.size());
  if (name.empty()) name = layer->kind() + "_" + std::to_string(id);
  if (inputs.empty()) throw ConfigError(name + ": layer has no inputs");
  std::vector<Shape> in;
  for (int i : inputs) {
    if (i < kInput || i >= id) throw ConfigError(name + ": input node " + std::to_string(i) + " does not exist");
    in.push_back(node_shape(i));
  }
  Shape shape;
  try {
    shape = layer->output_shape(in);
  } catch (const ConfigError& e) {
    throw ConfigError("layer '" + name + "': " + e.what());
  }
  nodes_.push_back({std::move(layer), std::move(inputs), std::move(name), std::move(shape)});
  return id;
}

const Shape& Network::node_shape(int node) const {
  if (node == kInput) return input_shape_;
  return nodes_.at(static_cast<std::size_t>(node)).shape;
}

std::size_t Network::n_outputs() const {
  if (nodes_.empty()) return 0;
  const auto& s = nodes_.back().shape;
  return s.size() == 1 ? s[0] : 0;
}

void Network::check_batch(const Tensor& batch) const {
  if (nodes_.empty()) throw ConfigError("network has no layers");
  Shape want{batch.batch()};
  want.insert(want.end(), input_shape_.begin(), input_shape_.end());
  if (batch.shape != want) {
    // Name the first layer that reads the input.
    std::string first = nodes_.front().name;
    for (const auto& n : nodes_)
      if (std::find(n.inputs.begin(), n.inputs.end(), kInput) != n.inputs.end()) {
        first = n.name;
        break;
      }
    std::string got, exp;
    for (auto d : batch.shape) got += std::to_string(d) + " ";
    for (auto d : want) exp += std::to_string(d) + " ";
    throw DataError("layer '" + first + "': input batch shape [ " + got + "] does not match expected [ " + exp + "]");
  }
  if (batch.data.size() != batch.batch() * batch.sample_size()) throw DataError("tensor data size does not match shape");
}

std::vector<Tensor> Network::run(const Tensor& batch, bool training) const {
  check_batch(batch);
  std::vector<Tensor> acts(nodes_.size());
  std::vector<const Tensor*> in;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    in.clear();
    for (int j : nodes_[i].inputs) in.push_back(j == kInput ? &batch : &acts[static_cast<std::size_t>(j)]);
    nodes_[i].layer->forward(in, acts[i], training);
  }
  return acts;
}

Tensor Network::logits(const Tensor& batch, bool training) const { return std::move(run(batch, training).back()); }

RowMatrix softmax(const RowMatrix& z) {
  RowMatrix p(z.rows(), z.cols());
  for (long i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    double s = 0.0;
    for (long j = 0; j < z.cols(); ++j) s += (p(i, j) = std::exp(z(i, j) - m));
    p.row(i) /= s;
  }
  return p;
}

namespace {

RowMatrix as_matrix(const Tensor& t) {
  RowMatrix m(static_cast<long>(t.batch()), static_cast<long>(t.sample_size()));
  std::copy(t.data.begin(), t.data.end(), m.data());
  return m;
}

}  // namespace

void Network::require_vector_output() const {
  if (nodes_.empty()) throw ConfigError("network has no layers");
  if (n_outputs() == 0) throw ConfigError("output layer '" + nodes_.back().name + "' does not produce a vector");
}

RowMatrix Network::predict(const Tensor& batch) const {
  require_vector_output();
  return softmax(as_matrix(logits(batch, false)));
}

double cross_entropy(const RowMatrix& probs, std::span<const int> labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) throw DataError("cross_entropy: row/label count mismatch");
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (long i = 0; i < probs.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probs.cols()) throw DataError("cross_entropy: label out of range");
    sum -= std::log(std::max(probs(i, y), 1e-12));
  }
  return sum / static_cast<double>(probs.rows());
}

double Network::compute_gradients(const Tensor& batch, std::span<const int> labels, bool update_running_stats) {
  require_vector_output();
  if (labels.size() != batch.batch()) throw DataError("label count does not match batch size");
  auto acts = run(batch, true);
  const RowMatrix p = softmax(as_matrix(acts.back()));
  const double loss = cross_entropy(p, labels);

  for (auto* prm : params()) std::fill(prm->grad.begin(), prm->grad.end(), 0.0);

  const std::size_t n = nodes_.size();
  std::vector<Tensor> grads(n);
  {
    Tensor& g = grads[n - 1];
    g = Tensor(acts.back().shape);
    const double inv = 1.0 / static_cast<double>(batch.batch());
    const std::size_t C = acts.back().sample_size();
    for (std::size_t b = 0; b < batch.batch(); ++b)
      for (std::size_t c = 0; c < C; ++c)
        g.sample(b)[c] = (p(static_cast<long>(b), static_cast<long>(c)) - (static_cast<int>(c) == labels[b] ? 1.0 : 0.0)) * inv;
  }

  std::vector<const Tensor*> in;
  std::vector<Tensor*> gin;
  for (std::size_t k = n; k-- > 0;) {
    auto& node = nodes_[k];
    in.clear();
    gin.clear();
    for (int j : node.inputs) {
      in.push_back(j == kInput ? &batch : &acts[static_cast<std::size_t>(j)]);
      if (j == kInput) {
        gin.push_back(nullptr);
      } else {
        auto& gj = grads[static_cast<std::size_t>(j)];
        if (gj.data.empty()) gj = Tensor(acts[static_cast<std::size_t>(j)].shape);
        gin.push_back(&gj);
      }
    }
    if (!grads[k].data.empty()) node.layer->backward(in, acts[k], grads[k], gin, true);
    if (update_running_stats) node.layer->observe(in);
    // Consumers of node k all have larger indices and are done.
    grads[k] = Tensor();
    acts[k] = Tensor();
  }
  return loss;
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& n : nodes_)
    for (auto* p : n.layer->params()) out.push_back(p);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& n : nodes_)
    for (const auto* p : n.layer->params()) total += p->value.size();
  return total;
}

void Network::init(std::uint64_t s) {
  seed = s;
  epochs_trained = 0;
  Rng rng(s);
  for (auto& n : nodes_) n.layer->init(rng);
}

nlohmann::json Network::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto* p : n.layer->params()) params[p->name] = p->value;
    nlohmann::json node = {{"kind", n.layer->kind()}, {"name", n.name}, {"inputs", n.inputs},
                           {"config", n.layer->config()}, {"params", params}};
    const auto st = n.layer->state();
    if (!st.is_null()) node["state"] = st;
    nodes.push_back(std::move(node));
  }
  return {{"format", "pdmotion.network"}, {"version", 1},        {"input_shape", input_shape_},
          {"seed", seed},                 {"epochs", epochs_trained}, {"nodes", nodes}};
}

Network Network::from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pdmotion.network") throw DataError("not a pdmotion.network document");
  if (doc.value("version", 0) != 1) throw DataError("unsupported network version");
  Network net(doc.at("input_shape").get<Shape>());
  net.seed = doc.at("seed").get<std::uint64_t>();
  net.epochs_trained = doc.at("epochs").get<int>();
  for (const auto& node : doc.at("nodes")) {
    auto layer = make_layer(node.at("kind").get<std::string>(), node.at("config"));
    for (auto* p : layer->params()) {
      auto v = node.at("params").at(p->name).get<std::vector<double>>();
      if (v.size() != p->value.size()) throw DataError("parameter '" + p->name + "' size mismatch");
      p->value = std::move(v);
    }
    if (node.contains("state")) layer->load_state(node.at("state"));
    net.add(std::move(layer), node.at("inputs").get<std::vector<int>>(), node.at("name").get<std::string>());
  }
  return net;
}

void adam_step(AdamState& st, std::span<Param* const> params) {
  if (st.m.empty()) {
    for (const auto* p : params) {
      st.m.emplace_back(p->value.size(), 0.0);
      st.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (st.m.size() != params.size()) throw ConfigError("adam state does not match parameter list");
  ++st.step;
  const auto& c = st.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = st.m[i];
    auto& v = st.v[i];
    if (m.size() != p.value.size()) throw ConfigError("adam moment shape does not match parameter '" + p.name + "'");
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      p.value[j] -= c.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + c.eps);
    }
  }
}

Tensor gather(const Tensor& src, std::span<const std::size_t> index) {
  Shape s = src.shape;
  s[0] = index.size();
  Tensor out(s);
  const std::size_t n = src.sample_size();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= src.batch()) throw DataError("gather index out of range");
    std::copy_n(src.sample(index[i]), n, out.sample(i));
  }
  return out;
}

Tensor from_rows(const RowMatrix& X) {
  Tensor t({static_cast<std::size_t>(X.rows()), static_cast<std::size_t>(X.cols())});
  std::copy(X.data(), X.data() + X.size(), t.data.begin());
  return t;
}

TrainResult train(Network& net, const Tensor& inputs, std::span<const int> labels, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  const std::size_t n = inputs.batch();
  if (n == 0) throw DataError("training set is empty");
  if (labels.size() != n) throw DataError("label count does not match input count");
  const auto k = net.n_outputs();
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw DataError("label " + std::to_string(y) + " out of range");

  AdamState adam{cfg.adam, 0, {}, {}};
  auto params = net.params();
  TrainResult result;
  std::vector<std::size_t> order(n);
  std::vector<int> yb;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(e)));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0, batch_no = 0; start < n; start += cfg.batch_size, ++batch_no) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Tensor xb = gather(inputs, idx);
      yb.clear();
      for (auto i : idx) yb.push_back(labels[i]);
      const double loss = net.compute_gradients(xb, yb, true);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite training loss at epoch " + std::to_string(e + 1) + ", batch " +
                            std::to_string(batch_no + 1) + "; check input scaling and the learning rate");
      adam_step(adam, params);
      total += loss * static_cast<double>(idx.size());
    }
    result.loss_trace.push_back(total / static_cast<double>(n));
  }
  net.epochs_trained += cfg.epochs;
  return result;
}

Network build_mlp(std::size_t input_dim, std::size_t n_classes, std::size_t hidden) {
  if (input_dim < 1) throw ConfigError("mlp input_dim must be >= 1");
  if (n_classes < 2) throw ConfigError("mlp needs at least 2 classes");
  Network net({input_dim});
  int x = net.add(std::make_unique<Dense>(input_dim, hidden), {Network::kInput}, "hidden1");
  x = net.add(std::make_unique<ActivationLayer>(Activation::Sigmoid), {x}, "hidden1_sigmoid");
  x = net.add(std::make_unique<Dense>(hidden, hidden), {x}, "hidden2");
  x = net.add(std::make_unique<ActivationLayer>(Activation::Sigmoid), {x}, "hidden2_sigmoid");
  net.add(std::make_unique<Dense>(hidden, n_classes), {x}, "output");
  return net;
}

}  // namespace pdmotion::nn
