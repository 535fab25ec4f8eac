#include "pdmotion/models.hpp"

#include <algorithm>
#include <set>

#include "pdmotion/features.hpp"

namespace pdmotion {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Rocket: return "rocket";
    case ModelKind::Inception: return "inception";
    case ModelKind::InceptionDefault: return "inception-default";
    case ModelKind::WaveletMlp: return "wavelet-mlp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::Rocket, ModelKind::Inception, ModelKind::InceptionDefault, ModelKind::WaveletMlp})
    if (text == to_string(k)) return k;
  throw ConfigError("unknown model kind '" + std::string(text) +
                    "' (expected rocket, inception, inception-default or wavelet-mlp)");
}

double ModelSpec::effective_window_seconds() const {
  return kind == ModelKind::Inception || kind == ModelKind::InceptionDefault ? inception.hyperparams.window_seconds
                                                                            : window_seconds;
}

void ModelSpec::validate() const {
  const double ws = effective_window_seconds();
  if (!(ws >= 3.0 && ws <= 30.0)) throw ConfigError("window_seconds must be in [3, 30]");
  switch (kind) {
    case ModelKind::Rocket:
      if (rocket.n_kernels < 1) throw ConfigError("rocket n_kernels must be >= 1");
      if (rocket.lambdas.empty()) throw ConfigError("rocket lambda grid is empty");
      for (double l : rocket.lambdas)
        if (!(l > 0.0)) throw ConfigError("rocket lambdas must be > 0");
      if (rocket.cv_folds < 2) throw ConfigError("rocket cv_folds must be >= 2");
      break;
    case ModelKind::Inception:
    case ModelKind::InceptionDefault:
      inception.hyperparams.validate();
      if (inception.epochs < 1) throw ConfigError("inception epochs must be >= 1");
      if (inception.ensemble_size < 1) throw ConfigError("ensemble_size must be >= 1");
      if (inception.batch_size < 1) throw ConfigError("batch_size must be >= 1");
      break;
    case ModelKind::WaveletMlp:
      if (mlp.epochs < 1) throw ConfigError("mlp epochs must be >= 1");
      if (mlp.batch_size < 1 || mlp.hidden < 1) throw ConfigError("mlp batch_size and hidden must be >= 1");
      if (static_cast<std::size_t>(std::lround(ws * kTargetRate)) < min_wavelet_window())
        throw ConfigError("wavelet-mlp needs windows of at least " + std::to_string(min_wavelet_window()) +
                          " samples");
      break;
  }
}

ModelSpec default_model_spec(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  if (kind == ModelKind::InceptionDefault) {
    s.inception.hyperparams = InceptionHyperparams{};
    s.inception.epochs = 1500;
  }
  return s;
}

nlohmann::json to_json(const ModelSpec& s) {
  nlohmann::json j = {{"kind", to_string(s.kind)}, {"window_seconds", s.effective_window_seconds()}};
  switch (s.kind) {
    case ModelKind::Rocket:
      j["rocket"] = {{"n_kernels", s.rocket.n_kernels}, {"per_channel_banks", s.rocket.per_channel_banks},
                     {"lambdas", s.rocket.lambdas}, {"cv_folds", s.rocket.cv_folds}};
      break;
    case ModelKind::Inception:
    case ModelKind::InceptionDefault:
      j["inception"] = {{"hyperparams", to_json(s.inception.hyperparams)}, {"epochs", s.inception.epochs},
                        {"ensemble_size", s.inception.ensemble_size}, {"batch_size", s.inception.batch_size}};
      break;
    case ModelKind::WaveletMlp:
      j["mlp"] = {{"epochs", s.mlp.epochs}, {"batch_size", s.mlp.batch_size}, {"hidden", s.mlp.hidden}};
      break;
  }
  return j;
}

nn::Tensor windows_to_tensor(std::span<const Window> windows) {
  if (windows.empty()) throw DataError("no windows");
  const std::size_t C = windows[0].channels, T = windows[0].length;
  nn::Tensor t({windows.size(), C, T});
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].channels != C || windows[i].length != T) throw DataError("windows differ in shape");
    std::copy(windows[i].values.begin(), windows[i].values.end(), t.sample(i));
  }
  return t;
}

std::vector<int> window_labels(std::span<const Window> windows) {
  std::vector<int> y;
  y.reserve(windows.size());
  for (const auto& w : windows) y.push_back(w.class_label);
  return y;
}

namespace {

template <typename Model>
RowMatrix predict_chunked(const Model& model, std::span<const Window> windows, std::size_t chunk) {
  if (windows.empty()) throw DataError("no windows to score");
  chunk = std::max<std::size_t>(1, chunk);
  RowMatrix out;
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const auto part = windows.subspan(start, std::min(chunk, windows.size() - start));
    const RowMatrix p = model.predict(windows_to_tensor(part));
    if (start == 0) out.resize(static_cast<long>(windows.size()), p.cols());
    out.middleRows(static_cast<long>(start), p.rows()) = p;
  }
  return out;
}

void check_fit_input(std::span<const Window> windows, int n_classes) {
  if (windows.empty()) throw DataError("no training windows");
  if (n_classes < 2) throw DataError("degenerate labels: need at least 2 classes");
  for (const auto& w : windows)
    if (w.class_label < 0 || w.class_label >= n_classes)
      throw DataError("window label " + std::to_string(w.class_label) + " out of range");
}

class RocketClassifier final : public Classifier {
 public:
  explicit RocketClassifier(RocketSettings s) : settings_(std::move(s)) {}

  ModelKind kind() const override { return ModelKind::Rocket; }

  void fit(std::span<const Window> windows, int n_classes, std::uint64_t seed) override {
    check_fit_input(windows, n_classes);
    const std::size_t len = windows[0].length;
    banks_.clear();
    const std::size_t n_banks = settings_.per_channel_banks ? windows[0].channels : 1;
    for (std::size_t c = 0; c < n_banks; ++c) banks_.push_back(generate_kernels(settings_.n_kernels, len, derive_seed(seed, c)));
    RowMatrix X = features(windows);
    standardizer_ = Standardizer::fit(X);
    standardizer_.apply(X);
    const auto y = window_labels(windows);
    const auto folds = patient_row_folds(windows, n_classes, settings_.cv_folds, derive_seed(seed, 1000));
    RidgeOptions opt;
    opt.n_classes = n_classes;
    ridge_ = ridge_cv(X, y, settings_.lambdas, folds, opt).model;
  }

  RowMatrix scores(std::span<const Window> windows) const override {
    if (banks_.empty()) throw ConfigError("rocket model is not trained");
    RowMatrix X = features(windows);
    standardizer_.apply(X);
    return decision_scores(ridge_, X);
  }

  nlohmann::json to_json() const override {
    nlohmann::json banks = nlohmann::json::array();
    for (const auto& b : banks_) banks.push_back(pdmotion::to_json(b));
    return {{"format", "pdmotion.model"},
            {"version", 1},
            {"kind", "rocket"},
            {"settings",
             {{"n_kernels", settings_.n_kernels},
              {"per_channel_banks", settings_.per_channel_banks},
              {"lambdas", settings_.lambdas},
              {"cv_folds", settings_.cv_folds}}},
            {"kernel_banks", banks},
            {"standardizer", pdmotion::to_json(standardizer_)},
            {"ridge", pdmotion::to_json(ridge_)}};
  }

  static std::unique_ptr<Classifier> load(const nlohmann::json& doc) {
    RocketSettings s;
    const auto& st = doc.at("settings");
    s.n_kernels = st.at("n_kernels").get<std::size_t>();
    s.per_channel_banks = st.at("per_channel_banks").get<bool>();
    s.lambdas = st.at("lambdas").get<std::vector<double>>();
    s.cv_folds = st.at("cv_folds").get<int>();
    auto m = std::make_unique<RocketClassifier>(s);
    for (const auto& b : doc.at("kernel_banks")) m->banks_.push_back(kernel_bank_from_json(b));
    m->standardizer_ = standardizer_from_json(doc.at("standardizer"));
    m->ridge_ = ridge_model_from_json(doc.at("ridge"));
    return m;
  }

 private:
  RowMatrix features(std::span<const Window> windows) const {
    if (banks_.size() == 1) return transform(windows, banks_[0]);
    return transform(windows, std::span<const KernelBank>(banks_));
  }

  RocketSettings settings_;
  std::vector<KernelBank> banks_;
  Standardizer standardizer_;
  RidgeModel ridge_;
};

class InceptionClassifier final : public Classifier {
 public:
  InceptionClassifier(ModelKind kind, InceptionSettings s) : kind_(kind), settings_(std::move(s)) {}

  ModelKind kind() const override { return kind_; }

  void fit(std::span<const Window> windows, int n_classes, std::uint64_t seed) override {
    check_fit_input(windows, n_classes);
    EnsembleTrainConfig cfg;
    cfg.epochs = settings_.epochs;
    cfg.batch_size = settings_.batch_size;
    for (std::size_t i = 0; i < settings_.ensemble_size; ++i) cfg.seeds.push_back(derive_seed(seed, i));
    const auto y = window_labels(windows);
    model_ = train_ensemble(settings_.hyperparams, windows_to_tensor(windows), y,
                            static_cast<std::size_t>(n_classes), cfg);
  }

  RowMatrix scores(std::span<const Window> windows) const override {
    if (model_.members.empty()) throw ConfigError("inception model is not trained");
    return predict_windows(model_, windows);
  }

  nlohmann::json to_json() const override {
    return {{"format", "pdmotion.model"},
            {"version", 1},
            {"kind", to_string(kind_)},
            {"settings",
             {{"epochs", settings_.epochs},
              {"ensemble_size", settings_.ensemble_size},
              {"batch_size", settings_.batch_size}}},
            {"ensemble", model_.to_json()}};
  }

  static std::unique_ptr<Classifier> load(ModelKind kind, const nlohmann::json& doc) {
    InceptionSettings s;
    const auto& st = doc.at("settings");
    s.epochs = st.at("epochs").get<int>();
    s.ensemble_size = st.at("ensemble_size").get<std::size_t>();
    s.batch_size = st.at("batch_size").get<std::size_t>();
    auto m = std::make_unique<InceptionClassifier>(kind, s);
    m->model_ = EnsembleModel::from_json(doc.at("ensemble"));
    m->settings_.hyperparams = m->model_.hyperparams;
    return m;
  }

 private:
  ModelKind kind_;
  InceptionSettings settings_;
  EnsembleModel model_;
};

class WaveletMlpClassifier final : public Classifier {
 public:
  explicit WaveletMlpClassifier(MlpSettings s) : settings_(s), net_(nn::Shape{kWaveletFeatureCount}) {}

  ModelKind kind() const override { return ModelKind::WaveletMlp; }

  void fit(std::span<const Window> windows, int n_classes, std::uint64_t seed) override {
    check_fit_input(windows, n_classes);
    RowMatrix X = wavelet_feature_matrix(windows);
    standardizer_ = Standardizer::fit(X);
    standardizer_.apply(X);
    net_ = nn::build_mlp(kWaveletFeatureCount, static_cast<std::size_t>(n_classes), settings_.hidden);
    net_.init(derive_seed(seed, 0));
    nn::TrainConfig tc;
    tc.epochs = settings_.epochs;
    tc.batch_size = settings_.batch_size;
    tc.seed = derive_seed(seed, 1);
    const auto y = window_labels(windows);
    nn::train(net_, nn::from_rows(X), y, tc);
    trained_ = true;
  }

  RowMatrix scores(std::span<const Window> windows) const override {
    if (!trained_) throw ConfigError("wavelet-mlp model is not trained");
    RowMatrix X = wavelet_feature_matrix(windows);
    standardizer_.apply(X);
    return net_.predict(nn::from_rows(X));
  }

  nlohmann::json to_json() const override {
    return {{"format", "pdmotion.model"},
            {"version", 1},
            {"kind", "wavelet-mlp"},
            {"settings",
             {{"epochs", settings_.epochs}, {"batch_size", settings_.batch_size}, {"hidden", settings_.hidden}}},
            {"standardizer", pdmotion::to_json(standardizer_)},
            {"network", net_.to_json()}};
  }

  static std::unique_ptr<Classifier> load(const nlohmann::json& doc) {
    MlpSettings s;
    const auto& st = doc.at("settings");
    s.epochs = st.at("epochs").get<int>();
    s.batch_size = st.at("batch_size").get<std::size_t>();
    s.hidden = st.at("hidden").get<std::size_t>();
    auto m = std::make_unique<WaveletMlpClassifier>(s);
    m->standardizer_ = standardizer_from_json(doc.at("standardizer"));
    m->net_ = nn::Network::from_json(doc.at("network"));
    m->trained_ = true;
    return m;
  }

 private:
  MlpSettings settings_;
  Standardizer standardizer_;
  nn::Network net_;
  bool trained_ = false;
};

}  // namespace

RowMatrix predict_windows(const nn::Network& net, std::span<const Window> windows, std::size_t chunk) {
  return predict_chunked(net, windows, chunk);
}

RowMatrix predict_windows(const EnsembleModel& model, std::span<const Window> windows, std::size_t chunk) {
  return predict_chunked(model, windows, chunk);
}

std::vector<int> patient_row_folds(std::span<const Window> windows, int n_classes, int k, std::uint64_t seed) {
  std::set<std::string> patients;
  for (const auto& w : windows) patients.insert(w.patient_id);
  if (static_cast<int>(patients.size()) >= k) {
    const auto plan = grouped_stratified_folds(windows, n_classes, k, seed);
    std::vector<int> folds;
    folds.reserve(windows.size());
    for (const auto& w : windows) folds.push_back(plan.fold(w.patient_id));
    return folds;
  }
  return stratified_row_folds(window_labels(windows), k);
}

std::unique_ptr<Classifier> make_classifier(const ModelSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ModelKind::Rocket: return std::make_unique<RocketClassifier>(spec.rocket);
    case ModelKind::Inception:
    case ModelKind::InceptionDefault: return std::make_unique<InceptionClassifier>(spec.kind, spec.inception);
    case ModelKind::WaveletMlp: return std::make_unique<WaveletMlpClassifier>(spec.mlp);
  }
  throw ConfigError("unknown model kind");
}

std::unique_ptr<Classifier> load_classifier(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pdmotion.model") throw DataError("not a pdmotion.model document");
  if (doc.value("version", 0) != 1) throw DataError("unsupported model version");
  const auto kind = parse_model_kind(doc.at("kind").get<std::string>());
  switch (kind) {
    case ModelKind::Rocket: return RocketClassifier::load(doc);
    case ModelKind::Inception:
    case ModelKind::InceptionDefault: return InceptionClassifier::load(kind, doc);
    case ModelKind::WaveletMlp: return WaveletMlpClassifier::load(doc);
  }
  throw DataError("unknown model kind");
}

}  // namespace pdmotion
