#include "pdmotion/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pdmotion/csv_io.hpp"

namespace pdmotion {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"data", {"source", "recordings", "annotations", "device", "symptom", "class_map"}},
      {"synth",
       {"patients", "labels", "segments_per_patient", "segment_seconds", "gap_seconds", "burst_duty",
        "mean_burst_seconds", "activity_scale", "patient_variability", "sensor_noise", "tremor_amplitude",
        "binary_amplitude"}},
      {"model",
       {"kind", "window_seconds", "n_kernels", "per_channel_banks", "lambdas", "cv_folds", "epochs", "batch_size",
        "ensemble_size", "hidden", "filter_len", "n_filters", "depth", "residual", "bottleneck_channels",
        "n_branches"}},
      {"split", {"k", "test_fold"}},
      {"search",
       {"trials", "k", "epochs", "batch_size", "window_min", "window_max", "filter_len_min", "filter_len_max",
        "filters_exp_min", "filters_exp_max", "depth_min", "depth_max"}},
      {"evaluate", {"repetitions"}},
      {"compare",
       {"alpha", "comparisons", "bootstrap_iters", "uplift", "power_iters", "power_inner_iters", "min_power", "metric",
        "samples"}},
      {"seeds", {"data", "split", "model", "search", "evaluate", "compare"}},
      {"output", {"dir"}},
  };
  return s;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  template <typename T>
  void get(const std::string& section, const std::string& key, T& out) const {
    if (auto v = raw(section, key)) out = parse<T>(section, key, *v);
  }

  template <typename T>
  void get_list(const std::string& section, const std::string& key, std::vector<T>& out) const {
    if (auto v = raw(section, key)) {
      out.clear();
      for (const auto& item : split_list(*v)) out.push_back(parse<T>(section, key, item));
    }
  }

  std::optional<std::uint64_t> seed(const std::string& key) const {
    if (auto v = raw("seeds", key)) return parse<std::uint64_t>("seeds", key, *v);
    return std::nullopt;
  }

 private:
  template <typename T>
  static T parse(const std::string& section, const std::string& key, const std::string& text) {
    auto bad = [&]() { return ConfigError("[" + section + "] " + key + ": invalid value '" + text + "'"); };
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      std::string t = text;
      std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
      if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
      if (t == "false" || t == "no" || t == "off" || t == "0") return false;
      throw bad();
    } else {
      std::istringstream ss(text);
      T v{};
      if constexpr (std::is_unsigned_v<T>) {
        if (!text.empty() && text[0] == '-') throw bad();
      }
      ss >> v;
      if (ss.fail() || !ss.eof()) throw bad();
      return v;
    }
  }

  const pt::ptree& tree_;
};

void check_schema(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' outside of a section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::uint64_t Seeds::require(const std::optional<std::uint64_t>& seed, const char* name) const {
  if (!seed) throw ConfigError(std::string("missing seed '") + name + "' in [seeds]; every random stage needs an explicit seed");
  return *seed;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  check_schema(tree);
  const Reader r(tree);
  ExperimentConfig c;

  std::string source = "synth";
  r.get("data", "source", source);
  if (source == "synth") {
    c.synthetic = true;
  } else if (source == "files") {
    c.synthetic = false;
  } else {
    throw ConfigError("[data] source must be 'synth' or 'files'");
  }
  if (auto v = r.raw("data", "recordings")) c.recordings_dir = resolve(base_dir, *v);
  if (auto v = r.raw("data", "annotations")) c.annotations = resolve(base_dir, *v);
  try {
    if (auto v = r.raw("data", "device")) c.device = parse_device(*v);
    if (auto v = r.raw("data", "symptom")) c.symptom = parse_symptom(*v);
  } catch (const DataError& e) {
    throw ConfigError(std::string("[data] ") + e.what());
  }
  {
    std::vector<int> table;
    r.get_list("data", "class_map", table);
    if (!table.empty()) c.class_map.set(c.symptom, table);
  }
  if (!c.synthetic && (c.recordings_dir.empty() || c.annotations.empty()))
    throw ConfigError("[data] source = files needs 'recordings' and 'annotations'");

  auto& s = c.synth;
  s.symptom = c.symptom;
  s.device = c.device;
  if (c.symptom != Symptom::Tremor) s.labels = {0, 1};
  r.get("synth", "patients", s.n_patients);
  r.get_list("synth", "labels", s.labels);
  r.get("synth", "segments_per_patient", s.segments_per_patient);
  r.get("synth", "segment_seconds", s.segment_seconds);
  r.get("synth", "gap_seconds", s.gap_seconds);
  r.get("synth", "burst_duty", s.burst_duty);
  r.get("synth", "mean_burst_seconds", s.mean_burst_seconds);
  r.get("synth", "activity_scale", s.activity_scale);
  r.get("synth", "patient_variability", s.patient_variability);
  r.get("synth", "sensor_noise", s.sensor_noise);
  r.get_list("synth", "tremor_amplitude", s.tremor_amplitude);
  r.get("synth", "binary_amplitude", s.binary_amplitude);
  try {
    s.validate();
  } catch (const DataError& e) {
    throw ConfigError(std::string("[synth] ") + e.what());
  }

  std::string kind = "rocket";
  r.get("model", "kind", kind);
  c.model = default_model_spec(parse_model_kind(kind));
  auto& m = c.model;
  auto& hp = m.inception.hyperparams;
  r.get("model", "window_seconds", m.window_seconds);
  if (m.kind == ModelKind::Inception || m.kind == ModelKind::InceptionDefault) {
    hp.window_seconds = m.window_seconds;
    r.get("model", "epochs", m.inception.epochs);
    r.get("model", "batch_size", m.inception.batch_size);
  } else if (m.kind == ModelKind::WaveletMlp) {
    r.get("model", "epochs", m.mlp.epochs);
    r.get("model", "batch_size", m.mlp.batch_size);
  }
  r.get("model", "n_kernels", m.rocket.n_kernels);
  r.get("model", "per_channel_banks", m.rocket.per_channel_banks);
  r.get_list("model", "lambdas", m.rocket.lambdas);
  r.get("model", "cv_folds", m.rocket.cv_folds);
  r.get("model", "ensemble_size", m.inception.ensemble_size);
  r.get("model", "hidden", m.mlp.hidden);
  r.get("model", "filter_len", hp.filter_len);
  r.get("model", "n_filters", hp.n_filters);
  r.get("model", "depth", hp.depth);
  r.get("model", "residual", hp.residual);
  r.get("model", "bottleneck_channels", hp.bottleneck_channels);
  r.get("model", "n_branches", hp.n_branches);
  m.validate();

  r.get("split", "k", c.k);
  r.get("split", "test_fold", c.test_fold);
  if (c.k < 2) throw ConfigError("[split] k must be >= 2");
  if (c.test_fold < 0 || c.test_fold >= c.k) throw ConfigError("[split] test_fold must be in [0, k)");

  auto& sp = c.space;
  r.get("search", "window_min", sp.window_min);
  r.get("search", "window_max", sp.window_max);
  r.get("search", "filter_len_min", sp.filter_len_min);
  r.get("search", "filter_len_max", sp.filter_len_max);
  r.get("search", "filters_exp_min", sp.filters_exp_min);
  r.get("search", "filters_exp_max", sp.filters_exp_max);
  r.get("search", "depth_min", sp.depth_min);
  r.get("search", "depth_max", sp.depth_max);
  sp.validate();
  r.get("search", "trials", c.search.trials);
  r.get("search", "k", c.search.k);
  r.get("search", "epochs", c.search.epochs);
  r.get("search", "batch_size", c.search.batch_size);
  if (c.search.trials < 1 || c.search.k < 2 || c.search.epochs < 1 || c.search.batch_size < 1)
    throw ConfigError("[search] needs trials >= 1, k >= 2, epochs >= 1, batch_size >= 1");

  r.get("evaluate", "repetitions", c.repetitions);
  if (c.repetitions < 1) throw ConfigError("[evaluate] repetitions must be >= 1");

  auto& cc = c.compare;
  r.get("compare", "alpha", cc.alpha);
  r.get("compare", "comparisons", cc.comparisons);
  r.get("compare", "bootstrap_iters", cc.bootstrap_iters);
  if (auto v = r.raw("compare", "uplift")) {
    double u = 0.0;
    r.get("compare", "uplift", u);
    cc.uplift = u;
  }
  r.get("compare", "power_iters", cc.power_iters);
  r.get("compare", "power_inner_iters", cc.power_inner_iters);
  r.get("compare", "min_power", cc.min_power);
  r.get("compare", "metric", c.metric);
  {
    std::vector<std::string> files;
    r.get_list("compare", "samples", files);
    for (const auto& f : files) c.sample_files.push_back(resolve(base_dir, f));
  }
  if (!(cc.alpha > 0.0 && cc.alpha < 1.0)) throw ConfigError("[compare] alpha must be in (0, 1)");
  if (cc.comparisons < 0) throw ConfigError("[compare] comparisons must be >= 0");
  if (cc.bootstrap_iters < 100 || cc.power_iters < 100 || cc.power_inner_iters < 100)
    throw ConfigError("[compare] bootstrap iteration counts must be >= 100");

  c.seeds.data = r.seed("data");
  c.seeds.split = r.seed("split");
  c.seeds.model = r.seed("model");
  c.seeds.search = r.seed("search");
  c.seeds.evaluate = r.seed("evaluate");
  c.seeds.compare = r.seed("compare");
  if (c.seeds.search) c.search.seed = *c.seeds.search;
  if (c.seeds.compare) cc.seed = *c.seeds.compare;

  if (auto v = r.raw("output", "dir")) c.out_dir = resolve(base_dir, *v);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    auto c = parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    c.source_path = path;
    return c;
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void override_seeds(ExperimentConfig& c, std::uint64_t seed) {
  c.seeds.data = derive_seed(seed, 0);
  c.seeds.split = derive_seed(seed, 1);
  c.seeds.model = derive_seed(seed, 2);
  c.seeds.search = derive_seed(seed, 3);
  c.seeds.evaluate = derive_seed(seed, 4);
  c.seeds.compare = derive_seed(seed, 5);
  c.search.seed = *c.seeds.search;
  c.compare.seed = *c.seeds.compare;
}

void check_paths(const ExperimentConfig& c) {
  if (!c.synthetic) {
    if (!std::filesystem::is_directory(c.recordings_dir))
      throw ConfigError("recordings directory not found: " + c.recordings_dir.string());
    if (!std::filesystem::exists(c.annotations))
      throw ConfigError("annotation file not found: " + c.annotations.string());
  }
}

LoadedData load_data(const ExperimentConfig& c) {
  check_paths(c);
  LoadedData out;
  std::vector<SymptomAnnotation> annotations;
  if (c.synthetic) {
    auto data = synth_generate(c.synth, c.seeds.require(c.seeds.data, "data"));
    for (auto& r : data.recordings) out.recordings.push_back(std::make_shared<const SensorRecording>(std::move(r)));
    annotations = std::move(data.annotations);
  } else {
    for (auto& r : read_recording_dir(c.recordings_dir)) {
      if (r.device != c.device) continue;
      out.recordings.push_back(std::make_shared<const SensorRecording>(resample(r, kTargetRate)));
    }
    if (out.recordings.empty())
      throw DataError("no " + std::string(to_string(c.device)) + " recordings in " + c.recordings_dir.string());
    annotations = read_annotations_csv(c.annotations);
  }
  std::vector<SymptomAnnotation> task;
  for (const auto& a : annotations)
    if (a.symptom == c.symptom) task.push_back(a);
  out.segments = annotate_segments(out.recordings, task, c.class_map);
  if (out.segments.empty()) throw DataError("no labeled " + std::string(to_string(c.symptom)) + " segments");
  out.n_classes = c.class_map.n_classes(c.symptom);
  return out;
}

}  // namespace pdmotion
