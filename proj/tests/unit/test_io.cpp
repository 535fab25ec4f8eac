#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pdmotion/config.hpp"
#include "pdmotion/csv_io.hpp"
#include "pdmotion/json_io.hpp"
#include "pdmotion/models.hpp"
#include "pdmotion/synth.hpp"

using namespace pdmotion;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pdmotion_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kMinimalConfig = R"(
[data]
source = synth
symptom = tremor

[synth]
patients = 4
labels = 0, 1, 2

[model]
kind = rocket
window_seconds = 10
n_kernels = 200

[seeds]
data = 1
split = 2
model = 3
)";

}  // namespace

TEST_CASE("config: parsing, defaults and seeds") {
  const auto c = parse_config(kMinimalConfig);
  CHECK(c.synthetic);
  CHECK(c.synth.n_patients == 4);
  CHECK(c.synth.labels == std::vector<int>{0, 1, 2});
  CHECK(c.model.kind == ModelKind::Rocket);
  CHECK(c.model.rocket.n_kernels == 200);
  CHECK(c.k == 5);
  CHECK(c.seeds.require(c.seeds.model, "model") == 3);
  CHECK_THROWS_WITH_AS(c.seeds.require(c.seeds.compare, "compare"), doctest::Contains("missing seed 'compare'"),
                       ConfigError);

  auto o = c;
  override_seeds(o, 7);
  CHECK(*o.seeds.model == derive_seed(7, 2));
  CHECK(o.seeds.compare.has_value());
}

TEST_CASE("config: errors") {
  CHECK_THROWS_AS(parse_config("[model]\nkind = svm\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nosuch]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[split]\nk = two\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[split]\nk = 3\ntest_fold = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nkind = inception\nn_filters = 12\n"), ConfigError);
  auto c = parse_config("[data]\nsource = files\nrecordings = /no/such/dir\nannotations = /no/such.csv\n");
  CHECK_THROWS_WITH_AS(check_paths(c), doctest::Contains("/no/such/dir"), ConfigError);
  CHECK_THROWS_AS(load_config("/no/such/config.ini"), ConfigError);
}

TEST_CASE("config: inception window follows the model window") {
  const auto c = parse_config("[model]\nkind = inception\nwindow_seconds = 12\nepochs = 3\n");
  CHECK(c.model.inception.hyperparams.window_seconds == 12.0);
  CHECK(c.model.inception.epochs == 3);
  CHECK(default_model_spec(ModelKind::InceptionDefault).inception.epochs == 1500);
}

TEST_CASE("csv: recordings and annotations round trip, plain and gzip") {
  const auto dir = scratch("csv");
  SynthSpec s;
  s.n_patients = 2;
  s.segments_per_patient = 1;
  s.segment_seconds = 4;
  const auto data = synth_generate(s, 1);
  for (const char* ext : {".csv", ".csv.gz"}) {
    const auto path = dir / (std::string("rec") + ext);
    write_recording_csv(path, data.recordings[0]);
    const auto back = read_recording_csv(path, "P00", Device::GENEActiv);
    REQUIRE(back.size() == data.recordings[0].size());
    CHECK(back.sample_rate == doctest::Approx(50.0));
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back.channels[1][i] == data.recordings[0].channels[1][i]);
  }
  write_annotations_csv(dir / "ann.csv", data.annotations);
  const auto ann = read_annotations_csv(dir / "ann.csv");
  REQUIRE(ann.size() == data.annotations.size());
  CHECK(ann[1].patient_id == data.annotations[1].patient_id);
  CHECK(ann[1].label == data.annotations[1].label);

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "timestamp,x,y,z\n0,0,0,0\n0.02,0,abc,0\n";
  }
  CHECK_THROWS_WITH_AS(read_recording_csv(dir / "bad.csv", "P", Device::GENEActiv), doctest::Contains(":3:"),
                       DataError);
  fs::remove_all(dir);
}

TEST_CASE("json: deterministic text with full precision") {
  nlohmann::json doc = {{"b", 0.1}, {"a", {1.0, 2.5, 1.0 / 3.0}}, {"c", {{"z", 1}, {"y", nullptr}}}};
  const auto text = dump_json(doc);
  CHECK(text.find("\"a\"") < text.find("\"b\""));
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  CHECK(text.find("0.33333333333333331") != std::string::npos);
  CHECK(nlohmann::json::parse(text) == doc);
  CHECK(dump_json(nlohmann::json::parse(text)) == text);

  const auto dir = scratch("json");
  write_json_file(dir / "x.json", doc);
  CHECK(read_json_file(dir / "x.json") == doc);
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{ nope";
  }
  CHECK_THROWS_AS(read_json_file(dir / "bad.json"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("models: fitted classifiers survive serialization") {
  SynthSpec s;
  s.n_patients = 4;
  s.labels = {0, 2};
  s.segment_seconds = 24;
  auto data = synth_generate(s, 2);
  std::vector<RecordingPtr> recs;
  for (auto& r : data.recordings) recs.push_back(std::make_shared<const SensorRecording>(std::move(r)));
  auto segs = annotate_segments(recs, data.annotations, ClassMap::defaults());
  for (auto& seg : segs) seg.class_label = seg.class_label ? 1 : 0;

  for (auto kind : {ModelKind::Rocket, ModelKind::WaveletMlp, ModelKind::Inception}) {
    auto spec = default_model_spec(kind);
    spec.window_seconds = 12.0;
    spec.rocket.n_kernels = 50;
    spec.rocket.cv_folds = 2;
    spec.mlp.epochs = 3;
    spec.inception.hyperparams.window_seconds = 4.0;
    spec.inception.hyperparams.n_filters = 2;
    spec.inception.hyperparams.depth = 1;
    spec.inception.hyperparams.bottleneck_channels = 2;
    spec.inception.epochs = 1;
    spec.inception.ensemble_size = 2;
    const auto windows = make_windows(segs, {spec.effective_window_seconds(), 0.5});
    auto model = make_classifier(spec);
    model->fit(windows, 2, 11);
    const auto scores = model->scores(windows);
    CHECK(scores.rows() == static_cast<long>(windows.size()));
    CHECK(scores.cols() == 2);
    const auto loaded = load_classifier(nlohmann::json::parse(dump_json(model->to_json())));
    CAPTURE(to_string(kind));
    CHECK(loaded->kind() == kind);
    CHECK(loaded->scores(windows) == scores);
  }
  CHECK(parse_model_kind("inception-default") == ModelKind::InceptionDefault);
  CHECK_THROWS_AS(parse_model_kind("svm"), ConfigError);
}
