#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>

#include "pdmotion/dataset.hpp"
#include "pdmotion/features.hpp"
#include "pdmotion/synth.hpp"
#include "support.hpp"

using namespace pdmotion;

TEST_CASE("resample: 512 samples at 51.2 Hz become 501 samples at 50 Hz") {
  SensorRecording r;
  r.sample_rate = 51.2;
  for (auto& c : r.channels) c.assign(512, 1.0);
  const auto out = resample(r, 50.0);
  CHECK(out.size() == 501);
  CHECK(out.sample_rate == 50.0);
}

TEST_CASE("resample: identity rate copies bit for bit") {
  SensorRecording r;
  r.sample_rate = 50.0;
  Rng rng(3);
  std::normal_distribution<double> n;
  for (auto& c : r.channels)
    for (int i = 0; i < 97; ++i) c.push_back(n(rng));
  const auto out = resample(r, 50.0);
  for (std::size_t c = 0; c < kAxes; ++c) CHECK(out.channels[c] == r.channels[c]);
}

TEST_CASE("resample: affine and constant signals are reproduced") {
  SensorRecording r;
  r.sample_rate = 51.2;
  for (int i = 0; i < 300; ++i) {
    r.channels[0].push_back(i);
    r.channels[1].push_back(0.25 - 0.5 * i);
    r.channels[2].push_back(-1.0);
  }
  const auto out = resample(r, 50.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double pos = static_cast<double>(i) * 51.2 / 50.0;  // index in source samples
    CHECK(std::abs(out.channels[0][i] - pos) < 1e-12);
    CHECK(std::abs(out.channels[1][i] - (0.25 - 0.5 * pos)) < 1e-12);
    CHECK(out.channels[2][i] == -1.0);
  }
}

TEST_CASE("resample: empty recording is rejected") {
  SensorRecording r;
  CHECK_THROWS_WITH_AS(resample(r, 50.0), "empty signal", DataError);
}

TEST_CASE("windowing: worked examples") {
  CHECK(window_count(500, 150, 75) == 5);
  CHECK(window_count(500, 150, 30) == 12);
  CHECK(window_count(100, 150, 30) == 0);
  WindowingConfig c{3.0, 0.5};
  CHECK(c.window_len() == 150);
  CHECK(c.hop() == 75);
  c.overlap_fraction = 0.8;
  CHECK(c.hop() == 30);
  CHECK_THROWS_AS((WindowingConfig{2.0, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((WindowingConfig{10.0, 1.0}.validate()), ConfigError);
}

TEST_CASE("windowing: count formula agrees with start-offset enumeration") {
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> d(1, 400);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t L = d(rng), w = d(rng), h = d(rng);
    std::size_t brute = 0;
    for (std::size_t s = 0; s + w <= L; s += h) ++brute;
    REQUIRE(window_count(L, w, h) == brute);
  }
}

TEST_CASE("make_windows: windows stay inside their segment and keep its label") {
  auto rec = std::make_shared<SensorRecording>();
  rec->patient_id = "A";
  for (auto& c : rec->channels)
    for (int i = 0; i < 2000; ++i) c.push_back(i);
  std::vector<Segment> segs = {testing::segment(rec, 0, 500, 1, 0), testing::segment(rec, 600, 1100, 2, 1),
                               testing::segment(rec, 1200, 1300, 0, 2)};
  const auto win = make_windows(segs, {3.0, 0.5});
  CHECK(win.size() == 10);  // 5 + 5 + 0
  for (const auto& w : win) {
    const auto& s = segs[w.segment_id];
    CHECK(w.class_label == s.class_label);
    CHECK(w.offset + w.length <= s.length());
    // channel values are sample indices, so the first value locates the window
    CHECK(w.channel(0)[0] == static_cast<double>(s.begin + w.offset));
  }
  for (std::size_t i = 1; i < 5; ++i) CHECK(win[i].offset > win[i - 1].offset);
}

TEST_CASE("annotate_segments: bookkeeping and removal rules") {
  std::vector<RecordingPtr> recs = {testing::flat_recording("A", 3000)};  // 60 s at 50 Hz
  auto ann = [](double s, double e, std::optional<int> label) {
    SymptomAnnotation a;
    a.patient_id = "A";
    a.start = s;
    a.end = e;
    a.label = label;
    return a;
  };
  SUBCASE("10-20 s gives 500 samples") {
    std::vector<SymptomAnnotation> a = {ann(10, 20, 2)};
    const auto segs = annotate_segments(recs, a, ClassMap::defaults());
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].length() == 500);
    CHECK(segs[0].class_label == 2);
  }
  SUBCASE("missing labels and signal-free intervals are dropped") {
    std::vector<SymptomAnnotation> a = {ann(10, 20, std::nullopt), ann(100, 120, 1)};
    CHECK(annotate_segments(recs, a, ClassMap::defaults()).empty());
  }
  SUBCASE("two disjoint annotations, tremor 4 merged into class 3") {
    std::vector<SymptomAnnotation> a = {ann(0, 5, 4), ann(30, 70, 1)};
    const auto segs = annotate_segments(recs, a, ClassMap::defaults());
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].class_label == 3);
    CHECK(segs[1].end == 3000);  // clamped
    for (const auto& s : segs) CHECK(s.patient_id == "A");
  }
}

TEST_CASE("class map: defaults and validation") {
  const auto m = ClassMap::defaults();
  CHECK(m.n_classes(Symptom::Tremor) == 4);
  CHECK(m.n_classes(Symptom::Dyskinesia) == 2);
  CHECK(*m.map(Symptom::Tremor, 4) == 3);
  ClassMap c = m;
  c.set(Symptom::Tremor, {0, 1, 2, -1, -1});
  CHECK_FALSE(c.map(Symptom::Tremor, 3).has_value());
  CHECK_THROWS_AS(c.set(Symptom::Tremor, {0, 2}), ConfigError);
}

TEST_CASE("grouped folds: invariants") {
  std::vector<GroupCounts> g;
  for (int i = 0; i < 10; ++i) g.push_back({"P" + std::to_string(i), {double(5 + i), double(10 - i)}});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto plan = grouped_stratified_folds(g, 5, seed);
    CHECK(plan.fold_of.size() == 10);
    for (int f = 0; f < 5; ++f) CHECK_FALSE(plan.patients_in(f).empty());
  }
  CHECK_THROWS_WITH_AS(grouped_stratified_folds(std::span(g).first(3), 5, 0), "insufficient groups", DataError);
}

TEST_CASE("grouped folds: single class still yields k folds") {
  std::vector<GroupCounts> g;
  for (int i = 0; i < 7; ++i) g.push_back({"P" + std::to_string(i), {double(i + 1)}});
  const auto plan = grouped_stratified_folds(g, 3, 1);
  for (int f = 0; f < 3; ++f) CHECK_FALSE(plan.patients_in(f).empty());
}

TEST_CASE("grouped folds: balanced two-class patients stay near the global proportion") {
  // 10 patients with equal class mass; each fold proportion must be within 0.15.
  std::vector<GroupCounts> g;
  for (int i = 0; i < 10; ++i) g.push_back({"P" + std::to_string(i), {double(20 + 3 * i), double(20 + 3 * i)}});
  const auto plan = grouped_stratified_folds(g, 5, 42);
  for (int f = 0; f < 5; ++f) {
    double a = 0, b = 0;
    for (const auto& x : g)
      if (plan.fold(x.patient_id) == f) {
        a += x.class_counts[0];
        b += x.class_counts[1];
      }
    CHECK(std::abs(a / (a + b) - 0.5) <= 0.15);
  }
}

TEST_CASE("grouped folds: patients spread across folds on varied instances") {
  Rng rng(3);
  std::uniform_int_distribution<int> count(5, 40);
  for (int t = 0; t < 40; ++t) {
    const int k = 2 + t % 4, classes = 2 + t % 3, n = 3 * k + t % 7;
    std::vector<GroupCounts> g;
    for (int i = 0; i < n; ++i) {
      GroupCounts x{"P" + std::to_string(i), {}};
      for (int c = 0; c < classes; ++c) x.class_counts.push_back(count(rng));
      g.push_back(std::move(x));
    }
    const auto plan = grouped_stratified_folds(g, k, static_cast<std::uint64_t>(t));
    for (int f = 0; f < k; ++f) {
      CHECK(plan.patients_in(f).size() >= 2);
      CHECK(fold_deviation(g, plan, f) <= 0.3);
    }
  }
}

TEST_CASE("grouped folds: deterministic given seed") {
  std::vector<GroupCounts> g;
  for (int i = 0; i < 12; ++i) g.push_back({"P" + std::to_string(i), {double(i % 3), 1.0, double(i % 2)}});
  CHECK(grouped_stratified_folds(g, 4, 9).fold_of == grouped_stratified_folds(g, 4, 9).fold_of);
}

TEST_CASE("class_distribution: hours and conservation") {
  std::vector<Window> w;
  CHECK(class_distribution(std::span<const Window>(w), 30.0).empty());
  for (int i = 0; i < 120; ++i) w.push_back(testing::window({0, 0, 0}, 3, 0));
  auto d = class_distribution(std::span<const Window>(w), 30.0);
  CHECK(d[0].count == 120);
  CHECK(d[0].hours == doctest::Approx(1.0));
  for (int i = 0; i < 30; ++i) w.push_back(testing::window({0, 0, 0}, 3, i % 3));
  d = class_distribution(std::span<const Window>(w), 30.0);
  std::size_t total = 0;
  for (const auto& [c, t] : d) total += t.count;
  CHECK(total == w.size());
}

TEST_CASE("synth: determinism and bookkeeping") {
  SynthSpec s;
  s.n_patients = 2;
  s.segment_seconds = 20;
  const auto a = synth_generate(s, 5), b = synth_generate(s, 5);
  CHECK(a.annotations.size() == 6);
  CHECK(a.recordings.size() == 2);
  CHECK(a.recordings[0].channels[0] == b.recordings[0].channels[0]);
  CHECK(a.recordings[1].channels[2] == b.recordings[1].channels[2]);
}

namespace {

// Mean periodogram power inside [lo, hi) Hz and over the rest of (0.5, 10) Hz,
// summed over the three axes.
std::pair<double, double> band_power(const Segment& seg, double lo, double hi) {
  const auto& r = *seg.recording;
  const std::size_t n = seg.length();
  const double df = r.sample_rate / static_cast<double>(n);
  double in = 0, out = 0;
  int nin = 0, nout = 0;
  for (const auto& ch : r.channels) {
    std::vector<double> x(ch.begin() + static_cast<long>(seg.begin), ch.begin() + static_cast<long>(seg.end));
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : x) v -= mean;
    const auto p = periodogram(x);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double f = static_cast<double>(k + 1) * df;
      if (f >= lo && f < hi) {
        in += p[k];
        ++nin;
      } else if (f > 0.5 && f < 10.0) {
        out += p[k];
        ++nout;
      }
    }
  }
  return {in / nin, out / nout};
}

}  // namespace

TEST_CASE("synth: tremor bursts live in the 4-6 Hz band") {
  SynthSpec s;
  s.n_patients = 3;
  s.labels = {0, 3};
  const auto data = synth_generate(s, 17);
  std::vector<RecordingPtr> recs;
  for (const auto& r : data.recordings) recs.push_back(std::make_shared<const SensorRecording>(r));
  const auto segs = annotate_segments(recs, data.annotations, ClassMap::defaults());
  REQUIRE(!segs.empty());
  for (const auto& seg : segs) {
    const auto [in, out] = band_power(seg, 4.0, 6.0);
    CAPTURE(seg.class_label);
    if (seg.class_label == 0)
      CHECK(in < out);  // no oscillation: the band sits below the broadband floor
    else
      CHECK(in > 2.0 * out);
  }
}
