#include "pdmotion/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <omp.h>

#include "pdmotion/common.hpp"

namespace pdmotion {

std::string_view to_string(Device d) {
  switch (d) {
    case Device::GENEActiv: return "GENEActiv";
    case Device::ShimmerLeft: return "ShimmerLeft";
    case Device::ShimmerRight: return "ShimmerRight";
  }
  return "?";
}

std::string_view to_string(Symptom s) {
  switch (s) {
    case Symptom::Tremor: return "tremor";
    case Symptom::Bradykinesia: return "bradykinesia";
    case Symptom::Dyskinesia: return "dyskinesia";
  }
  return "?";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

Device parse_device(std::string_view text) {
  const auto t = lower(text);
  if (t == "geneactiv") return Device::GENEActiv;
  if (t == "shimmerleft") return Device::ShimmerLeft;
  if (t == "shimmerright") return Device::ShimmerRight;
  throw DataError("unknown device '" + std::string(text) + "'");
}

Symptom parse_symptom(std::string_view text) {
  const auto t = lower(text);
  if (t == "tremor") return Symptom::Tremor;
  if (t == "bradykinesia") return Symptom::Bradykinesia;
  if (t == "dyskinesia") return Symptom::Dyskinesia;
  throw DataError("unknown symptom '" + std::string(text) + "'");
}

double SensorRecording::duration() const {
  return size() == 0 ? 0.0 : static_cast<double>(size() - 1) / sample_rate;
}

void SensorRecording::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw DataError("recording '" + patient_id + "': sample rate must be positive");
  if (channels[0].empty()) throw DataError("empty signal");
  for (const auto& ch : channels) {
    if (ch.size() != channels[0].size())
      throw DataError("recording '" + patient_id + "': channels differ in length");
    for (double v : ch)
      if (!std::isfinite(v)) throw DataError("recording '" + patient_id + "': non-finite sample");
  }
}

void SymptomAnnotation::validate() const {
  if (!(end > start)) throw DataError("annotation for '" + patient_id + "': end must exceed start");
  if (!label) return;
  const int hi = symptom == Symptom::Tremor ? 4 : 1;
  if (*label < 0 || *label > hi)
    throw DataError("annotation for '" + patient_id + "': label " + std::to_string(*label) +
                    " out of range for " + std::string(to_string(symptom)));
}

ClassMap ClassMap::defaults() {
  ClassMap m;
  m.tables_[static_cast<int>(Symptom::Tremor)] = {0, 1, 2, 3, 3};
  m.tables_[static_cast<int>(Symptom::Bradykinesia)] = {0, 1};
  m.tables_[static_cast<int>(Symptom::Dyskinesia)] = {0, 1};
  return m;
}

void ClassMap::set(Symptom symptom, std::vector<int> label_to_class) {
  int max_class = -1;
  for (int c : label_to_class) {
    if (c < -1) throw ConfigError("class map entries must be >= -1");
    max_class = std::max(max_class, c);
  }
  if (max_class < 0) throw ConfigError("class map drops every label");
  for (int c = 0; c <= max_class; ++c)
    if (std::find(label_to_class.begin(), label_to_class.end(), c) == label_to_class.end())
      throw ConfigError("class map leaves class " + std::to_string(c) + " without a label");
  tables_[static_cast<int>(symptom)] = std::move(label_to_class);
}

std::optional<int> ClassMap::map(Symptom symptom, int label) const {
  const auto& t = tables_[static_cast<int>(symptom)];
  if (label < 0 || label >= static_cast<int>(t.size()) || t[label] < 0) return std::nullopt;
  return t[label];
}

int ClassMap::n_classes(Symptom symptom) const {
  const auto& t = tables_[static_cast<int>(symptom)];
  return t.empty() ? 0 : *std::max_element(t.begin(), t.end()) + 1;
}

const std::vector<int>& ClassMap::table(Symptom symptom) const {
  return tables_[static_cast<int>(symptom)];
}

double Segment::seconds() const {
  return recording ? static_cast<double>(length()) / recording->sample_rate : 0.0;
}

std::size_t WindowingConfig::window_len() const {
  return static_cast<std::size_t>(std::lround(window_seconds * sample_rate));
}

std::size_t WindowingConfig::hop() const {
  const auto h = std::lround(static_cast<double>(window_len()) * (1.0 - overlap_fraction));
  return static_cast<std::size_t>(std::max<long>(1, h));
}

void WindowingConfig::validate() const {
  if (!(window_seconds >= 3.0 && window_seconds <= 30.0))
    throw ConfigError("window_seconds must lie in [3, 30]");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw ConfigError("overlap_fraction must lie in [0, 1)");
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
}

std::size_t window_count(std::size_t L, std::size_t w, std::size_t h) {
  if (w == 0 || h == 0 || L < w) return 0;
  return (L - w) / h + 1;
}

SensorRecording resample(const SensorRecording& recording, double target_rate) {
  if (recording.size() == 0) throw DataError("empty signal");
  if (!(recording.sample_rate > 0.0) || !(target_rate > 0.0))
    throw DataError("sample rates must be positive");

  SensorRecording out = recording;
  if (target_rate == recording.sample_rate) return out;

  const std::size_t n = recording.size();
  const double span = static_cast<double>(n) / recording.sample_rate;
  const auto m = static_cast<std::size_t>(std::floor(span * target_rate + 1e-9)) + 1;
  out.sample_rate = target_rate;

  for (std::size_t c = 0; c < kAxes; ++c) {
    const auto& src = recording.channels[c];
    auto& dst = out.channels[c];
    dst.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double pos = static_cast<double>(i) * recording.sample_rate / target_rate;
      if (n == 1) {
        dst[i] = src[0];
        continue;
      }
      // Positions past the last sample extrapolate along the final segment.
      auto lo = static_cast<std::size_t>(std::floor(pos));
      lo = std::min(lo, n - 2);
      const double frac = pos - static_cast<double>(lo);
      dst[i] = src[lo] + frac * (src[lo + 1] - src[lo]);
    }
  }
  return out;
}

std::vector<Segment> annotate_segments(std::span<const RecordingPtr> recordings,
                                       std::span<const SymptomAnnotation> annotations,
                                       const ClassMap& class_map) {
  std::vector<Segment> out;
  for (const auto& ann : annotations) {
    if (!ann.label) continue;
    const auto cls = class_map.map(ann.symptom, *ann.label);
    if (!cls) continue;

    bool matched = false;
    for (const auto& rec : recordings) {
      if (rec->patient_id != ann.patient_id || rec->device != ann.device) continue;
      const auto n = static_cast<long>(rec->size());
      auto to_index = [&](double t) {
        return std::clamp(std::lround((t - rec->start_time) * rec->sample_rate), 0L, n);
      };
      const long b = to_index(ann.start);
      const long e = to_index(ann.end);
      if (e <= b) continue;
      matched = true;
      Segment seg;
      seg.recording = rec;
      seg.begin = static_cast<std::size_t>(b);
      seg.end = static_cast<std::size_t>(e);
      seg.symptom = ann.symptom;
      seg.class_label = *cls;
      seg.patient_id = ann.patient_id;
      seg.id = out.size();
      out.push_back(std::move(seg));
    }
    if (!matched) {
      std::ostringstream msg;
      msg << "annotation [" << ann.start << ", " << ann.end << ") for patient '" << ann.patient_id
          << "' (" << to_string(ann.device) << ") has no overlapping signal; skipped";
      warn(msg.str());
    }
  }
  return out;
}

std::vector<Window> make_windows(const Segment& segment, const WindowingConfig& config) {
  const std::size_t w = config.window_len();
  const std::size_t h = config.hop();
  const std::size_t count = window_count(segment.length(), w, h);
  std::vector<Window> out;
  out.reserve(count);
  const auto& rec = *segment.recording;
  for (std::size_t i = 0; i < count; ++i) {
    Window win;
    win.channels = kAxes;
    win.length = w;
    win.values.resize(kAxes * w);
    win.offset = i * h;
    win.class_label = segment.class_label;
    win.patient_id = segment.patient_id;
    win.segment_id = segment.id;
    for (std::size_t c = 0; c < kAxes; ++c) {
      const auto* src = rec.channels[c].data() + segment.begin + win.offset;
      std::copy(src, src + w, win.values.begin() + static_cast<long>(c * w));
    }
    out.push_back(std::move(win));
  }
  return out;
}

std::vector<Window> make_windows(std::span<const Segment> segments, const WindowingConfig& config) {
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (segments[a].patient_id != segments[b].patient_id)
      return segments[a].patient_id < segments[b].patient_id;
    return segments[a].id < segments[b].id;
  });

  std::vector<std::vector<Window>> parts(order.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(order.size()); ++i)
    parts[i] = make_windows(segments[order[i]], config);

  std::vector<Window> out;
  for (auto& p : parts)
    for (auto& w : p) out.push_back(std::move(w));
  return out;
}

int SplitPlan::fold(const std::string& patient_id) const {
  auto it = fold_of.find(patient_id);
  return it == fold_of.end() ? -1 : it->second;
}

std::vector<std::string> SplitPlan::patients_in(int f) const {
  std::vector<std::string> out;
  for (const auto& [p, g] : fold_of)
    if (g == f) out.push_back(p);
  return out;
}

namespace {

double l1_to_global(std::span<const double> counts, std::span<const double> global_prop) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double d = 0.0;
  for (std::size_t c = 0; c < global_prop.size(); ++c) {
    const double p = total > 0.0 ? counts[c] / total : 0.0;
    d += std::abs(p - global_prop[c]);
  }
  return d;
}

}  // namespace

SplitPlan grouped_stratified_folds(std::span<const GroupCounts> groups, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (static_cast<int>(groups.size()) < k) throw DataError("insufficient groups");

  std::size_t n_classes = 0;
  for (const auto& g : groups) n_classes = std::max(n_classes, g.class_counts.size());

  std::vector<double> global(n_classes, 0.0);
  std::vector<double> totals(groups.size(), 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t c = 0; c < groups[i].class_counts.size(); ++c) {
      global[c] += groups[i].class_counts[c];
      totals[i] += groups[i].class_counts[c];
    }
  const double grand = std::accumulate(global.begin(), global.end(), 0.0);
  std::vector<double> global_prop(n_classes, 0.0);
  if (grand > 0.0)
    for (std::size_t c = 0; c < n_classes; ++c) global_prop[c] = global[c] / grand;

  // The seed only decides the order among groups of equal size.
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return totals[a] > totals[b]; });

  std::vector<std::vector<double>> fold_counts(k, std::vector<double>(n_classes, 0.0));
  std::vector<double> fold_size(k, 0.0);
  std::vector<int> fold_members(k, 0);
  SplitPlan plan;
  plan.k = k;

  // A placement is scored over all folds: the L1 distance between every
  // fold's class mass and an equal share of the mass placed so far, split by
  // the global proportions.
  double placed = 0.0;
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    const auto& g = groups[order[idx]];
    const auto remaining = static_cast<int>(order.size() - idx);
    const int empty = static_cast<int>(std::count(fold_members.begin(), fold_members.end(), 0));
    const bool must_fill = remaining <= empty;
    const double share = (placed + totals[order[idx]]) / k;

    int best = -1;
    double best_dist = 0.0;
    for (int f = 0; f < k; ++f) {
      if (must_fill && fold_members[f] != 0) continue;
      double d = 0.0;
      for (int h = 0; h < k; ++h)
        for (std::size_t c = 0; c < n_classes; ++c) {
          const double add = h == f && c < g.class_counts.size() ? g.class_counts[c] : 0.0;
          d += std::abs(fold_counts[h][c] + add - share * global_prop[c]);
        }
      const bool better = best < 0 || d < best_dist - 1e-9 * (1.0 + best_dist) ||
                          (std::abs(d - best_dist) <= 1e-9 * (1.0 + best_dist) && fold_size[f] < fold_size[best]);
      if (better) {
        best = f;
        best_dist = d;
      }
    }
    for (std::size_t c = 0; c < g.class_counts.size(); ++c) fold_counts[best][c] += g.class_counts[c];
    fold_size[best] += totals[order[idx]];
    placed += totals[order[idx]];
    ++fold_members[best];
    if (!plan.fold_of.emplace(g.patient_id, best).second)
      throw DataError("duplicate group '" + g.patient_id + "'");
  }
  return plan;
}

namespace {

template <typename Item, typename Mass>
std::vector<GroupCounts> tally_groups(std::span<const Item> items, int n_classes, Mass mass) {
  std::map<std::string, std::vector<double>> by_patient;
  for (const auto& it : items) {
    auto& v = by_patient[it.patient_id];
    v.resize(static_cast<std::size_t>(n_classes), 0.0);
    if (it.class_label < 0 || it.class_label >= n_classes)
      throw DataError("class label out of range for stratification");
    v[static_cast<std::size_t>(it.class_label)] += mass(it);
  }
  std::vector<GroupCounts> out;
  for (auto& [p, v] : by_patient) out.push_back({p, std::move(v)});
  return out;
}

}  // namespace

SplitPlan grouped_stratified_folds(std::span<const Segment> segments, int n_classes, int k,
                                   std::uint64_t seed) {
  auto groups = tally_groups(segments, n_classes,
                             [](const Segment& s) { return static_cast<double>(s.length()); });
  return grouped_stratified_folds(groups, k, seed);
}

SplitPlan grouped_stratified_folds(std::span<const Window> windows, int n_classes, int k,
                                   std::uint64_t seed) {
  auto groups = tally_groups(windows, n_classes, [](const Window&) { return 1.0; });
  return grouped_stratified_folds(groups, k, seed);
}

double fold_deviation(std::span<const GroupCounts> groups, const SplitPlan& plan, int fold) {
  std::size_t n_classes = 0;
  for (const auto& g : groups) n_classes = std::max(n_classes, g.class_counts.size());
  std::vector<double> global(n_classes, 0.0), local(n_classes, 0.0);
  for (const auto& g : groups)
    for (std::size_t c = 0; c < g.class_counts.size(); ++c) {
      global[c] += g.class_counts[c];
      if (plan.fold(g.patient_id) == fold) local[c] += g.class_counts[c];
    }
  const double grand = std::accumulate(global.begin(), global.end(), 0.0);
  std::vector<double> prop(n_classes, 0.0);
  if (grand > 0.0)
    for (std::size_t c = 0; c < n_classes; ++c) prop[c] = global[c] / grand;
  return l1_to_global(local, prop);
}

std::map<int, ClassTally> class_distribution(std::span<const Window> windows, double window_seconds) {
  std::map<int, ClassTally> out;
  for (const auto& w : windows) ++out[w.class_label].count;
  for (auto& [cls, tally] : out)
    tally.hours = static_cast<double>(tally.count) * window_seconds / 3600.0;
  return out;
}

std::map<int, ClassTally> class_distribution(std::span<const Segment> segments) {
  std::map<int, ClassTally> out;
  for (const auto& s : segments) {
    auto& t = out[s.class_label];
    ++t.count;
    t.hours += s.seconds() / 3600.0;
  }
  return out;
}

}  // namespace pdmotion
