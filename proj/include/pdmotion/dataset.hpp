#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdmotion {

inline constexpr double kTargetRate = 50.0;
inline constexpr std::size_t kAxes = 3;

enum class Device { GENEActiv, ShimmerLeft, ShimmerRight };
enum class Symptom { Tremor, Bradykinesia, Dyskinesia };

std::string_view to_string(Device d);
std::string_view to_string(Symptom s);
Device parse_device(std::string_view text);
Symptom parse_symptom(std::string_view text);

/// Triaxial acceleration (g) from one wrist sensor.
struct SensorRecording {
  std::string patient_id;
  Device device = Device::GENEActiv;
  double sample_rate = kTargetRate;
  std::array<std::vector<double>, kAxes> channels;
  double start_time = 0.0;

  std::size_t size() const { return channels[0].size(); }
  /// Seconds between first and last sample.
  double duration() const;
  /// Throws DataError on unequal/empty channels, bad rate or non-finite samples.
  void validate() const;
};

using RecordingPtr = std::shared_ptr<const SensorRecording>;

struct SymptomAnnotation {
  std::string patient_id;
  Device device = Device::GENEActiv;
  Symptom symptom = Symptom::Tremor;
  std::optional<int> label;  // empty = missing annotation
  double start = 0.0;        // seconds, same clock as the recording timestamps
  double end = 0.0;

  void validate() const;
};

/// Maps raw annotation labels to class indices per symptom. A mapped value of
/// -1 drops that label. The default merges tremor severities 3 and 4.
class ClassMap {
 public:
  static ClassMap defaults();

  void set(Symptom symptom, std::vector<int> label_to_class);
  std::optional<int> map(Symptom symptom, int label) const;
  int n_classes(Symptom symptom) const;
  const std::vector<int>& table(Symptom symptom) const;

 private:
  std::array<std::vector<int>, 3> tables_;
};

/// A labeled, contiguous slice [begin, end) of one recording.
struct Segment {
  RecordingPtr recording;
  std::size_t begin = 0;
  std::size_t end = 0;
  Symptom symptom = Symptom::Tremor;
  int class_label = 0;
  std::string patient_id;
  std::size_t id = 0;

  std::size_t length() const { return end - begin; }
  double seconds() const;
};

/// Fixed-length classifier input; values are channel-major (channels x length).
struct Window {
  std::vector<double> values;
  std::size_t channels = kAxes;
  std::size_t length = 0;
  int class_label = 0;
  std::string patient_id;
  std::size_t segment_id = 0;
  std::size_t offset = 0;

  std::span<const double> channel(std::size_t c) const {
    return {values.data() + c * length, length};
  }
};

struct WindowingConfig {
  double window_seconds = 30.0;
  double overlap_fraction = 0.5;
  double sample_rate = kTargetRate;

  std::size_t window_len() const;
  std::size_t hop() const;
  void validate() const;
};

/// Number of windows of length w with hop h that fit in L samples.
std::size_t window_count(std::size_t L, std::size_t w, std::size_t h);

SensorRecording resample(const SensorRecording& recording, double target_rate);

std::vector<Segment> annotate_segments(std::span<const RecordingPtr> recordings,
                                       std::span<const SymptomAnnotation> annotations,
                                       const ClassMap& class_map);

std::vector<Window> make_windows(const Segment& segment, const WindowingConfig& config);

/// Windows of all segments ordered by (patient_id, segment id, offset).
std::vector<Window> make_windows(std::span<const Segment> segments, const WindowingConfig& config);

struct SplitPlan {
  int k = 0;
  std::map<std::string, int> fold_of;

  int fold(const std::string& patient_id) const;
  std::vector<std::string> patients_in(int fold) const;
};

/// Per-patient class mass used by the stratifier (window or sample counts).
struct GroupCounts {
  std::string patient_id;
  std::vector<double> class_counts;
};

SplitPlan grouped_stratified_folds(std::span<const GroupCounts> groups, int k, std::uint64_t seed);
SplitPlan grouped_stratified_folds(std::span<const Segment> segments, int n_classes, int k,
                                   std::uint64_t seed);
SplitPlan grouped_stratified_folds(std::span<const Window> windows, int n_classes, int k,
                                   std::uint64_t seed);

/// L1 distance between the class proportions of `fold` and of all groups.
double fold_deviation(std::span<const GroupCounts> groups, const SplitPlan& plan, int fold);

struct ClassTally {
  std::size_t count = 0;
  double hours = 0.0;
};

std::map<int, ClassTally> class_distribution(std::span<const Window> windows, double window_seconds);
std::map<int, ClassTally> class_distribution(std::span<const Segment> segments);

template <typename Item>
std::vector<Item> select_patients(std::span<const Item> items, const SplitPlan& plan,
                                  std::span<const int> folds) {
  std::vector<Item> out;
  for (const auto& item : items) {
    int f = plan.fold(item.patient_id);
    for (int g : folds) {
      if (f == g) {
        out.push_back(item);
        break;
      }
    }
  }
  return out;
}

}  // namespace pdmotion
