#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pdmotion/dataset.hpp"
#include "pdmotion/experiment.hpp"
#include "pdmotion/models.hpp"
#include "pdmotion/synth.hpp"

namespace pdmotion {

/// Named seeds; each command requires the ones it uses.
struct Seeds {
  std::optional<std::uint64_t> data, split, model, search, evaluate, compare;

  /// Throws ConfigError("missing seed '<name>' ...") when absent.
  std::uint64_t require(const std::optional<std::uint64_t>& seed, const char* name) const;
};

struct ExperimentConfig {
  std::filesystem::path source_path;  // config file, for diagnostics

  // [data]
  bool synthetic = true;
  std::filesystem::path recordings_dir;
  std::filesystem::path annotations;
  Device device = Device::GENEActiv;
  Symptom symptom = Symptom::Tremor;
  SynthSpec synth;  // [synth]
  ClassMap class_map = ClassMap::defaults();

  ModelSpec model;  // [model]

  // [split]
  int k = 5;
  int test_fold = 0;

  SearchSpace space;    // [search]
  SearchConfig search;  // seed is filled from [seeds]

  int repetitions = 10;  // [evaluate]

  // [compare]
  CompareConfig compare;
  std::string metric = "mean_ap";
  std::vector<std::filesystem::path> sample_files;

  Seeds seeds;
  std::filesystem::path out_dir = "out";  // [output]
};

/// Parses the INI text; relative paths resolve against `base_dir`. Unknown
/// sections or keys and malformed values raise ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces every named seed with one derived from `seed`.
void override_seeds(ExperimentConfig& config, std::uint64_t seed);

/// Checks that referenced input paths exist (ConfigError naming the path).
void check_paths(const ExperimentConfig& config);

/// Recordings (resampled to 50 Hz) and labeled segments for the configured symptom.
struct LoadedData {
  std::vector<RecordingPtr> recordings;
  std::vector<Segment> segments;
  int n_classes = 0;
};

LoadedData load_data(const ExperimentConfig& config);

}  // namespace pdmotion
