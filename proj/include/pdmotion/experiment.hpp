#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdmotion/dataset.hpp"
#include "pdmotion/inception.hpp"
#include "pdmotion/metrics.hpp"
#include "pdmotion/models.hpp"
#include "pdmotion/stats.hpp"

namespace pdmotion {

/// Random-search distributions. n_filters is drawn as 2^e with e uniform on
/// [min_filters_exp, max_filters_exp].
struct SearchSpace {
  double window_min = 3.0, window_max = 30.0;
  int filter_len_min = 8, filter_len_max = 256;
  int filters_exp_min = 1, filters_exp_max = 7;
  int depth_min = 1, depth_max = 12;
  bool residual = true;
  int bottleneck_channels = 32;
  int n_branches = 3;

  void validate() const;
  InceptionHyperparams sample(Rng& rng) const;
};

struct FoldScore {
  double mean_ap = 0.0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over folds
};

Summary summarize(std::span<const double> values);

struct Trial {
  int index = 0;
  InceptionHyperparams hyperparams;
  std::vector<FoldScore> folds;
  Summary mean_ap, accuracy, balanced_accuracy;
  int epochs = 0;
};

/// Labeled segments of one symptom task.
struct TaskData {
  std::vector<Segment> segments;
  int n_classes = 0;
};

struct SearchConfig {
  int trials = 60;
  int k = 5;
  int epochs = 600;
  std::size_t batch_size = 64;
  double train_overlap = 0.5;
  double validation_overlap = 0.8;
  std::uint64_t seed = 0;
};

/// Samples `trials` configurations (discrete parts never repeat), scores one
/// network per patient-disjoint fold, and returns trials ranked by mean
/// validation mean AP (ties: lower trial index first).
std::vector<Trial> random_search(const SearchSpace& space, const TaskData& data, const SearchConfig& config);

/// Draws the hyperparameters random_search would evaluate.
std::vector<InceptionHyperparams> draw_trials(const SearchSpace& space, int trials, std::uint64_t seed);

/// Ranks trials by mean AP, ties broken by trial index.
void rank_trials(std::vector<Trial>& trials);

std::string search_csv(std::span<const Trial> ranked);
nlohmann::json to_json(const Trial& t);

struct ScoreSample {
  std::string model;
  std::string metric;
  std::vector<double> scores;
};

nlohmann::json to_json(const ScoreSample& s);
ScoreSample score_sample_from_json(const nlohmann::json& doc);

struct FinalRunConfig {
  int repetitions = 10;
  std::vector<std::uint64_t> seeds;  // one per repetition
  double train_overlap = 0.5;
  double test_overlap = 0.8;
};

struct FinalRuns {
  ScoreSample mean_ap, balanced_accuracy, accuracy;
  std::vector<ScoreReport> reports;
};

/// Throws DataError when a patient appears in both sets.
void check_disjoint(std::span<const Window> train, std::span<const Window> test);

/// Retrains the model once per seed on `train` and scores it on `test`.
FinalRuns final_runs(const ModelSpec& spec, std::span<const Segment> train, std::span<const Segment> test,
                     int n_classes, const FinalRunConfig& config, const std::string& model_id = {});

struct CompareConfig {
  double alpha = 0.05;
  int comparisons = 0;  // Bonferroni m; 0 counts the ordered pairs evaluated
  int bootstrap_iters = 1000;
  std::uint64_t seed = 0;
  std::optional<double> uplift;  // power is only computed when given
  int power_iters = 5000;
  int power_inner_iters = 200;
  double min_power = 0.8;
};

struct PairComparison {
  std::string a, b;
  AsoResult result;
  std::optional<double> power;  // uplift power over sample b
  bool insufficient_power = false;
};

struct ComparisonMatrix {
  std::vector<std::string> models;
  std::string metric;
  int comparisons = 0;
  double alpha = 0.05;
  double corrected_alpha = 0.05;
  std::vector<PairComparison> pairs;  // every ordered pair, a != b

  const PairComparison& at(const std::string& a, const std::string& b) const;
};

ComparisonMatrix compare_all(std::span<const ScoreSample> samples, const CompareConfig& config);

nlohmann::json to_json(const ComparisonMatrix& m);
/// Plain-text matrix of epsilon_min values; dominant cells are starred.
std::string render_table(const ComparisonMatrix& m);

}  // namespace pdmotion
