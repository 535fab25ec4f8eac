#pragma once

#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdmotion/matrix.hpp"

namespace pdmotion {

/// One threshold group of a precision-recall sweep.
struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Points ordered by descending threshold; equal scores share one point.
using PrCurve = std::vector<PrPoint>;

PrCurve pr_curve(std::span<const double> scores, std::span<const int> binary_labels);

/// Step-wise sum of (R_n - R_{n-1}) * P_n over descending unique thresholds.
/// Throws DataError("undefined AP") without positives.
double average_precision(std::span<const double> scores, std::span<const int> binary_labels);

struct MeanAp {
  std::vector<std::optional<double>> per_class;  // empty for classes absent from labels
  double mean = 0.0;
};

/// One-vs-rest AP per score column. Classes absent from `labels` are skipped
/// with a warning and excluded from the mean.
MeanAp mean_ap(const RowMatrix& scores, std::span<const int> labels);

double accuracy(std::span<const int> labels, std::span<const int> predictions);

/// Unweighted mean of per-class recall over the classes present in `labels`.
double balanced_accuracy(std::span<const int> labels, std::span<const int> predictions);

struct RcBaseline {
  double mean_ap = 0.0;
  double balanced_accuracy = 0.0;
};

/// Chance-level scores for the given class prevalences; classes with zero
/// prevalence are ignored.
RcBaseline rc_baseline(std::span<const double> class_prevalences);

/// Pearson correlation of mid-ranks. Throws DataError on zero rank variance.
double spearman_rho(std::span<const double> x, std::span<const double> y);

std::vector<int> argmax_rows(const RowMatrix& scores);

struct ScoreReport {
  std::vector<std::optional<double>> per_class_ap;
  double mean_ap = 0.0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  std::size_t n_windows = 0;
  std::vector<double> prevalences;
};

/// Scores a rows x classes matrix of class scores (probabilities or decision values).
ScoreReport score_report(const RowMatrix& scores, std::span<const int> labels);

nlohmann::json to_json(const ScoreReport& report);
ScoreReport score_report_from_json(const nlohmann::json& doc);

}  // namespace pdmotion
