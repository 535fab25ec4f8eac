#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "pdmotion/matrix.hpp"

namespace pdmotion {

/// Per-column z-scoring fitted on training rows. Scales are floored at 1e-8.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const RowMatrix& X);
  void apply(RowMatrix& X) const;
  RowMatrix transform(const RowMatrix& X) const;
};

struct RidgeModel {
  Eigen::MatrixXd weights;    // classes x features
  Eigen::VectorXd intercept;  // per class
  double lambda = 1.0;
  std::vector<int> classes;

  long n_features() const { return weights.cols(); }
};

enum class RidgeSolver { Auto, Primal, Dual };

struct RidgeOptions {
  RidgeSolver solver = RidgeSolver::Auto;
  /// When > 0, score columns cover classes 0..n_classes-1 even if some are
  /// absent from the training labels. Otherwise the sorted labels present.
  int n_classes = 0;
};

/// One-vs-rest +/-1 targets; minimizes |XW - Y|^2 + lambda |W|^2 with the
/// intercept left unpenalized by centering X and Y.
RidgeModel ridge_fit(const RowMatrix& X, std::span<const int> labels, double lambda,
                     const RidgeOptions& options = {});

struct RidgeCvResult {
  double best_lambda = 0.0;
  std::vector<double> mean_scores;  // mean validation balanced accuracy per grid value
  RidgeModel model;
};

/// Picks the lambda with the best mean validation balanced accuracy (ties go to
/// the larger lambda), then refits on all rows. `fold_of_row[i]` names the
/// validation fold of row i.
RidgeCvResult ridge_cv(const RowMatrix& X, std::span<const int> labels, std::span<const double> lambda_grid,
                       std::span<const int> fold_of_row, const RidgeOptions& options = {});

/// Convenience overload: rows are dealt round-robin into k folds per class.
RidgeCvResult ridge_cv(const RowMatrix& X, std::span<const int> labels, std::span<const double> lambda_grid,
                       int k, const RidgeOptions& options = {});

std::vector<int> stratified_row_folds(std::span<const int> labels, int k);

/// 10 values log-spaced over [1e-3, 1e3].
std::vector<double> default_lambda_grid();

/// Affine scores X W^T + intercept, rows x classes.
RowMatrix decision_scores(const RidgeModel& model, const RowMatrix& X);

/// Class labels (model.classes) of the row-wise argmax.
std::vector<int> predict(const RidgeModel& model, const RowMatrix& X);

/// Equivalent model on raw features for one fitted on standardized features.
RidgeModel absorb_standardizer(const RidgeModel& model, const Standardizer& standardizer);

nlohmann::json to_json(const Standardizer& s);
Standardizer standardizer_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RidgeModel& model);
RidgeModel ridge_model_from_json(const nlohmann::json& doc);

}  // namespace pdmotion
