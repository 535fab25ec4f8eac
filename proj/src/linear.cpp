#include "pdmotion/linear.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pdmotion/common.hpp"
#include "pdmotion/metrics.hpp"

namespace pdmotion {

Standardizer Standardizer::fit(const RowMatrix& X) {
  if (X.rows() == 0) throw DataError("cannot standardize an empty matrix");
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  for (long j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().mean();
    s.scale(j) = std::max(std::sqrt(var), 1e-8);
  }
  return s;
}

void Standardizer::apply(RowMatrix& X) const {
  if (X.cols() != mean.size()) throw DataError("standardizer feature count mismatch");
  X.rowwise() -= mean.transpose();
  X.array().rowwise() /= scale.transpose().array();
}

RowMatrix Standardizer::transform(const RowMatrix& X) const {
  RowMatrix out = X;
  apply(out);
  return out;
}

namespace {

std::vector<int> resolve_classes(std::span<const int> labels, const RidgeOptions& options) {
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DataError("degenerate labels");
  if (options.n_classes > 0) {
    for (int l : present)
      if (l < 0 || l >= options.n_classes) throw DataError("label out of class range");
    std::vector<int> all(static_cast<std::size_t>(options.n_classes));
    for (int c = 0; c < options.n_classes; ++c) all[static_cast<std::size_t>(c)] = c;
    return all;
  }
  return {present.begin(), present.end()};
}

Eigen::MatrixXd targets(std::span<const int> labels, const std::vector<int>& classes) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(static_cast<long>(labels.size()), static_cast<long>(classes.size()), -1.0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t c = 0; c < classes.size(); ++c)
      if (labels[i] == classes[c]) Y(static_cast<long>(i), static_cast<long>(c)) = 1.0;
  return Y;
}

Eigen::MatrixXd spd_solve(Eigen::MatrixXd A, const Eigen::MatrixXd& B) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt.solve(B);
  return A.ldlt().solve(B);
}

void check_inputs(const RowMatrix& X, std::span<const int> labels, double lambda) {
  if (X.rows() < 2) throw DataError("ridge needs at least 2 rows");
  if (static_cast<std::size_t>(X.rows()) != labels.size()) throw DataError("feature rows and labels differ in length");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!X.allFinite()) throw DataError("non-finite features");
}

// Double-centered Gram matrix restricted to rows `a` x `b`, centered with
// the mean of the rows in `ref`.
struct CenteredGram {
  const Eigen::MatrixXd& G;
  std::vector<long> ref;
  Eigen::VectorXd row_mean;  // mean over ref columns of G, for every row
  double grand = 0.0;

  CenteredGram(const Eigen::MatrixXd& gram, std::vector<long> reference) : G(gram), ref(std::move(reference)) {
    row_mean = Eigen::VectorXd::Zero(G.rows());
    for (long r : ref) row_mean += G.col(r);
    row_mean /= static_cast<double>(ref.size());
    for (long r : ref) grand += row_mean(r);
    grand /= static_cast<double>(ref.size());
  }

  Eigen::MatrixXd block(const std::vector<long>& a, const std::vector<long>& b) const {
    Eigen::MatrixXd K(static_cast<long>(a.size()), static_cast<long>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        K(static_cast<long>(i), static_cast<long>(j)) = G(a[i], b[j]) - row_mean(a[i]) - row_mean(b[j]) + grand;
    return K;
  }
};

}  // namespace

RidgeModel ridge_fit(const RowMatrix& X, std::span<const int> labels, double lambda, const RidgeOptions& options) {
  check_inputs(X, labels, lambda);
  RidgeModel model;
  model.lambda = lambda;
  model.classes = resolve_classes(labels, options);

  const Eigen::MatrixXd Y = targets(labels, model.classes);
  const Eigen::VectorXd y_mean = Y.colwise().mean().transpose();
  const Eigen::MatrixXd Yc = Y.rowwise() - y_mean.transpose();
  const Eigen::VectorXd mu = X.colwise().mean().transpose();
  const long n = X.rows();
  const long p = X.cols();

  RidgeSolver solver = options.solver;
  if (solver == RidgeSolver::Auto) solver = p <= n ? RidgeSolver::Primal : RidgeSolver::Dual;

  if (solver == RidgeSolver::Primal) {
    const Eigen::MatrixXd Xc = X.rowwise() - mu.transpose();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    A.selfadjointView<Eigen::Lower>().rankUpdate(Xc.transpose());
    A = A.selfadjointView<Eigen::Lower>();
    A.diagonal().array() += lambda;
    model.weights = spd_solve(std::move(A), Xc.transpose() * Yc).transpose();
  } else {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    G.selfadjointView<Eigen::Lower>().rankUpdate(X);
    G = G.selfadjointView<Eigen::Lower>();
    std::vector<long> all(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    CenteredGram cg(G, all);
    Eigen::MatrixXd K = cg.block(all, all);
    K.diagonal().array() += lambda;
    const Eigen::MatrixXd alpha = spd_solve(std::move(K), Yc);
    // W = Xc^T alpha, expanded so X is never copied.
    model.weights = alpha.transpose() * X;
    model.weights -= alpha.colwise().sum().transpose() * mu.transpose();
  }
  model.intercept = y_mean - model.weights * mu;
  if (!model.weights.allFinite() || !model.intercept.allFinite())
    throw DataError("ridge solve produced non-finite weights");
  return model;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(10);
  for (int i = 0; i < 10; ++i) grid[static_cast<std::size_t>(i)] = std::pow(10.0, -3.0 + 6.0 * i / 9.0);
  return grid;
}

std::vector<int> stratified_row_folds(std::span<const int> labels, int k) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  std::map<int, int> counter;
  std::vector<int> folds(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) folds[i] = counter[labels[i]]++ % k;
  return folds;
}

RidgeCvResult ridge_cv(const RowMatrix& X, std::span<const int> labels, std::span<const double> lambda_grid,
                       std::span<const int> fold_of_row, const RidgeOptions& options) {
  if (lambda_grid.empty()) throw ConfigError("lambda grid must not be empty");
  for (double l : lambda_grid)
    if (!(l > 0.0)) throw ConfigError("lambda grid values must be positive");
  if (fold_of_row.size() != labels.size()) throw DataError("fold assignment and labels differ in length");
  check_inputs(X, labels, lambda_grid[0]);
  const std::set<int> fold_ids(fold_of_row.begin(), fold_of_row.end());
  if (fold_ids.size() < 2) throw ConfigError("ridge_cv needs at least 2 folds");

  const auto classes = resolve_classes(labels, options);
  const Eigen::MatrixXd Y = targets(labels, classes);

  const long n = X.rows();
  const long p = X.cols();
  Eigen::MatrixXd G;
  const bool dual = options.solver == RidgeSolver::Dual || (options.solver == RidgeSolver::Auto && p > n);
  if (dual) {
    G = Eigen::MatrixXd::Zero(n, n);
    G.selfadjointView<Eigen::Lower>().rankUpdate(X);
    G = G.selfadjointView<Eigen::Lower>();
  }

  std::vector<double> score_sum(lambda_grid.size(), 0.0);
  int used_folds = 0;
  for (int f : fold_ids) {
    std::vector<long> tr, va;
    for (long i = 0; i < n; ++i) (fold_of_row[static_cast<std::size_t>(i)] == f ? va : tr).push_back(i);
    if (tr.size() < 2 || va.empty()) continue;

    Eigen::MatrixXd Ytr(static_cast<long>(tr.size()), Y.cols());
    for (std::size_t i = 0; i < tr.size(); ++i) Ytr.row(static_cast<long>(i)) = Y.row(tr[i]);
    const Eigen::VectorXd y_mean = Ytr.colwise().mean().transpose();
    const Eigen::MatrixXd Yc = Ytr.rowwise() - y_mean.transpose();
    std::vector<int> va_labels;
    for (long i : va) va_labels.push_back(labels[static_cast<std::size_t>(i)]);

    // Validation scores for lambda: cross * Q diag(1/(ev+lambda)) QtY + y_mean.
    Eigen::MatrixXd cross, Q, QtY;
    Eigen::VectorXd ev;
    if (dual) {
      CenteredGram cg(G, tr);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cg.block(tr, tr));
      Q = eig.eigenvectors();
      ev = eig.eigenvalues().cwiseMax(0.0);
      QtY = Q.transpose() * Yc;
      cross = cg.block(va, tr) * Q;
    } else {
      RowMatrix Xtr(static_cast<long>(tr.size()), p), Xva(static_cast<long>(va.size()), p);
      for (std::size_t i = 0; i < tr.size(); ++i) Xtr.row(static_cast<long>(i)) = X.row(tr[i]);
      for (std::size_t i = 0; i < va.size(); ++i) Xva.row(static_cast<long>(i)) = X.row(va[i]);
      const Eigen::RowVectorXd mu = Xtr.colwise().mean();
      Xtr.rowwise() -= mu;
      Xva.rowwise() -= mu;
      Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p, p);
      C.selfadjointView<Eigen::Lower>().rankUpdate(Xtr.transpose());
      C = C.selfadjointView<Eigen::Lower>();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
      Q = eig.eigenvectors();
      ev = eig.eigenvalues().cwiseMax(0.0);
      QtY = Q.transpose() * (Xtr.transpose() * Yc);
      cross = Xva * Q;
    }

    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
      const Eigen::VectorXd inv = (ev.array() + lambda_grid[g]).inverse();
      RowMatrix scores = cross * (inv.asDiagonal() * QtY);
      scores.rowwise() += y_mean.transpose();
      auto pred = argmax_rows(scores);
      for (int& c : pred) c = classes[static_cast<std::size_t>(c)];
      score_sum[g] += balanced_accuracy(va_labels, pred);
    }
    ++used_folds;
  }
  if (used_folds == 0) throw DataError("no usable cross-validation fold");

  RidgeCvResult result;
  result.mean_scores.resize(lambda_grid.size());
  std::size_t best = 0;
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    result.mean_scores[g] = score_sum[g] / used_folds;
    const double d = result.mean_scores[g] - result.mean_scores[best];
    if (d > 1e-12 || (std::abs(d) <= 1e-12 && lambda_grid[g] > lambda_grid[best])) best = g;
  }
  result.best_lambda = lambda_grid[best];
  result.model = ridge_fit(X, labels, result.best_lambda, options);
  return result;
}

RidgeCvResult ridge_cv(const RowMatrix& X, std::span<const int> labels, std::span<const double> lambda_grid, int k,
                       const RidgeOptions& options) {
  const auto folds = stratified_row_folds(labels, k);
  return ridge_cv(X, labels, lambda_grid, folds, options);
}

RowMatrix decision_scores(const RidgeModel& model, const RowMatrix& X) {
  if (X.cols() != model.n_features())
    throw DataError("feature count " + std::to_string(X.cols()) + " does not match model (" +
                    std::to_string(model.n_features()) + ")");
  RowMatrix out = X * model.weights.transpose();
  out.rowwise() += model.intercept.transpose();
  return out;
}

std::vector<int> predict(const RidgeModel& model, const RowMatrix& X) {
  auto idx = argmax_rows(decision_scores(model, X));
  for (int& c : idx) c = model.classes[static_cast<std::size_t>(c)];
  return idx;
}

RidgeModel absorb_standardizer(const RidgeModel& model, const Standardizer& s) {
  if (s.mean.size() != model.n_features()) throw DataError("standardizer feature count mismatch");
  RidgeModel out = model;
  out.weights = model.weights.array().rowwise() / s.scale.transpose().array();
  out.intercept = model.intercept - out.weights * s.mean;
  return out;
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

}  // namespace

nlohmann::json to_json(const Standardizer& s) {
  return {{"mean", to_vec(s.mean)}, {"scale", to_vec(s.scale)}};
}

Standardizer standardizer_from_json(const nlohmann::json& doc) {
  Standardizer s;
  s.mean = to_eigen(doc.at("mean").get<std::vector<double>>());
  s.scale = to_eigen(doc.at("scale").get<std::vector<double>>());
  if (s.mean.size() != s.scale.size()) throw DataError("standardizer arrays differ in length");
  return s;
}

nlohmann::json to_json(const RidgeModel& model) {
  // Row-major flattening of the classes x features weight matrix.
  std::vector<double> w(static_cast<std::size_t>(model.weights.size()));
  for (long c = 0; c < model.weights.rows(); ++c)
    for (long j = 0; j < model.weights.cols(); ++j)
      w[static_cast<std::size_t>(c * model.weights.cols() + j)] = model.weights(c, j);
  return {
      {"format", "pdmotion.ridge"},
      {"version", 1},
      {"lambda", model.lambda},
      {"classes", model.classes},
      {"n_features", model.weights.cols()},
      {"intercept", to_vec(model.intercept)},
      {"weights", w},
  };
}

RidgeModel ridge_model_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pdmotion.ridge" || doc.value("version", 0) != 1)
    throw DataError("not a version-1 ridge model document");
  RidgeModel m;
  m.lambda = doc.at("lambda").get<double>();
  m.classes = doc.at("classes").get<std::vector<int>>();
  m.intercept = to_eigen(doc.at("intercept").get<std::vector<double>>());
  const auto p = doc.at("n_features").get<long>();
  const auto w = doc.at("weights").get<std::vector<double>>();
  const auto c = static_cast<long>(m.classes.size());
  if (static_cast<long>(w.size()) != c * p || m.intercept.size() != c) throw DataError("ridge model shape mismatch");
  m.weights.resize(c, p);
  for (long i = 0; i < c; ++i)
    for (long j = 0; j < p; ++j) m.weights(i, j) = w[static_cast<std::size_t>(i * p + j)];
  return m;
}

}  // namespace pdmotion
