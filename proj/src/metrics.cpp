#include "pdmotion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "pdmotion/common.hpp"

namespace pdmotion {

PrCurve pr_curve(std::span<const double> scores, std::span<const int> binary_labels) {
  if (scores.size() != binary_labels.size()) throw DataError("scores and labels differ in length");
  const auto total_pos = std::count_if(binary_labels.begin(), binary_labels.end(), [](int l) { return l != 0; });
  if (total_pos == 0) throw DataError("undefined AP");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PrCurve curve;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      tp += binary_labels[order[i]] != 0 ? 1 : 0;
      ++seen;
      ++i;
    }
    curve.push_back({thr, static_cast<double>(tp) / static_cast<double>(seen),
                     static_cast<double>(tp) / static_cast<double>(total_pos)});
  }
  return curve;
}

double average_precision(std::span<const double> scores, std::span<const int> binary_labels) {
  const auto curve = pr_curve(scores, binary_labels);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const auto& p : curve) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

MeanAp mean_ap(const RowMatrix& scores, std::span<const int> labels) {
  if (static_cast<std::size_t>(scores.rows()) != labels.size())
    throw DataError("score rows and labels differ in length");
  MeanAp out;
  const auto n_classes = static_cast<std::size_t>(scores.cols());
  out.per_class.resize(n_classes);
  std::vector<double> column(labels.size());
  std::vector<int> binary(labels.size());
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    bool any = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      column[i] = scores(static_cast<long>(i), static_cast<long>(c));
      binary[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
      any = any || binary[i];
    }
    if (!any) {
      warn("class " + std::to_string(c) + " absent from evaluation labels; excluded from mean AP");
      continue;
    }
    out.per_class[c] = average_precision(column, binary);
    sum += *out.per_class[c];
    ++present;
  }
  if (present == 0) throw DataError("undefined AP");
  out.mean = sum / present;
  return out;
}

double accuracy(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.empty() || labels.size() != predictions.size())
    throw DataError("accuracy needs equal-length, non-empty inputs");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += labels[i] == predictions[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double balanced_accuracy(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.empty() || labels.size() != predictions.size())
    throw DataError("balanced accuracy needs equal-length, non-empty inputs");
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // label -> (hits, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [hit, total] = per_class[labels[i]];
    ++total;
    hit += labels[i] == predictions[i] ? 1 : 0;
  }
  double sum = 0.0;
  for (const auto& [cls, ht] : per_class) sum += static_cast<double>(ht.first) / static_cast<double>(ht.second);
  return sum / static_cast<double>(per_class.size());
}

RcBaseline rc_baseline(std::span<const double> class_prevalences) {
  // Absent classes are skipped, as in mean_ap and balanced_accuracy.
  double sum = 0.0, n = 0.0;
  for (double p : class_prevalences) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("class prevalence outside [0, 1]");
    if (p > 0.0) {
      sum += p;
      n += 1.0;
    }
  }
  if (n == 0.0) throw DataError("rc_baseline needs at least one present class");
  return {sum / n, 1.0 / n};
}

namespace {

std::vector<double> mid_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("spearman_rho needs equal lengths >= 2");
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("undefined correlation");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<int> argmax_rows(const RowMatrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (long i = 0; i < scores.rows(); ++i) {
    long best = 0;
    scores.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

ScoreReport score_report(const RowMatrix& scores, std::span<const int> labels) {
  ScoreReport r;
  const auto m = mean_ap(scores, labels);
  r.per_class_ap = m.per_class;
  r.mean_ap = m.mean;
  const auto pred = argmax_rows(scores);
  r.accuracy = accuracy(labels, pred);
  r.balanced_accuracy = balanced_accuracy(labels, pred);
  r.n_windows = labels.size();
  r.prevalences.assign(static_cast<std::size_t>(scores.cols()), 0.0);
  for (int l : labels)
    if (l >= 0 && l < scores.cols()) r.prevalences[static_cast<std::size_t>(l)] += 1.0;
  for (double& p : r.prevalences) p /= static_cast<double>(labels.size());
  return r;
}

nlohmann::json to_json(const ScoreReport& report) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& ap : report.per_class_ap) per_class.push_back(ap ? nlohmann::json(*ap) : nlohmann::json());
  return {
      {"format", "pdmotion.score_report"},
      {"version", 1},
      {"per_class_ap", per_class},
      {"mean_ap", report.mean_ap},
      {"accuracy", report.accuracy},
      {"balanced_accuracy", report.balanced_accuracy},
      {"n_windows", report.n_windows},
      {"prevalences", report.prevalences},
  };
}

ScoreReport score_report_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "pdmotion.score_report") throw DataError("not a score report document");
  ScoreReport r;
  for (const auto& v : doc.at("per_class_ap"))
    r.per_class_ap.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  r.mean_ap = doc.at("mean_ap").get<double>();
  r.accuracy = doc.at("accuracy").get<double>();
  r.balanced_accuracy = doc.at("balanced_accuracy").get<double>();
  r.n_windows = doc.at("n_windows").get<std::size_t>();
  r.prevalences = doc.at("prevalences").get<std::vector<double>>();
  return r;
}

}  // namespace pdmotion
