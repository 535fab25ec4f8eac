#include "pdmotion/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <set>
#include <sstream>
#include <tuple>

namespace pdmotion {

void SearchSpace::validate() const {
  if (!(window_min >= 3.0 && window_max <= 30.0 && window_min <= window_max))
    throw ConfigError("search window range must lie within [3, 30]");
  if (filter_len_min < 8 || filter_len_max > 256 || filter_len_min > filter_len_max)
    throw ConfigError("search filter_len range must lie within [8, 256]");
  if (filters_exp_min < 1 || filters_exp_max > 7 || filters_exp_min > filters_exp_max)
    throw ConfigError("search n_filters exponent range must lie within [1, 7]");
  if (depth_min < 1 || depth_max > 12 || depth_min > depth_max)
    throw ConfigError("search depth range must lie within [1, 12]");
}

InceptionHyperparams SearchSpace::sample(Rng& rng) const {
  InceptionHyperparams hp;
  hp.window_seconds = std::uniform_real_distribution<double>(window_min, window_max)(rng);
  hp.filter_len = std::uniform_int_distribution<int>(filter_len_min, filter_len_max)(rng);
  hp.n_filters = 1 << std::uniform_int_distribution<int>(filters_exp_min, filters_exp_max)(rng);
  hp.depth = std::uniform_int_distribution<int>(depth_min, depth_max)(rng);
  hp.residual = residual;
  hp.bottleneck_channels = bottleneck_channels;
  hp.n_branches = n_branches;
  return hp;
}

Summary summarize(std::span<const double> v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

std::vector<InceptionHyperparams> draw_trials(const SearchSpace& space, int trials, std::uint64_t seed) {
  space.validate();
  if (trials < 1) throw ConfigError("trials must be >= 1");
  const long capacity = static_cast<long>(space.filter_len_max - space.filter_len_min + 1) *
                        (space.filters_exp_max - space.filters_exp_min + 1) * (space.depth_max - space.depth_min + 1);
  if (trials > capacity) throw ConfigError("search space has fewer distinct configurations than trials");
  Rng rng(derive_seed(seed, 1));
  std::set<std::tuple<int, int, int>> seen;
  std::vector<InceptionHyperparams> out;
  while (static_cast<int>(out.size()) < trials) {
    auto hp = space.sample(rng);
    // Window length may repeat; the discrete part is resampled on collision.
    if (!seen.insert({hp.filter_len, hp.n_filters, hp.depth}).second) continue;
    out.push_back(hp);
  }
  return out;
}

void rank_trials(std::vector<Trial>& trials) {
  std::sort(trials.begin(), trials.end(), [](const Trial& a, const Trial& b) {
    if (a.mean_ap.mean != b.mean_ap.mean) return a.mean_ap.mean > b.mean_ap.mean;
    return a.index < b.index;
  });
}

namespace {

std::vector<int> all_but(int k, int f) {
  std::vector<int> out;
  for (int i = 0; i < k; ++i)
    if (i != f) out.push_back(i);
  return out;
}

FoldScore fold_score(const ScoreReport& r) { return {r.mean_ap, r.accuracy, r.balanced_accuracy}; }

}  // namespace

std::vector<Trial> random_search(const SearchSpace& space, const TaskData& data, const SearchConfig& cfg) {
  if (cfg.k < 2) throw ConfigError("search k must be >= 2");
  if (cfg.epochs < 1) throw ConfigError("search epochs must be >= 1");
  if (data.n_classes < 2) throw DataError("degenerate labels: need at least 2 classes");
  const auto hps = draw_trials(space, cfg.trials, cfg.seed);
  const auto plan = grouped_stratified_folds(std::span<const Segment>(data.segments), data.n_classes, cfg.k,
                                             derive_seed(cfg.seed, 0));

  std::vector<Trial> trials(hps.size());
  std::vector<std::exception_ptr> errors(hps.size());
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < static_cast<long>(hps.size()); ++t) {
    const auto ti = static_cast<std::size_t>(t);
    try {
      Trial trial;
      trial.index = static_cast<int>(t);
      trial.hyperparams = hps[ti];
      trial.epochs = cfg.epochs;
      const auto& hp = hps[ti];
      std::vector<double> ap, acc, bacc;
      for (int f = 0; f < cfg.k; ++f) {
        const std::vector<int> val_fold{f};
        const auto train_seg = select_patients(std::span<const Segment>(data.segments), plan, all_but(cfg.k, f));
        const auto val_seg = select_patients(std::span<const Segment>(data.segments), plan, val_fold);
        const auto train_w = make_windows(train_seg, {hp.window_seconds, cfg.train_overlap});
        const auto val_w = make_windows(val_seg, {hp.window_seconds, cfg.validation_overlap});
        if (train_w.empty() || val_w.empty())
          throw DataError("fold " + std::to_string(f) + " has no windows of " + std::to_string(hp.window_seconds) +
                          " s; segments are too short");
        auto net = build_network(hp, static_cast<std::size_t>(data.n_classes), train_w[0].channels, train_w[0].length);
        // Seeds depend on the fold only, so equal hyperparameters score equally.
        net.init(derive_seed(derive_seed(cfg.seed, 2), static_cast<std::uint64_t>(f)));
        nn::TrainConfig tc;
        tc.epochs = cfg.epochs;
        tc.batch_size = cfg.batch_size;
        tc.seed = derive_seed(derive_seed(cfg.seed, 3), static_cast<std::uint64_t>(f));
        const auto y = window_labels(train_w);
        nn::train(net, windows_to_tensor(train_w), y, tc);
        const auto probs = predict_windows(net, val_w);
        const auto fs = fold_score(score_report(probs, window_labels(val_w)));
        trial.folds.push_back(fs);
        ap.push_back(fs.mean_ap);
        acc.push_back(fs.accuracy);
        bacc.push_back(fs.balanced_accuracy);
      }
      trial.mean_ap = summarize(ap);
      trial.accuracy = summarize(acc);
      trial.balanced_accuracy = summarize(bacc);
      trials[ti] = std::move(trial);
    } catch (...) {
      errors[ti] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  rank_trials(trials);
  return trials;
}

std::string search_csv(std::span<const Trial> ranked) {
  std::ostringstream out;
  out << "rank,trial,window_seconds,filter_len,n_filters,depth,epochs,mean_ap_mean,mean_ap_std,accuracy_mean,"
         "accuracy_std,balanced_accuracy_mean,balanced_accuracy_std\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  int rank = 1;
  for (const auto& t : ranked) {
    const auto& hp = t.hyperparams;
    out << rank++ << ',' << t.index << ',' << num(hp.window_seconds) << ',' << hp.filter_len << ',' << hp.n_filters
        << ',' << hp.depth << ',' << t.epochs << ',' << num(t.mean_ap.mean) << ',' << num(t.mean_ap.std) << ','
        << num(t.accuracy.mean) << ',' << num(t.accuracy.std) << ',' << num(t.balanced_accuracy.mean) << ','
        << num(t.balanced_accuracy.std) << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const Trial& t) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : t.folds)
    folds.push_back({{"mean_ap", f.mean_ap}, {"accuracy", f.accuracy}, {"balanced_accuracy", f.balanced_accuracy}});
  auto sum = [](const Summary& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  return {{"trial", t.index},
          {"hyperparams", to_json(t.hyperparams)},
          {"epochs", t.epochs},
          {"folds", folds},
          {"mean_ap", sum(t.mean_ap)},
          {"accuracy", sum(t.accuracy)},
          {"balanced_accuracy", sum(t.balanced_accuracy)}};
}

nlohmann::json to_json(const ScoreSample& s) {
  return {{"format", "pdmotion.score_sample"}, {"version", 1}, {"model", s.model}, {"metric", s.metric},
          {"scores", s.scores}};
}

ScoreSample score_sample_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("format", "") != "pdmotion.score_sample") throw DataError("not a pdmotion.score_sample document");
    ScoreSample s;
    s.model = doc.at("model").get<std::string>();
    s.metric = doc.at("metric").get<std::string>();
    s.scores = doc.at("scores").get<std::vector<double>>();
    for (double v : s.scores)
      if (!std::isfinite(v)) throw DataError("score sample '" + s.model + "' has a non-finite value");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed score sample: ") + e.what());
  }
}

void check_disjoint(std::span<const Window> train, std::span<const Window> test) {
  std::set<std::string> seen;
  for (const auto& w : train) seen.insert(w.patient_id);
  for (const auto& w : test)
    if (seen.count(w.patient_id))
      throw DataError("patient leakage: patient '" + w.patient_id + "' appears in both training and test data");
}

FinalRuns final_runs(const ModelSpec& spec, std::span<const Segment> train, std::span<const Segment> test,
                     int n_classes, const FinalRunConfig& cfg, const std::string& model_id) {
  spec.validate();
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (cfg.seeds.size() != static_cast<std::size_t>(cfg.repetitions))
    throw ConfigError("final runs need exactly one seed per repetition");
  const double ws = spec.effective_window_seconds();
  const auto train_w = make_windows(train, {ws, cfg.train_overlap});
  const auto test_w = make_windows(test, {ws, cfg.test_overlap});
  if (train_w.empty() || test_w.empty()) throw DataError("no windows fit in the training or test segments");
  check_disjoint(train_w, test_w);
  const auto y_test = window_labels(test_w);

  const std::string id = model_id.empty() ? std::string(to_string(spec.kind)) : model_id;
  FinalRuns out;
  out.mean_ap = {id, "mean_ap", {}};
  out.balanced_accuracy = {id, "balanced_accuracy", {}};
  out.accuracy = {id, "accuracy", {}};
  for (int r = 0; r < cfg.repetitions; ++r) {
    auto model = make_classifier(spec);
    model->fit(train_w, n_classes, cfg.seeds[static_cast<std::size_t>(r)]);
    auto report = score_report(model->scores(test_w), y_test);
    out.mean_ap.scores.push_back(report.mean_ap);
    out.balanced_accuracy.scores.push_back(report.balanced_accuracy);
    out.accuracy.scores.push_back(report.accuracy);
    out.reports.push_back(std::move(report));
  }
  return out;
}

const PairComparison& ComparisonMatrix::at(const std::string& a, const std::string& b) const {
  for (const auto& p : pairs)
    if (p.a == a && p.b == b) return p;
  throw DataError("no comparison " + a + " vs " + b);
}

ComparisonMatrix compare_all(std::span<const ScoreSample> samples, const CompareConfig& cfg) {
  if (samples.size() < 2) throw DataError("comparison needs at least 2 score samples");
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (s.scores.size() < 2) throw DataError("score sample '" + s.model + "' has fewer than 2 scores");
    if (!ids.insert(s.model).second) throw DataError("duplicate model id '" + s.model + "'");
    if (s.metric != samples[0].metric) throw DataError("score samples mix metrics");
  }
  ComparisonMatrix m;
  m.metric = samples[0].metric;
  for (const auto& s : samples) m.models.push_back(s.model);
  const int ordered_pairs = static_cast<int>(samples.size() * (samples.size() - 1));
  m.comparisons = cfg.comparisons > 0 ? cfg.comparisons : ordered_pairs;
  m.alpha = cfg.alpha;
  m.corrected_alpha = bonferroni(cfg.alpha, m.comparisons);

  std::vector<std::optional<double>> power(samples.size());
  if (cfg.uplift) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      PowerOptions po;
      po.alpha = m.corrected_alpha;
      po.iters = cfg.power_iters;
      po.inner_bootstrap_iters = cfg.power_inner_iters;
      po.seed = derive_seed(cfg.seed, 1000 + i);
      power[i] = bootstrap_power(samples[i].scores, *cfg.uplift, po);
    }
  }
  std::uint64_t pair_index = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (i == j) continue;
      PairComparison p;
      p.a = samples[i].model;
      p.b = samples[j].model;
      AsoOptions ao;
      ao.alpha = m.corrected_alpha;
      ao.bootstrap_iters = cfg.bootstrap_iters;
      ao.seed = derive_seed(cfg.seed, pair_index++);
      p.result = aso(samples[i].scores, samples[j].scores, ao);
      p.power = power[j];
      p.insufficient_power = p.power && *p.power < cfg.min_power;
      m.pairs.push_back(std::move(p));
    }
  return m;
}

nlohmann::json to_json(const ComparisonMatrix& m) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : m.pairs) {
    nlohmann::json j = {{"a", p.a}, {"b", p.b}, {"aso", to_json(p.result)}};
    j["power"] = p.power ? nlohmann::json(*p.power) : nlohmann::json(nullptr);
    j["insufficient_power"] = p.insufficient_power;
    if (p.insufficient_power) j["note"] = "insufficient power - no significance claim";
    pairs.push_back(std::move(j));
  }
  return {{"format", "pdmotion.comparison"},
          {"version", 1},
          {"metric", m.metric},
          {"models", m.models},
          {"comparisons", m.comparisons},
          {"alpha", m.alpha},
          {"corrected_alpha", m.corrected_alpha},
          {"pairs", pairs}};
}

std::string render_table(const ComparisonMatrix& m) {
  std::size_t width = 8;
  for (const auto& id : m.models) width = std::max(width, id.size() + 2);
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", m.corrected_alpha);
  out << "epsilon_min (row vs column, " << m.metric << "), alpha " << m.alpha << " / " << m.comparisons << " = "
      << buf << "\n";
  auto cell = [&](const std::string& s) {
    out << s;
    for (std::size_t i = s.size(); i < width; ++i) out << ' ';
  };
  cell("");
  for (const auto& id : m.models) cell(id);
  out << '\n';
  for (const auto& a : m.models) {
    cell(a);
    for (const auto& b : m.models) {
      if (a == b) {
        cell("-");
        continue;
      }
      const auto& p = m.at(a, b);
      std::snprintf(buf, sizeof buf, "%.3f%s%s", p.result.epsilon_min, p.result.dominant ? "*" : "",
                    p.insufficient_power ? "!" : "");
      cell(buf);
    }
    out << '\n';
  }
  out << "* dominant (epsilon_min < 0.2)";
  if (m.pairs.size() && std::any_of(m.pairs.begin(), m.pairs.end(), [](const auto& p) { return p.power.has_value(); }))
    out << "; ! power below threshold, no significance claim";
  out << '\n';
  return out.str();
}

}  // namespace pdmotion
