// pdmotion command-line tool: synth, train, evaluate, search, compare, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdmotion/config.hpp"
#include "pdmotion/csv_io.hpp"
#include "pdmotion/experiment.hpp"
#include "pdmotion/json_io.hpp"
#include "pdmotion/metrics.hpp"
#include "pdmotion/models.hpp"

namespace fs = std::filesystem;
using namespace pdmotion;

namespace {

constexpr int kExitData = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  // compare only
  std::vector<std::string> samples;
  std::optional<double> alpha;
  std::optional<int> comparisons;
  std::optional<double> uplift;
  std::string metric;
};

ExperimentConfig setup(const Options& o) {
  ExperimentConfig c = o.config.empty() ? parse_config("") : load_config(o.config);
  if (o.seed) override_seeds(c, *o.seed);
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.threads < 0) throw ConfigError("--threads must be >= 0");
  set_thread_count(o.threads);
  fs::create_directories(c.out_dir);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

struct Split {
  std::vector<Segment> train, test;
};

Split split_segments(const ExperimentConfig& c, const LoadedData& d) {
  const auto plan = grouped_stratified_folds(std::span<const Segment>(d.segments), d.n_classes, c.k,
                                             c.seeds.require(c.seeds.split, "split"));
  std::vector<int> train_folds;
  for (int f = 0; f < c.k; ++f)
    if (f != c.test_fold) train_folds.push_back(f);
  const std::vector<int> test_folds{c.test_fold};
  return {select_patients(std::span<const Segment>(d.segments), plan, train_folds),
          select_patients(std::span<const Segment>(d.segments), plan, test_folds)};
}

nlohmann::json patients_json(std::span<const Segment> segs) {
  std::set<std::string> ids;
  for (const auto& s : segs) ids.insert(s.patient_id);
  return std::vector<std::string>(ids.begin(), ids.end());
}

nlohmann::json distribution_json(const std::map<int, ClassTally>& dist) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [cls, t] : dist) out[std::to_string(cls)] = {{"count", t.count}, {"hours", t.hours}};
  return out;
}

int cmd_synth(const Options& o) {
  auto c = setup(o);
  const auto data = synth_generate(c.synth, c.seeds.require(c.seeds.data, "data"));
  const fs::path dir = c.out_dir / "recordings";
  fs::create_directories(dir);
  for (const auto& r : data.recordings) write_recording_csv(dir / recording_file_name(r), r);
  write_annotations_csv(c.out_dir / "annotations.csv", data.annotations);
  std::cout << "wrote " << data.recordings.size() << " recordings and " << data.annotations.size()
            << " annotations to " << c.out_dir.string() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  auto c = setup(o);
  const auto data = load_data(c);
  const auto split = split_segments(c, data);
  const double ws = c.model.effective_window_seconds();
  const auto train_w = make_windows(split.train, {ws, 0.5});
  const auto test_w = make_windows(split.test, {ws, 0.8});
  if (train_w.empty() || test_w.empty()) throw DataError("segments are shorter than the window length");
  check_disjoint(train_w, test_w);

  auto model = make_classifier(c.model);
  model->fit(train_w, data.n_classes, c.seeds.require(c.seeds.model, "model"));
  const auto report = score_report(model->scores(test_w), window_labels(test_w));
  const auto rc = rc_baseline(report.prevalences);

  write_json_file(c.out_dir / "model.json", model->to_json());
  const nlohmann::json doc = {{"format", "pdmotion.train_report"},
                              {"version", 1},
                              {"symptom", to_string(c.symptom)},
                              {"model", to_json(c.model)},
                              {"train_patients", patients_json(split.train)},
                              {"test_patients", patients_json(split.test)},
                              {"train_windows", train_w.size()},
                              {"test_windows", test_w.size()},
                              {"scores", to_json(report)},
                              {"rc_baseline", {{"mean_ap", rc.mean_ap}, {"balanced_accuracy", rc.balanced_accuracy}}}};
  write_json_file(c.out_dir / "report.json", doc);
  std::printf("mean AP %.4f  balanced accuracy %.4f  accuracy %.4f  (RC %.4f / %.4f)\n", report.mean_ap,
              report.balanced_accuracy, report.accuracy, rc.mean_ap, rc.balanced_accuracy);
  return 0;
}

int cmd_evaluate(const Options& o) {
  auto c = setup(o);
  const auto data = load_data(c);
  const auto split = split_segments(c, data);
  FinalRunConfig fc;
  fc.repetitions = c.repetitions;
  const auto master = c.seeds.require(c.seeds.evaluate, "evaluate");
  for (int r = 0; r < c.repetitions; ++r) fc.seeds.push_back(derive_seed(master, static_cast<std::uint64_t>(r)));
  const std::string id(to_string(c.model.kind));
  const auto runs = final_runs(c.model, split.train, split.test, data.n_classes, fc, id);
  for (const auto* s : {&runs.mean_ap, &runs.balanced_accuracy, &runs.accuracy})
    write_json_file(c.out_dir / ("samples_" + id + "_" + s->metric + ".json"), to_json(*s));
  const auto ap = summarize(runs.mean_ap.scores), ba = summarize(runs.balanced_accuracy.scores);
  std::printf("%s over %d runs: mean AP %.4f +/- %.4f, balanced accuracy %.4f +/- %.4f\n", id.c_str(),
              c.repetitions, ap.mean, ap.std, ba.mean, ba.std);
  return 0;
}

int cmd_search(const Options& o) {
  auto c = setup(o);
  c.search.seed = c.seeds.require(c.seeds.search, "search");
  const auto data = load_data(c);
  TaskData task{data.segments, data.n_classes};
  const auto trials = random_search(c.space, task, c.search);
  write_text(c.out_dir / "search.csv", search_csv(trials));
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trials) arr.push_back(to_json(t));
  write_json_file(c.out_dir / "search.json", {{"format", "pdmotion.search"}, {"version", 1}, {"trials", arr}});
  const auto& best = trials.front();
  std::printf("best trial %d: window %.2f s, filter_len %d, n_filters %d, depth %d, mean AP %.4f +/- %.4f\n",
              best.index, best.hyperparams.window_seconds, best.hyperparams.filter_len, best.hyperparams.n_filters,
              best.hyperparams.depth, best.mean_ap.mean, best.mean_ap.std);
  return 0;
}

int cmd_compare(const Options& o) {
  auto c = setup(o);
  c.compare.seed = c.seeds.require(c.seeds.compare, "compare");
  if (o.alpha) c.compare.alpha = *o.alpha;
  if (o.comparisons) c.compare.comparisons = *o.comparisons;
  if (o.uplift) c.compare.uplift = *o.uplift;
  if (!o.metric.empty()) c.metric = o.metric;
  std::vector<fs::path> files = c.sample_files;
  for (const auto& s : o.samples) files.emplace_back(s);
  if (files.size() < 2) throw ConfigError("compare needs at least 2 score sample files");
  std::vector<ScoreSample> samples;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ConfigError("score sample file not found: " + f.string());
    auto s = score_sample_from_json(read_json_file(f));
    if (s.metric != c.metric) throw DataError(f.string() + ": metric '" + s.metric + "' but comparing " + c.metric);
    samples.push_back(std::move(s));
  }
  const auto m = compare_all(samples, c.compare);
  write_json_file(c.out_dir / "comparison.json", to_json(m));
  const auto table = render_table(m);
  write_text(c.out_dir / "comparison.txt", table);
  std::cout << table;
  return 0;
}

int cmd_report(const Options& o) {
  auto c = setup(o);
  const auto data = load_data(c);
  const double ws = c.model.effective_window_seconds();
  const auto windows = make_windows(data.segments, {ws, 0.5});
  const auto seg_dist = class_distribution(std::span<const Segment>(data.segments));
  const auto win_dist = class_distribution(std::span<const Window>(windows), ws);
  std::vector<double> prevalence(static_cast<std::size_t>(data.n_classes), 0.0);
  for (const auto& [cls, t] : win_dist)
    if (cls >= 0 && cls < data.n_classes) prevalence[static_cast<std::size_t>(cls)] = static_cast<double>(t.count);
  for (double& p : prevalence) p /= std::max<double>(1.0, static_cast<double>(windows.size()));
  const auto rc = rc_baseline(prevalence);
  const nlohmann::json doc = {{"format", "pdmotion.data_report"},
                              {"version", 1},
                              {"symptom", to_string(c.symptom)},
                              {"n_classes", data.n_classes},
                              {"patients", patients_json(data.segments)},
                              {"segments", distribution_json(seg_dist)},
                              {"window_seconds", ws},
                              {"windows", distribution_json(win_dist)},
                              {"prevalences", prevalence},
                              {"rc_baseline", {{"mean_ap", rc.mean_ap}, {"balanced_accuracy", rc.balanced_accuracy}}}};
  write_json_file(c.out_dir / "data_report.json", doc);
  std::cout << "class  segments  hours    windows\n";
  for (const auto& [cls, t] : seg_dist) {
    const auto it = win_dist.find(cls);
    std::printf("%-6d %-9zu %-8.3f %zu\n", cls, t.count, t.hours, it == win_dist.end() ? std::size_t{0} : it->second.count);
  }
  std::printf("RC baseline: mean AP %.4f, balanced accuracy %.4f\n", rc.mean_ap, rc.balanced_accuracy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wearable-sensor symptom classifiers: training, evaluation, search and comparison"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (INI)");
    sub->add_option("--out", o.out, "Output directory (overrides [output] dir)");
    sub->add_option("--seed", o.seed, "Derive every named seed from this value");
    sub->add_option("--threads", o.threads, "Worker threads (0 = default)");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"synth", "Write a synthetic recording set and annotation file", cmd_synth},
      {"train", "Train one model and score it on the held-out fold", cmd_train},
      {"evaluate", "Repeated final training runs; writes score samples", cmd_evaluate},
      {"search", "Random hyperparameter search for the Inception network", cmd_search},
      {"compare", "Pairwise ASO comparison of score samples", cmd_compare},
      {"report", "Class distribution and random-classifier baseline", cmd_report},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> subs;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    common(sub);
    if (std::string(cmd.name) == "compare") {
      sub->add_option("samples", o.samples, "Score sample JSON files");
      sub->add_option("--alpha", o.alpha, "Family-wise significance level");
      sub->add_option("--comparisons", o.comparisons, "Comparison count for the Bonferroni correction");
      sub->add_option("--uplift", o.uplift, "Relative uplift for the power analysis");
      sub->add_option("--metric", o.metric, "Metric to compare (default mean_ap)");
    }
    subs.emplace_back(sub, cmd.run);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    for (const auto& [sub, run] : subs)
      if (sub->parsed()) return run(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nn::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
