#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pdmotion/dataset.hpp"
#include "pdmotion/features.hpp"
#include "pdmotion/inception.hpp"
#include "pdmotion/linear.hpp"
#include "pdmotion/metrics.hpp"
#include "pdmotion/nnet.hpp"
#include "pdmotion/rocket.hpp"
#include "pdmotion/stats.hpp"
#include "pdmotion/synth.hpp"

namespace py = pybind11;
using namespace pdmotion;

namespace {

using Array3 = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Window> to_windows(const Array3& x) {
  if (x.ndim() != 3) throw py::value_error("expected an array of shape (n, channels, length)");
  const auto n = static_cast<std::size_t>(x.shape(0));
  const auto c = static_cast<std::size_t>(x.shape(1));
  const auto len = static_cast<std::size_t>(x.shape(2));
  std::vector<Window> out(n);
  const double* p = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i].channels = c;
    out[i].length = len;
    out[i].values.assign(p + i * c * len, p + (i + 1) * c * len);
  }
  return out;
}

py::dict synth_windows(int n_patients, std::vector<int> labels, double segment_seconds, double window_seconds,
                       double overlap, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_patients = n_patients;
  spec.labels = std::move(labels);
  spec.segment_seconds = segment_seconds;
  auto data = synth_generate(spec, seed);
  std::vector<RecordingPtr> recs;
  for (auto& r : data.recordings) recs.push_back(std::make_shared<const SensorRecording>(std::move(r)));
  const auto segs = annotate_segments(recs, data.annotations, ClassMap::defaults());
  const auto win = make_windows(segs, {window_seconds, overlap});
  if (win.empty()) throw py::value_error("no windows fit in the synthetic segments");
  const auto C = win[0].channels, T = win[0].length;
  py::array_t<double> x({win.size(), C, T});
  py::array_t<int> y(static_cast<py::ssize_t>(win.size()));
  std::vector<std::string> patients;
  auto xm = x.mutable_data();
  auto ym = y.mutable_data();
  for (std::size_t i = 0; i < win.size(); ++i) {
    std::copy(win[i].values.begin(), win[i].values.end(), xm + i * C * T);
    ym[i] = win[i].class_label;
    patients.push_back(win[i].patient_id);
  }
  py::dict d;
  d["x"] = x;
  d["y"] = y;
  d["patients"] = patients;
  return d;
}

py::dict aso_dict(const AsoResult& r) {
  py::dict d;
  d["epsilon_hat"] = r.epsilon_hat;
  d["epsilon_min"] = r.epsilon_min;
  d["sigma_hat"] = r.sigma_hat;
  d["alpha"] = r.alpha;
  d["bootstrap_iters"] = r.bootstrap_iters;
  d["dominant"] = r.dominant;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wearable accelerometer symptom classification core";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("set_thread_count", &set_thread_count, py::arg("n"));
  m.def("window_count", &window_count, py::arg("length"), py::arg("window"), py::arg("hop"));
  m.def("synth_windows", &synth_windows, py::arg("n_patients") = 12, py::arg("labels") = std::vector<int>{0, 1, 2},
        py::arg("segment_seconds") = 90.0, py::arg("window_seconds") = 30.0, py::arg("overlap") = 0.5,
        py::arg("seed") = 0, "Synthetic tremor windows: dict with x (n, 3, T), y and patients.");

  m.def(
      "rocket_transform",
      [](const Array3& x, std::size_t n_kernels, std::uint64_t seed) {
        const auto w = to_windows(x);
        if (w.empty()) throw py::value_error("no windows");
        py::gil_scoped_release release;
        return transform(w, generate_kernels(n_kernels, w[0].length, seed));
      },
      py::arg("x"), py::arg("n_kernels") = 10000, py::arg("seed") = 0,
      "Pooled (ppv, max) features per kernel and channel.");

  py::class_<RidgeModel>(m, "RidgeModel")
      .def_readonly("weights", &RidgeModel::weights)
      .def_readonly("intercept", &RidgeModel::intercept)
      .def_readonly("lam", &RidgeModel::lambda)
      .def_readonly("classes", &RidgeModel::classes)
      .def("decision_function", [](const RidgeModel& r, const RowMatrix& X) { return decision_scores(r, X); })
      .def("predict", [](const RidgeModel& r, const RowMatrix& X) { return predict(r, X); });
  m.def(
      "ridge_fit",
      [](const RowMatrix& X, std::vector<int> y, double lam) { return ridge_fit(X, y, lam); }, py::arg("x"),
      py::arg("y"), py::arg("lam"));
  m.def(
      "ridge_cv",
      [](const RowMatrix& X, std::vector<int> y, std::vector<double> grid, int k) {
        if (grid.empty()) grid = default_lambda_grid();
        return ridge_cv(X, y, grid, k).model;
      },
      py::arg("x"), py::arg("y"), py::arg("lambdas") = std::vector<double>{}, py::arg("k") = 5);

  m.def(
      "wavelet_features",
      [](const Array3& x) {
        const auto w = to_windows(x);
        return wavelet_feature_matrix(w);
      },
      py::arg("x"), "70 wavelet statistics per window.");

  m.def(
      "average_precision",
      [](std::vector<double> s, std::vector<int> y) { return average_precision(s, y); }, py::arg("scores"),
      py::arg("labels"));
  m.def(
      "mean_ap", [](const RowMatrix& s, std::vector<int> y) { return mean_ap(s, y).mean; }, py::arg("scores"),
      py::arg("labels"));
  m.def(
      "accuracy", [](std::vector<int> y, std::vector<int> p) { return accuracy(y, p); }, py::arg("labels"),
      py::arg("predictions"));
  m.def(
      "balanced_accuracy", [](std::vector<int> y, std::vector<int> p) { return balanced_accuracy(y, p); },
      py::arg("labels"), py::arg("predictions"));
  m.def(
      "rc_baseline",
      [](std::vector<double> prev) {
        const auto r = rc_baseline(prev);
        return std::make_pair(r.mean_ap, r.balanced_accuracy);
      },
      py::arg("prevalences"));
  m.def(
      "spearman_rho", [](std::vector<double> a, std::vector<double> b) { return spearman_rho(a, b); }, py::arg("x"),
      py::arg("y"));

  m.def(
      "epsilon_w2", [](std::vector<double> a, std::vector<double> b) { return epsilon_w2(a, b); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "aso",
      [](std::vector<double> a, std::vector<double> b, double alpha, int iters, std::uint64_t seed) {
        AsoResult r;
        {
          py::gil_scoped_release release;
          r = aso(a, b, {alpha, iters, seed});
        }
        return aso_dict(r);
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05, py::arg("bootstrap_iters") = 1000, py::arg("seed") = 0);
  m.def("bonferroni", &bonferroni, py::arg("alpha"), py::arg("comparisons"));
  m.def(
      "bootstrap_power",
      [](std::vector<double> s, double uplift, int iters, double alpha, int inner, std::uint64_t seed) {
        py::gil_scoped_release release;
        return bootstrap_power(s, uplift, {alpha, iters, inner, seed});
      },
      py::arg("sample"), py::arg("uplift"), py::arg("iters") = 5000, py::arg("alpha") = 0.05,
      py::arg("inner_bootstrap_iters") = 200, py::arg("seed") = 0);

  m.def("filter_lengths", &filter_lengths, py::arg("filter_len"), py::arg("count"));
  m.def(
      "inception_parameter_count",
      [](int depth, int n_filters, int filter_len, bool residual, int n_classes, int channels) {
        InceptionHyperparams hp;
        hp.depth = depth;
        hp.n_filters = n_filters;
        hp.filter_len = filter_len;
        hp.residual = residual;
        return build_network(hp, static_cast<std::size_t>(n_classes), static_cast<std::size_t>(channels), 64)
            .parameter_count();
      },
      py::arg("depth") = 6, py::arg("n_filters") = 32, py::arg("filter_len") = 40, py::arg("residual") = true,
      py::arg("n_classes") = 4, py::arg("channels") = 3);
  m.def(
      "mlp_parameter_count",
      [](std::size_t input_dim, std::size_t n_classes) { return nn::build_mlp(input_dim, n_classes).parameter_count(); },
      py::arg("input_dim") = 70, py::arg("n_classes") = 4);
  m.def(
      "cross_entropy", [](const RowMatrix& p, std::vector<int> y) { return nn::cross_entropy(p, y); },
      py::arg("probs"), py::arg("labels"));
}
