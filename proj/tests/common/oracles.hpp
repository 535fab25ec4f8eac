#pragma once

// Reference implementations used as test oracles. They follow the textbook
// definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "pdmotion/common.hpp"
#include "pdmotion/nnet.hpp"

namespace oracle {

// Sum over descending unique thresholds t of (R(t) - R(prev)) * P(t), where
// P and R count every item scoring >= t.
inline double average_precision(std::span<const double> s, std::span<const int> y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double positives = 0;
  for (int v : y) positives += v != 0;
  double ap = 0, prev_recall = 0;
  for (double t : thresholds) {
    double tp = 0, n = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        ++n;
        tp += y[i] != 0;
      }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / n);
    prev_recall = recall;
  }
  return ap;
}

// Mean recall over classes present in y, via a confusion table.
inline double balanced_accuracy(std::span<const int> y, std::span<const int> p) {
  std::map<int, std::map<int, double>> confusion;
  for (std::size_t i = 0; i < y.size(); ++i) confusion[y[i]][p[i]] += 1;
  double total = 0;
  for (const auto& [cls, row] : confusion) {
    double n = 0;
    for (const auto& [pred, c] : row) n += c;
    const auto hit = row.find(cls);
    total += (hit == row.end() ? 0.0 : hit->second) / n;
  }
  return total / static_cast<double>(confusion.size());
}

inline std::size_t window_count(std::size_t L, std::size_t w, std::size_t h) {
  std::size_t n = 0;
  for (std::size_t start = 0; start + w <= L; start += h) ++n;
  return n;
}

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
// to rounding from producing meaningless ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline constexpr double kFdStep = 1e-4;

inline pdmotion::nn::Tensor random_tensor(pdmotion::nn::Shape shape, std::mt19937_64& rng) {
  pdmotion::nn::Tensor t(std::move(shape));
  std::normal_distribution<double> n;
  for (double& v : t.data) v = n(rng);
  return t;
}

// Identities of the winners of a non-smooth layer: the sign of each ReLU
// output and the input position selected by each max-pool output. A probe
// whose +h and -h evaluations disagree here straddles a kink, where a central
// difference does not estimate the derivative.
inline void append_winners(const pdmotion::nn::Layer& layer, const pdmotion::nn::Tensor& in,
                           const pdmotion::nn::Tensor& out, std::vector<std::int64_t>& sig) {
  if (layer.kind() == "activation" && layer.config().at("function") == "relu") {
    for (double v : out.data) sig.push_back(v > 0);
  } else if (layer.kind() == "maxpool") {
    const std::size_t T = out.shape.back();
    for (std::size_t row = 0; row * T < out.data.size(); ++row) {
      const double* p = in.data.data() + row * T;
      for (std::size_t t = 0; t < T; ++t) sig.push_back(std::find(p, p + T, out.data[row * T + t]) - p);
    }
  }
}

// Checks a single layer against central differences of the scalar
// sum(out * R) for a random R, covering parameters and every input. Probes
// that straddle a kink are skipped.
inline double layer_gradient_error(pdmotion::nn::Layer& layer, std::vector<pdmotion::nn::Tensor> inputs,
                                   std::uint64_t seed) {
  using pdmotion::nn::Tensor;
  std::mt19937_64 rng(seed);
  layer.init(rng);
  // Move away from the initializer's special values (unit BN scale, zero shift).
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (auto* p : layer.params())
    for (double& v : p->value) v += jitter(rng);
  auto ptrs = [&] {
    std::vector<const Tensor*> p;
    for (const auto& t : inputs) p.push_back(&t);
    return p;
  };
  Tensor out;
  layer.forward(ptrs(), out, true);
  const Tensor R = random_tensor(out.shape, rng);
  std::vector<std::int64_t> sig;
  auto objective = [&] {
    Tensor o;
    layer.forward(ptrs(), o, true);
    sig.clear();
    append_winners(layer, inputs[0], o, sig);
    double s = 0;
    for (std::size_t i = 0; i < o.data.size(); ++i) s += o.data[i] * R.data[i];
    return s;
  };

  std::vector<Tensor> grad_in;
  for (const auto& t : inputs) grad_in.emplace_back(t.shape);
  std::vector<Tensor*> gptr;
  for (auto& g : grad_in) gptr.push_back(&g);
  for (auto* p : layer.params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
  layer.backward(ptrs(), out, R, gptr, true);

  double worst = 0;
  auto probe = [&](double& x, double analytic) {
    const double keep = x;
    x = keep + kFdStep;
    const double up = objective();
    const auto sig_up = sig;
    x = keep - kFdStep;
    const double down = objective();
    x = keep;
    if (sig != sig_up) return;  // kink
    worst = std::max(worst, relative_error(analytic, (up - down) / (2 * kFdStep)));
  };
  for (auto* p : layer.params())
    for (std::size_t i = 0; i < p->value.size(); ++i) probe(p->value[i], p->grad[i]);
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].data.size(); ++i) probe(inputs[k].data[i], grad_in[k].data[i]);
  return worst;
}

inline std::vector<std::int64_t> kink_signature(const pdmotion::nn::Network& net, const pdmotion::nn::Tensor& batch) {
  const auto acts = net.node_outputs(batch, true);
  std::vector<std::int64_t> sig;
  for (int n = 0; n < static_cast<int>(net.node_count()); ++n) {
    const int src = net.node_inputs(n).at(0);
    const auto& in = src == pdmotion::nn::Network::kInput ? batch : acts[static_cast<std::size_t>(src)];
    append_winners(net.layer(n), in, acts[static_cast<std::size_t>(n)], sig);
  }
  return sig;
}

struct GradientReport {
  double worst = 0;           // over probes that do not straddle a kink
  std::size_t probes = 0;
  std::size_t kinks = 0;      // probes excluded because a winner changed
};

// Checks every parameter of a network against central differences of the
// mean cross-entropy loss.
inline GradientReport network_gradient_report(pdmotion::nn::Network& net, const pdmotion::nn::Tensor& batch,
                                              std::span<const int> labels) {
  net.compute_gradients(batch, labels);
  std::vector<std::vector<double>> analytic;
  for (auto* p : net.params()) analytic.push_back(p->grad);
  GradientReport r;
  auto params = net.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k]->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double keep = value[i];
      value[i] = keep + kFdStep;
      const double up = net.compute_gradients(batch, labels);
      const auto sig_up = kink_signature(net, batch);
      value[i] = keep - kFdStep;
      const double down = net.compute_gradients(batch, labels);
      const auto sig_down = kink_signature(net, batch);
      value[i] = keep;
      ++r.probes;
      if (sig_up != sig_down) {
        ++r.kinks;
        continue;
      }
      r.worst = std::max(r.worst, relative_error(analytic[k][i], (up - down) / (2 * kFdStep)));
    }
  }
  return r;
}

inline double network_gradient_error(pdmotion::nn::Network& net, const pdmotion::nn::Tensor& batch,
                                     std::span<const int> labels) {
  return network_gradient_report(net, batch, labels).worst;
}

}  // namespace oracle
