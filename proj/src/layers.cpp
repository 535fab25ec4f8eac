#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "pdmotion/nnet.hpp"

namespace pdmotion::nn {
namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

[[noreturn]] void shape_error(const std::string& layer, const std::string& what) {
  throw ConfigError(layer + ": " + what);
}

void expect_inputs(const std::string& layer, std::span<const Shape> in, std::size_t n) {
  if (in.size() != n)
    shape_error(layer, "expects " + std::to_string(n) + " input(s), got " + std::to_string(in.size()));
}

const Shape& only(const std::string& layer, std::span<const Shape> in) {
  expect_inputs(layer, in, 1);
  return in[0];
}

void uniform_fill(std::vector<double>& v, double limit, Rng& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& x : v) x = u(rng);
}

std::vector<double> json_vec(const nlohmann::json& j) { return j.get<std::vector<double>>(); }

// Copies sample b of x into a zero-padded column matrix (C*k rows, T cols).
void im2col(const double* x, std::size_t C, std::size_t T, std::size_t k, std::size_t left, Mat& col) {
  col.setZero(static_cast<long>(C * k), static_cast<long>(T));
  for (std::size_t c = 0; c < C; ++c) {
    const double* xc = x + c * T;
    for (std::size_t j = 0; j < k; ++j) {
      double* row = col.data() + (c * k + j) * T;
      // out position t reads input t + j - left
      const long shift = static_cast<long>(j) - static_cast<long>(left);
      const long t0 = std::max(0L, -shift);
      const long t1 = std::min(static_cast<long>(T), static_cast<long>(T) - shift);
      for (long t = t0; t < t1; ++t) row[t] = xc[t + shift];
    }
  }
}

void col2im_add(const Mat& dcol, std::size_t C, std::size_t T, std::size_t k, std::size_t left, double* dx) {
  for (std::size_t c = 0; c < C; ++c) {
    double* dxc = dx + c * T;
    for (std::size_t j = 0; j < k; ++j) {
      const double* row = dcol.data() + (c * k + j) * T;
      const long shift = static_cast<long>(j) - static_cast<long>(left);
      const long t0 = std::max(0L, -shift);
      const long t1 = std::min(static_cast<long>(T), static_cast<long>(T) - shift);
      for (long t = t0; t < t1; ++t) dxc[t + shift] += row[t];
    }
  }
}

}  // namespace

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  data.assign(shape.empty() ? 0 : n, fill);
}

std::size_t Tensor::sample_size() const {
  std::size_t n = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
  return n;
}

// ---- Conv1d ----

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t filter_len)
    : in_(in_channels), out_(out_channels), k_(filter_len) {
  if (in_ == 0 || out_ == 0) throw ConfigError("conv1d: channel counts must be >= 1");
  if (k_ == 0) throw ConfigError("conv1d: filter_len must be >= 1");
  weight_.name = "weight";
  weight_.resize(out_ * in_ * k_);
}

Shape Conv1d::output_shape(std::span<const Shape> in) const {
  const auto& s = only("conv1d", in);
  if (s.size() != 2 || s[0] != in_)
    shape_error("conv1d", "expects input (" + std::to_string(in_) + ",T), got " + shape_str(s));
  return {out_, s[1]};
}

void Conv1d::forward(std::span<const Tensor* const> in, Tensor& out, bool) const {
  const Tensor& x = *in[0];
  const std::size_t B = x.batch(), T = x.shape[2];
  out = Tensor({B, out_, T});
  const ConstMatMap W(weight_.value.data(), static_cast<long>(out_), static_cast<long>(in_ * k_));
  const std::size_t left = (k_ - 1) / 2;
#pragma omp parallel for schedule(static)
  for (long b = 0; b < static_cast<long>(B); ++b) {
    MatMap y(out.sample(static_cast<std::size_t>(b)), static_cast<long>(out_), static_cast<long>(T));
    if (k_ == 1) {
      y.noalias() = W * ConstMatMap(x.sample(static_cast<std::size_t>(b)), static_cast<long>(in_), static_cast<long>(T));
    } else {
      Mat col;
      im2col(x.sample(static_cast<std::size_t>(b)), in_, T, k_, left, col);
      y.noalias() = W * col;
    }
  }
}

void Conv1d::backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                      std::span<Tensor* const> gin, bool) {
  const Tensor& x = *in[0];
  const std::size_t B = x.batch(), T = x.shape[2];
  const long O = static_cast<long>(out_), CK = static_cast<long>(in_ * k_), LT = static_cast<long>(T);
  const std::size_t left = (k_ - 1) / 2;
  MatMap dW(weight_.grad.data(), O, CK);
  const ConstMatMap W(weight_.value.data(), O, CK);
  Mat col, dcol;
  // Samples are visited in order so the weight-gradient sum is reproducible.
  for (std::size_t b = 0; b < B; ++b) {
    const ConstMatMap g(gout.sample(b), O, LT);
    if (k_ == 1) {
      const ConstMatMap xb(x.sample(b), static_cast<long>(in_), LT);
      dW.noalias() += g * xb.transpose();
      if (gin[0]) MatMap(gin[0]->sample(b), static_cast<long>(in_), LT).noalias() += W.transpose() * g;
    } else {
      im2col(x.sample(b), in_, T, k_, left, col);
      dW.noalias() += g * col.transpose();
      if (gin[0]) {
        dcol.noalias() = W.transpose() * g;
        col2im_add(dcol, in_, T, k_, left, gin[0]->sample(b));
      }
    }
  }
}

void Conv1d::init(Rng& rng) {
  uniform_fill(weight_.value, std::sqrt(6.0 / static_cast<double>(in_ * k_)), rng);
}

nlohmann::json Conv1d::config() const { return {{"in_channels", in_}, {"out_channels", out_}, {"filter_len", k_}}; }

// ---- Dense ----

Dense::Dense(std::size_t in_features, std::size_t out_features) : in_(in_features), out_(out_features) {
  if (in_ == 0 || out_ == 0) throw ConfigError("dense: feature counts must be >= 1");
  weight_.name = "weight";
  weight_.resize(out_ * in_);
  bias_.name = "bias";
  bias_.resize(out_);
}

Shape Dense::output_shape(std::span<const Shape> in) const {
  const auto& s = only("dense", in);
  if (s.size() != 1 || s[0] != in_)
    shape_error("dense", "expects input (" + std::to_string(in_) + "), got " + shape_str(s));
  return {out_};
}

void Dense::forward(std::span<const Tensor* const> in, Tensor& out, bool) const {
  const Tensor& x = *in[0];
  const long B = static_cast<long>(x.batch());
  out = Tensor({x.batch(), out_});
  const ConstMatMap X(x.data.data(), B, static_cast<long>(in_));
  const ConstMatMap W(weight_.value.data(), static_cast<long>(out_), static_cast<long>(in_));
  const Eigen::Map<const Eigen::RowVectorXd> bias(bias_.value.data(), static_cast<long>(out_));
  MatMap Y(out.data.data(), B, static_cast<long>(out_));
  Y.noalias() = X * W.transpose();
  Y.rowwise() += bias;
}

void Dense::backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                     std::span<Tensor* const> gin, bool) {
  const Tensor& x = *in[0];
  const long B = static_cast<long>(x.batch());
  const ConstMatMap X(x.data.data(), B, static_cast<long>(in_));
  const ConstMatMap G(gout.data.data(), B, static_cast<long>(out_));
  const ConstMatMap W(weight_.value.data(), static_cast<long>(out_), static_cast<long>(in_));
  MatMap(weight_.grad.data(), static_cast<long>(out_), static_cast<long>(in_)).noalias() += G.transpose() * X;
  Eigen::Map<Eigen::RowVectorXd>(bias_.grad.data(), static_cast<long>(out_)) += G.colwise().sum();
  if (gin[0]) MatMap(gin[0]->data.data(), B, static_cast<long>(in_)).noalias() += G * W;
}

void Dense::init(Rng& rng) {
  uniform_fill(weight_.value, std::sqrt(6.0 / static_cast<double>(in_ + out_)), rng);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

nlohmann::json Dense::config() const { return {{"in_features", in_}, {"out_features", out_}}; }

// ---- BatchNorm ----

BatchNorm::BatchNorm(std::size_t channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  if (channels_ == 0) throw ConfigError("batchnorm: channels must be >= 1");
  if (!(momentum_ >= 0.0 && momentum_ < 1.0)) throw ConfigError("batchnorm: momentum must be in [0,1)");
  if (!(eps_ > 0.0)) throw ConfigError("batchnorm: eps must be > 0");
  gamma_.name = "gamma";
  gamma_.resize(channels_);
  beta_.name = "beta";
  beta_.resize(channels_);
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
  running_mean_.assign(channels_, 0.0);
  running_var_.assign(channels_, 1.0);
}

Shape BatchNorm::output_shape(std::span<const Shape> in) const {
  const auto& s = only("batchnorm", in);
  if (s.empty() || s.size() > 2 || s[0] != channels_)
    shape_error("batchnorm", "expects " + std::to_string(channels_) + " channels, got " + shape_str(s));
  return s;
}

void BatchNorm::batch_stats(const Tensor& x, std::vector<double>& mean, std::vector<double>& var) const {
  const std::size_t B = x.batch(), T = x.shape.size() == 3 ? x.shape[2] : 1;
  const double m = static_cast<double>(B * T);
  mean.assign(channels_, 0.0);
  var.assign(channels_, 0.0);
  for (std::size_t c = 0; c < channels_; ++c) {
    double s = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* p = x.sample(b) + c * T;
      for (std::size_t t = 0; t < T; ++t) s += p[t];
    }
    const double mu = s / m;
    double v = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* p = x.sample(b) + c * T;
      for (std::size_t t = 0; t < T; ++t) v += (p[t] - mu) * (p[t] - mu);
    }
    mean[c] = mu;
    var[c] = v / m;
  }
}

void BatchNorm::forward(std::span<const Tensor* const> in, Tensor& out, bool training) const {
  const Tensor& x = *in[0];
  const std::size_t B = x.batch(), T = x.shape.size() == 3 ? x.shape[2] : 1;
  std::vector<double> mean, var;
  if (training) {
    batch_stats(x, mean, var);
  } else {
    mean = running_mean_;
    var = running_var_;
  }
  out = Tensor(x.shape);
  for (std::size_t c = 0; c < channels_; ++c) {
    const double a = gamma_.value[c] / std::sqrt(var[c] + eps_);
    const double s = beta_.value[c] - a * mean[c];
    for (std::size_t b = 0; b < B; ++b) {
      const double* p = x.sample(b) + c * T;
      double* q = out.sample(b) + c * T;
      for (std::size_t t = 0; t < T; ++t) q[t] = a * p[t] + s;
    }
  }
}

void BatchNorm::backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                         std::span<Tensor* const> gin, bool training) {
  const Tensor& x = *in[0];
  const std::size_t B = x.batch(), T = x.shape.size() == 3 ? x.shape[2] : 1;
  const double m = static_cast<double>(B * T);
  std::vector<double> mean, var;
  if (training) {
    batch_stats(x, mean, var);
  } else {
    mean = running_mean_;
    var = running_var_;
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    const double inv = 1.0 / std::sqrt(var[c] + eps_);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* p = x.sample(b) + c * T;
      const double* g = gout.sample(b) + c * T;
      for (std::size_t t = 0; t < T; ++t) {
        sum_g += g[t];
        sum_gx += g[t] * (p[t] - mean[c]) * inv;
      }
    }
    gamma_.grad[c] += sum_gx;
    beta_.grad[c] += sum_g;
    if (!gin[0]) continue;
    const double gam = gamma_.value[c];
    for (std::size_t b = 0; b < B; ++b) {
      const double* p = x.sample(b) + c * T;
      const double* g = gout.sample(b) + c * T;
      double* d = gin[0]->sample(b) + c * T;
      if (training) {
        for (std::size_t t = 0; t < T; ++t) {
          const double xhat = (p[t] - mean[c]) * inv;
          d[t] += gam * inv * (g[t] - sum_g / m - xhat * sum_gx / m);
        }
      } else {
        for (std::size_t t = 0; t < T; ++t) d[t] += gam * inv * g[t];
      }
    }
  }
}

void BatchNorm::init(Rng&) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
  std::fill(beta_.value.begin(), beta_.value.end(), 0.0);
  running_mean_.assign(channels_, 0.0);
  running_var_.assign(channels_, 1.0);
}

void BatchNorm::observe(std::span<const Tensor* const> in) {
  std::vector<double> mean, var;
  batch_stats(*in[0], mean, var);
  for (std::size_t c = 0; c < channels_; ++c) {
    running_mean_[c] = momentum_ * running_mean_[c] + (1.0 - momentum_) * mean[c];
    running_var_[c] = momentum_ * running_var_[c] + (1.0 - momentum_) * var[c];
  }
}

nlohmann::json BatchNorm::config() const { return {{"channels", channels_}, {"momentum", momentum_}, {"eps", eps_}}; }

nlohmann::json BatchNorm::state() const { return {{"running_mean", running_mean_}, {"running_var", running_var_}}; }

void BatchNorm::load_state(const nlohmann::json& state) {
  auto mean = json_vec(state.at("running_mean"));
  auto var = json_vec(state.at("running_var"));
  if (mean.size() != channels_ || var.size() != channels_) throw DataError("batchnorm: running statistics size mismatch");
  running_mean_ = std::move(mean);
  running_var_ = std::move(var);
}

// ---- Activation ----

Shape ActivationLayer::output_shape(std::span<const Shape> in) const { return only("activation", in); }

void ActivationLayer::forward(std::span<const Tensor* const> in, Tensor& out, bool) const {
  const Tensor& x = *in[0];
  out = Tensor(x.shape);
  const std::size_t n = x.data.size();
  switch (f_) {
    case Activation::Linear:
      out.data = x.data;
      break;
    case Activation::ReLU:
      for (std::size_t i = 0; i < n; ++i) out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) out.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
      break;
  }
}

void ActivationLayer::backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                               std::span<Tensor* const> gin, bool) {
  if (!gin[0]) return;
  auto& d = gin[0]->data;
  const auto& x = in[0]->data;
  const std::size_t n = d.size();
  switch (f_) {
    case Activation::Linear:
      for (std::size_t i = 0; i < n; ++i) d[i] += gout.data[i];
      break;
    case Activation::ReLU:
      for (std::size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) d[i] += gout.data[i];
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) d[i] += gout.data[i] * out.data[i] * (1.0 - out.data[i]);
      break;
  }
}

nlohmann::json ActivationLayer::config() const {
  const char* name = f_ == Activation::ReLU ? "relu" : f_ == Activation::Sigmoid ? "sigmoid" : "linear";
  return {{"function", name}};
}

// ---- GlobalAvgPool ----

Shape GlobalAvgPool::output_shape(std::span<const Shape> in) const {
  const auto& s = only("global_avg_pool", in);
  if (s.size() != 2 || s[1] == 0) shape_error("global_avg_pool", "expects (C,T) input, got " + shape_str(s));
  return {s[0]};
}

void GlobalAvgPool::forward(std::span<const Tensor* const> in, Tensor& out, bool) const {
  const Tensor& x = *in[0];
  const std::size_t B = x.batch(), C = x.shape[1], T = x.shape[2];
  out = Tensor({B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* p = x.sample(b) + c * T;
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += p[t];
      out.sample(b)[c] = s / static_cast<double>(T);
    }
}

void GlobalAvgPool::backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                             std::span<Tensor* const> gin, bool) {
  if (!gin[0]) return;
  const Tensor& x = *in[0];
  const std::size_t B = x.batch(), C = x.shape[1], T = x.shape[2];
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double g = gout.sample(b)[c] / static_cast<double>(T);
      double* d = gin[0]->sample(b) + c * T;
      for (std::size_t t = 0; t < T; ++t) d[t] += g;
    }
}

// ---- MaxPool ----

Shape MaxPool::output_shape(std::span<const Shape> in) const {
  const auto& s = only("maxpool", in);
  if (width_ == 0) shape_error("maxpool", "width must be >= 1");
  if (s.size() != 2) shape_error("maxpool", "expects (C,T) input, got " + shape_str(s));
  return s;
}

namespace {

// Index of the first maximum within the clipped pooling window around t.
inline std::size_t argmax_at(const double* p, std::size_t T, std::size_t t, std::size_t width) {
  const long start = static_cast<long>(t) - static_cast<long>((width - 1) / 2);
  const std::size_t lo = static_cast<std::size_t>(std::max(0L, start));
  const std::size_t hi = static_cast<std::size_t>(std::min(static_cast<long>(T), start + static_cast<long>(width)));
  std::size_t best = lo;
  for (std::size_t i = lo + 1; i < hi; ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

}  // namespace

void MaxPool::forward(std::span<const Tensor* const> in, Tensor& out, bool) const {
  const Tensor& x = *in[0];
  const std::size_t B = x.batch(), C = x.shape[1], T = x.shape[2];
  out = Tensor(x.shape);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* p = x.sample(b) + c * T;
      double* q = out.sample(b) + c * T;
      for (std::size_t t = 0; t < T; ++t) q[t] = p[argmax_at(p, T, t, width_)];
    }
}

void MaxPool::backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                       std::span<Tensor* const> gin, bool) {
  if (!gin[0]) return;
  const Tensor& x = *in[0];
  const std::size_t B = x.batch(), C = x.shape[1], T = x.shape[2];
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* p = x.sample(b) + c * T;
      const double* g = gout.sample(b) + c * T;
      double* d = gin[0]->sample(b) + c * T;
      for (std::size_t t = 0; t < T; ++t) d[argmax_at(p, T, t, width_)] += g[t];
    }
}

nlohmann::json MaxPool::config() const { return {{"width", width_}}; }

// ---- Concat ----

Shape Concat::output_shape(std::span<const Shape> in) const {
  if (in.empty()) shape_error("concat", "needs at least one input");
  std::size_t channels = 0;
  for (const auto& s : in) {
    if (s.size() != 2 || s[1] != in[0][1])
      shape_error("concat", "inputs must be (C,T) with equal T, got " + shape_str(s) + " and " + shape_str(in[0]));
    channels += s[0];
  }
  return {channels, in[0][1]};
}

void Concat::forward(std::span<const Tensor* const> in, Tensor& out, bool) const {
  const std::size_t B = in[0]->batch(), T = in[0]->shape[2];
  std::size_t C = 0;
  for (const auto* x : in) C += x->shape[1];
  out = Tensor({B, C, T});
  for (std::size_t b = 0; b < B; ++b) {
    double* q = out.sample(b);
    for (const auto* x : in) {
      const std::size_t n = x->sample_size();
      std::copy_n(x->sample(b), n, q);
      q += n;
    }
  }
}

void Concat::backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                      std::span<Tensor* const> gin, bool) {
  const std::size_t B = gout.batch();
  for (std::size_t b = 0; b < B; ++b) {
    const double* g = gout.sample(b);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const std::size_t n = in[i]->sample_size();
      if (gin[i]) {
        double* d = gin[i]->sample(b);
        for (std::size_t j = 0; j < n; ++j) d[j] += g[j];
      }
      g += n;
    }
  }
}

// ---- Add ----

Shape Add::output_shape(std::span<const Shape> in) const {
  if (in.empty()) shape_error("add", "needs at least one input");
  for (const auto& s : in)
    if (s != in[0]) shape_error("add", "input shapes differ: " + shape_str(s) + " vs " + shape_str(in[0]));
  return in[0];
}

void Add::forward(std::span<const Tensor* const> in, Tensor& out, bool) const {
  out = *in[0];
  for (std::size_t i = 1; i < in.size(); ++i)
    for (std::size_t j = 0; j < out.data.size(); ++j) out.data[j] += in[i]->data[j];
}

void Add::backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                   std::span<Tensor* const> gin, bool) {
  for (std::size_t i = 0; i < in.size(); ++i)
    if (gin[i])
      for (std::size_t j = 0; j < gout.data.size(); ++j) gin[i]->data[j] += gout.data[j];
}

std::unique_ptr<Layer> make_layer(const std::string& kind, const nlohmann::json& c) {
  if (kind == "conv1d")
    return std::make_unique<Conv1d>(c.at("in_channels").get<std::size_t>(), c.at("out_channels").get<std::size_t>(),
                                    c.at("filter_len").get<std::size_t>());
  if (kind == "dense")
    return std::make_unique<Dense>(c.at("in_features").get<std::size_t>(), c.at("out_features").get<std::size_t>());
  if (kind == "batchnorm")
    return std::make_unique<BatchNorm>(c.at("channels").get<std::size_t>(), c.at("momentum").get<double>(),
                                       c.at("eps").get<double>());
  if (kind == "activation") {
    const auto f = c.at("function").get<std::string>();
    if (f == "relu") return std::make_unique<ActivationLayer>(Activation::ReLU);
    if (f == "sigmoid") return std::make_unique<ActivationLayer>(Activation::Sigmoid);
    if (f == "linear") return std::make_unique<ActivationLayer>(Activation::Linear);
    throw DataError("unknown activation '" + f + "'");
  }
  if (kind == "global_avg_pool") return std::make_unique<GlobalAvgPool>();
  if (kind == "maxpool") return std::make_unique<MaxPool>(c.at("width").get<std::size_t>());
  if (kind == "concat") return std::make_unique<Concat>();
  if (kind == "add") return std::make_unique<Add>();
  throw DataError("unknown layer kind '" + kind + "'");
}

}  // namespace pdmotion::nn
