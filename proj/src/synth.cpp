#include "pdmotion/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "pdmotion/common.hpp"

namespace pdmotion {

void SynthSpec::validate() const {
  if (n_patients < 1) throw ConfigError("synth: n_patients must be >= 1");
  if (segments_per_patient < 1) throw ConfigError("synth: segments_per_patient must be >= 1");
  if (labels.empty()) throw ConfigError("synth: labels must not be empty");
  if (!(segment_seconds > 0.0) || gap_seconds < 0.0) throw ConfigError("synth: bad segment timing");
  if (!(sample_rate > 0.0)) throw ConfigError("synth: sample_rate must be positive");
  if (!(burst_duty > 0.0 && burst_duty <= 1.0)) throw ConfigError("synth: burst_duty must lie in (0, 1]");
  if (!(mean_burst_seconds > 0.0)) throw ConfigError("synth: mean_burst_seconds must be positive");
  for (int l : labels) {
    const int hi = symptom == Symptom::Tremor ? static_cast<int>(tremor_amplitude.size()) - 1 : 1;
    if (l < 0 || l > hi) throw ConfigError("synth: label " + std::to_string(l) + " out of range");
  }
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Mean-reverting random walk, then a one-pole low-pass.
void add_activity_floor(std::vector<double>& x, double rate, double scale, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = 1.0 / rate;
  const double theta = 0.5;  // 1/s reversion speed
  const double sigma = scale * std::sqrt(2.0 * theta);
  const double alpha = 1.0 - std::exp(-kTwoPi * 1.5 * dt);  // ~1.5 Hz corner
  double walk = scale * gauss(rng);
  double smooth = walk;
  for (double& v : x) {
    walk += -theta * walk * dt + sigma * std::sqrt(dt) * gauss(rng);
    smooth += alpha * (walk - smooth);
    v += smooth;
  }
}

// Intermittent oscillation bursts with raised-cosine edges over [begin, end).
void add_bursts(std::array<std::vector<double>, kAxes>& ch, std::size_t begin, std::size_t end,
                double rate, double amplitude, const SynthSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> on_len(1.0 / spec.mean_burst_seconds);
  const double off_mean =
      spec.burst_duty >= 1.0 ? 0.0 : spec.mean_burst_seconds * (1.0 - spec.burst_duty) / spec.burst_duty;
  std::exponential_distribution<double> off_len(off_mean > 0.0 ? 1.0 / off_mean : 1.0);

  const double total = static_cast<double>(end - begin) / rate;
  // Start inside an off period or a burst in proportion to the duty cycle.
  double t = unit(rng) < spec.burst_duty ? 0.0 : (off_mean > 0.0 ? off_len(rng) : 0.0);
  const double ramp = 0.2;
  while (t < total) {
    const double len = spec.burst_duty >= 1.0 ? total : std::max(0.5, on_len(rng));
    const double freq = 4.0 + 2.0 * unit(rng);
    const double phase = kTwoPi * unit(rng);
    // Random oscillation direction on the unit sphere.
    std::normal_distribution<double> gauss(0.0, 1.0);
    double dir[3] = {gauss(rng), gauss(rng), gauss(rng)};
    const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]) + 1e-12;
    for (double& d : dir) d /= norm;

    const auto i0 = begin + static_cast<std::size_t>(t * rate);
    const auto i1 = std::min(end, begin + static_cast<std::size_t>((t + len) * rate));
    for (std::size_t i = i0; i < i1; ++i) {
      const double local = static_cast<double>(i - i0) / rate;
      const double remain = static_cast<double>(i1 - i) / rate;
      double env = 1.0;
      if (local < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * local / ramp);
      if (remain < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * remain / ramp));
      const double s = amplitude * env * std::sin(kTwoPi * freq * local + phase);
      for (std::size_t c = 0; c < kAxes; ++c) ch[c][i] += s * dir[c];
    }
    t += len + (off_mean > 0.0 ? off_len(rng) : 0.0);
  }
}

}  // namespace

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SynthData out;
  const double rate = spec.sample_rate;
  const double span =
      spec.gap_seconds + spec.segments_per_patient * (spec.segment_seconds + spec.gap_seconds);
  const auto n = static_cast<std::size_t>(std::llround(span * rate));

  for (int p = 0; p < spec.n_patients; ++p) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(p)));
    std::uniform_real_distribution<double> spread(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    char id[16];
    std::snprintf(id, sizeof id, "P%02d", p + 1);
    SensorRecording rec;
    rec.patient_id = id;
    rec.device = spec.device;
    rec.sample_rate = rate;
    rec.start_time = 0.0;

    const double activity = spec.activity_scale * (1.0 + spec.patient_variability * spread(rng));
    const double gain = 1.0 + spec.patient_variability * spread(rng);
    // Gravity along a patient-specific resting orientation.
    double g[3] = {gauss(rng), gauss(rng), gauss(rng)};
    const double gn = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) + 1e-12;
    for (std::size_t c = 0; c < kAxes; ++c) {
      rec.channels[c].assign(n, g[c] / gn);
      add_activity_floor(rec.channels[c], rate, activity, rng);
    }

    for (int s = 0; s < spec.segments_per_patient; ++s) {
      const int label = spec.labels[static_cast<std::size_t>(s + p) % spec.labels.size()];
      const double start = spec.gap_seconds + s * (spec.segment_seconds + spec.gap_seconds);
      const double end = start + spec.segment_seconds;

      const double amp = spec.symptom == Symptom::Tremor
                             ? spec.tremor_amplitude[static_cast<std::size_t>(label)]
                             : (label == 1 ? spec.binary_amplitude : 0.0);
      if (amp > 0.0) {
        const auto b = static_cast<std::size_t>(std::llround(start * rate));
        const auto e = std::min(n, static_cast<std::size_t>(std::llround(end * rate)));
        add_bursts(rec.channels, b, e, rate, amp * gain, spec, rng);
      }
      out.annotations.push_back({rec.patient_id, spec.device, spec.symptom, label, start, end});
    }

    for (auto& ch : rec.channels)
      for (double& v : ch) v += spec.sensor_noise * gauss(rng);
    out.recordings.push_back(std::move(rec));
  }
  return out;
}

}  // namespace pdmotion
