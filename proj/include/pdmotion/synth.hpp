#pragma once

#include <cstdint>
#include <vector>

#include "pdmotion/dataset.hpp"

namespace pdmotion {

/// Parameters of the synthetic wrist-accelerometer generator.
///
/// Every patient gets one recording made of `segments_per_patient` annotated
/// segments separated by unannotated gaps. Segment i of patient p carries raw
/// label `labels[(i + p) % labels.size()]`. Symptomatic segments contain
/// intermittent 4-6 Hz oscillation bursts on top of a smoothed random-walk
/// activity floor; the burst amplitude encodes tremor severity, and binary
/// symptoms switch the bursts on (label 1) or off (label 0).
struct SynthSpec {
  int n_patients = 12;
  Symptom symptom = Symptom::Tremor;
  std::vector<int> labels = {0, 1, 2};
  int segments_per_patient = 3;
  double segment_seconds = 90.0;
  double gap_seconds = 5.0;
  double sample_rate = kTargetRate;
  Device device = Device::GENEActiv;

  std::vector<double> tremor_amplitude = {0.0, 0.06, 0.15, 0.30, 0.50};  // g, by severity
  double binary_amplitude = 0.12;
  double burst_duty = 0.6;            // fraction of symptomatic time with an active burst
  double mean_burst_seconds = 3.0;
  double activity_scale = 0.15;       // g, stationary std of the activity floor
  double patient_variability = 0.3;   // relative spread of per-patient amplitudes
  double sensor_noise = 0.005;        // g, white noise std

  void validate() const;
};

struct SynthData {
  std::vector<SensorRecording> recordings;
  std::vector<SymptomAnnotation> annotations;
};

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace pdmotion
