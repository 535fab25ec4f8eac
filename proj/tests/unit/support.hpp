#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pdmotion/common.hpp"
#include "pdmotion/dataset.hpp"

namespace testing {

inline pdmotion::RecordingPtr flat_recording(const std::string& patient, std::size_t n, double rate = 50.0,
                                             double value = 0.0) {
  auto r = std::make_shared<pdmotion::SensorRecording>();
  r->patient_id = patient;
  r->sample_rate = rate;
  for (auto& c : r->channels) c.assign(n, value);
  return r;
}

inline pdmotion::Segment segment(const pdmotion::RecordingPtr& rec, std::size_t begin, std::size_t end, int label,
                                 std::size_t id = 0) {
  pdmotion::Segment s;
  s.recording = rec;
  s.begin = begin;
  s.end = end;
  s.class_label = label;
  s.patient_id = rec->patient_id;
  s.id = id;
  return s;
}

inline pdmotion::Window window(std::vector<double> values, std::size_t channels, int label = 0,
                               std::string patient = "P") {
  pdmotion::Window w;
  w.channels = channels;
  w.length = values.size() / channels;
  w.values = std::move(values);
  w.class_label = label;
  w.patient_id = std::move(patient);
  return w;
}

}  // namespace testing
