#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pdmotion/dataset.hpp"

namespace pdmotion {

// Recording files: header `timestamp,x,y,z`; timestamp in seconds, x/y/z in g.
// Annotation file: header `patient_id,device,symptom,label,start,end`; empty
// label means the annotation is missing. Both may be gzip-compressed.

/// Sample rate is inferred from the timestamp span. Throws DataError with the
/// offending line number on malformed or non-finite rows.
SensorRecording read_recording_csv(const std::filesystem::path& path, std::string patient_id,
                                   Device device);

std::vector<SymptomAnnotation> read_annotations_csv(const std::filesystem::path& path);

void write_recording_csv(const std::filesystem::path& path, const SensorRecording& recording);
void write_annotations_csv(const std::filesystem::path& path,
                           const std::vector<SymptomAnnotation>& annotations);

/// Reads every `<patient>_<device>.csv[.gz]` in `dir`, sorted by file name.
std::vector<SensorRecording> read_recording_dir(const std::filesystem::path& dir);

/// File name used by write/read_recording_dir for one recording.
std::string recording_file_name(const SensorRecording& recording);

}  // namespace pdmotion
