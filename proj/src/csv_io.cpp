#include "pdmotion/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <zlib.h>

#include "pdmotion/common.hpp"

namespace pdmotion {
namespace {

// gzread handles both compressed and plain files transparently.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path) {
    file_ = gzopen(path.c_str(), "rb");
    if (!file_) throw DataError("cannot open '" + path.string() + "'");
  }
  ~LineReader() { gzclose(file_); }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[4096];
    while (gzgets(file_, buf, sizeof buf)) {
      line += buf;
      if (!line.empty() && line.back() == '\n') break;
    }
    if (line.empty()) return false;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    ++line_no_;
    return true;
  }

  std::size_t line_no() const { return line_no_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(path_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::filesystem::path path_;
  gzFile file_ = nullptr;
  std::size_t line_no_ = 0;
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    auto field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

void expect_header(LineReader& in, std::string line, const std::vector<std::string_view>& expected) {
  auto fields = split(line);
  if (fields != expected) {
    std::string want;
    for (auto f : expected) want += (want.empty() ? "" : ",") + std::string(f);
    in.fail("expected header '" + want + "'");
  }
}

}  // namespace

SensorRecording read_recording_csv(const std::filesystem::path& path, std::string patient_id,
                                   Device device) {
  LineReader in(path);
  std::string line;
  if (!in.next(line)) throw DataError(path.string() + ": empty file");
  expect_header(in, line, {"timestamp", "x", "y", "z"});

  SensorRecording rec;
  rec.patient_id = std::move(patient_id);
  rec.device = device;
  std::vector<double> times;
  while (in.next(line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != 4) in.fail("expected 4 fields, got " + std::to_string(f.size()));
    double v[4];
    for (int i = 0; i < 4; ++i) {
      if (!parse_double(f[i], v[i])) in.fail("cannot parse '" + std::string(f[i]) + "' as a number");
      if (!std::isfinite(v[i])) in.fail("non-finite value");
    }
    if (!times.empty() && v[0] <= times.back()) in.fail("timestamps must increase");
    times.push_back(v[0]);
    for (int c = 0; c < 3; ++c) rec.channels[c].push_back(v[c + 1]);
  }
  if (times.empty()) throw DataError(path.string() + ": empty signal");
  rec.start_time = times.front();
  if (times.size() > 1) {
    // Timestamps carry rounding noise; keep the rate to micro-Hz resolution.
    const double rate = static_cast<double>(times.size() - 1) / (times.back() - times.front());
    rec.sample_rate = std::round(rate * 1e6) / 1e6;
  }
  rec.validate();
  return rec;
}

std::vector<SymptomAnnotation> read_annotations_csv(const std::filesystem::path& path) {
  LineReader in(path);
  std::string line;
  if (!in.next(line)) throw DataError(path.string() + ": empty file");
  expect_header(in, line, {"patient_id", "device", "symptom", "label", "start", "end"});

  std::vector<SymptomAnnotation> out;
  while (in.next(line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != 6) in.fail("expected 6 fields, got " + std::to_string(f.size()));
    SymptomAnnotation a;
    a.patient_id = std::string(f[0]);
    if (a.patient_id.empty()) in.fail("empty patient_id");
    try {
      a.device = parse_device(f[1]);
      a.symptom = parse_symptom(f[2]);
    } catch (const DataError& e) {
      in.fail(e.what());
    }
    if (!f[3].empty() && f[3] != "NA" && f[3] != "nan") {
      int label = 0;
      if (!parse_int(f[3], label)) in.fail("cannot parse label '" + std::string(f[3]) + "'");
      a.label = label;
    }
    if (!parse_double(f[4], a.start) || !parse_double(f[5], a.end))
      in.fail("cannot parse interval bounds");
    try {
      a.validate();
    } catch (const DataError& e) {
      in.fail(e.what());
    }
    out.push_back(std::move(a));
  }
  return out;
}

void write_recording_csv(const std::filesystem::path& path, const SensorRecording& recording) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "timestamp,x,y,z\n" << std::setprecision(17);
  for (std::size_t i = 0; i < recording.size(); ++i) {
    const double t = recording.start_time + static_cast<double>(i) / recording.sample_rate;
    out << t << ',' << recording.channels[0][i] << ',' << recording.channels[1][i] << ','
        << recording.channels[2][i] << '\n';
  }
}

void write_annotations_csv(const std::filesystem::path& path,
                           const std::vector<SymptomAnnotation>& annotations) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "patient_id,device,symptom,label,start,end\n" << std::setprecision(17);
  for (const auto& a : annotations) {
    out << a.patient_id << ',' << to_string(a.device) << ',' << to_string(a.symptom) << ',';
    if (a.label) out << *a.label;
    out << ',' << a.start << ',' << a.end << '\n';
  }
}

std::string recording_file_name(const SensorRecording& recording) {
  return recording.patient_id + "_" + std::string(to_string(recording.device)) + ".csv";
}

std::vector<SensorRecording> read_recording_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw DataError("recordings directory '" + dir.string() + "' does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.ends_with(".csv") || name.ends_with(".csv.gz")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<SensorRecording> out;
  for (const auto& f : files) {
    auto stem = f.filename().string();
    stem = stem.substr(0, stem.find(".csv"));
    const auto us = stem.rfind('_');
    if (us == std::string::npos || us == 0) continue;  // not a recording (e.g. annotations.csv)
    Device device;
    try {
      device = parse_device(stem.substr(us + 1));
    } catch (const DataError&) {
      continue;
    }
    out.push_back(read_recording_csv(f, stem.substr(0, us), device));
  }
  return out;
}

}  // namespace pdmotion
