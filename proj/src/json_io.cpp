#include "pdmotion/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pdmotion/common.hpp"

namespace pdmotion {
namespace {

void put_string(std::string& out, const std::string& s) {
  // nlohmann's escaping is already deterministic.
  out += nlohmann::json(s).dump();
}

void put_double(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // Keep the value recognisably floating point.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  out += s;
}

void emit(std::string& out, const nlohmann::json& j, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(2 * depth), ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += pad;
        put_string(out, it.key());
        out += ": ";
        emit(out, it.value(), depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars = true;
      for (const auto& v : j)
        if (v.is_structured()) scalars = false;
      if (scalars) {
        // Flat numeric arrays stay on one line.
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          emit(out, j[i], depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        emit(out, j[i], depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case nlohmann::json::value_t::number_float:
      put_double(out, j.get<double>());
      return;
    case nlohmann::json::value_t::string:
      put_string(out, j.get_ref<const std::string&>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const nlohmann::json& doc) {
  std::string out;
  emit(out, doc, 0);
  out += "\n";
  return out;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << dump_json(doc);
  if (!f) throw DataError("failed writing " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace pdmotion
