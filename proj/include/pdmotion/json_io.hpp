#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace pdmotion {

/// Deterministic text form: object keys sorted, doubles printed with 17
/// significant digits, two-space indentation.
std::string dump_json(const nlohmann::json& doc);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

/// Throws DataError naming the path on I/O or parse failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace pdmotion
