#pragma once

// Binary artifact container shared by checkpoints, surrogate/embedding dumps
// and operator-learning sample files: one line of JSON header terminated by
// '\n', followed by the payload as raw little-endian 32-bit floats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace srl::io {

using Json = nlohmann::json;

struct Dump {
  Json header;
  std::vector<float> payload;
};

void write_dump(const std::filesystem::path& path, const Json& header,
                std::span<const double> payload);
void write_dump(const std::filesystem::path& path, const Json& header,
                std::span<const float> payload);

// Throws DataError if the file is missing or truncated, SchemaError if the
// header is not JSON.
Dump read_dump(const std::filesystem::path& path);

// Checks header["format"] == expected, throwing SchemaError otherwise.
void expect_format(const Json& header, const std::string& expected);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Lowercase hex SHA-256 of the file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace srl::io
