#include "srl/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "srl/error.hpp"

namespace srl::io {

namespace {

void append_le(std::string& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((bits >> shift) & 0xFFu));
  }
}

float read_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

template <typename T>
void write_dump_impl(const std::filesystem::path& path, const Json& header,
                     std::span<const T> payload) {
  Json h = header;
  h["payload_floats"] = payload.size();
  std::string bytes = h.dump();
  bytes.push_back('\n');
  bytes.reserve(bytes.size() + payload.size() * 4);
  for (T v : payload) append_le(bytes, static_cast<float>(v));
  write_bytes(path, bytes);
}

}  // namespace

void write_dump(const std::filesystem::path& path, const Json& header,
                std::span<const double> payload) {
  write_dump_impl(path, header, payload);
}

void write_dump(const std::filesystem::path& path, const Json& header,
                std::span<const float> payload) {
  write_dump_impl(path, header, payload);
}

Dump read_dump(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) throw SchemaError("missing header line in " + path.string());
  Dump dump;
  try {
    dump.header = Json::parse(bytes.substr(0, newline));
  } catch (const Json::exception& e) {
    throw SchemaError("malformed header in " + path.string() + ": " + e.what());
  }
  const std::size_t body = bytes.size() - newline - 1;
  if (body % 4 != 0) throw DataError("payload is not a whole number of floats: " + path.string());
  const std::size_t count = body / 4;
  if (dump.header.contains("payload_floats") &&
      dump.header["payload_floats"].get<std::size_t>() != count) {
    throw DataError("truncated payload in " + path.string());
  }
  dump.payload.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + newline + 1);
  for (std::size_t i = 0; i < count; ++i) dump.payload[i] = read_le(p + 4 * i);
  return dump;
}

void expect_format(const Json& header, const std::string& expected) {
  if (!header.contains("format") || !header["format"].is_string() ||
      header["format"].get<std::string>() != expected) {
    throw SchemaError("expected a '" + expected + "' file, header says " +
                      (header.contains("format") ? header["format"].dump() : "nothing"));
  }
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw SchemaError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& value) {
  write_bytes(path, value.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, text);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
    throw Error("sha256 failed for " + path.string());
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < length; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

}  // namespace srl::io
