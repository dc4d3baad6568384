#pragma once
// Serialization helpers shared by the library and the command-line tool:
// base64 for bit streams, fixed "%.17g" number formatting so emitted CSV
// round-trips doubles exactly, a small CSV assembler, and the FNV-1a hash
// used to fingerprint configurations.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "maglab/errors.hpp"

namespace maglab {

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
  static const char table[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= data.size()) {
    const std::uint32_t v = (std::uint32_t(data[i]) << 16) |
                            (std::uint32_t(data[i + 1]) << 8) | data[i + 2];
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(table[(v >> 6) & 63]);
    out.push_back(table[v & 63]);
    i += 3;
  }
  const std::size_t rest = data.size() - i;
  if (rest == 1) {
    const std::uint32_t v = std::uint32_t(data[i]) << 16;
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rest == 2) {
    const std::uint32_t v =
        (std::uint32_t(data[i]) << 16) | (std::uint32_t(data[i + 1]) << 8);
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(table[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0)
    throw validation_error("base64", "length must be a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        if (i + 4 != text.size() || j < 2)
          throw validation_error("base64", "misplaced padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0) throw validation_error("base64", "data after padding");
      const int x = value(c);
      if (x < 0)
        throw validation_error("base64",
                               std::string("invalid character '") + c + "'");
      v = (v << 6) | std::uint32_t(x);
    }
    out.push_back(std::uint8_t((v >> 16) & 255));
    if (pad < 2) out.push_back(std::uint8_t((v >> 8) & 255));
    if (pad < 1) out.push_back(std::uint8_t(v & 255));
  }
  return out;
}

// Shortest representation that still round-trips an IEEE double.
inline std::string format_number(double x) {
  if (!std::isfinite(x))
    throw invariant_error("io.finite", "refusing to serialize a non-finite");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Minimal CSV assembly: fixed header, cells pre-rendered as strings.  Cells
// containing separators are rejected instead of quoted; every emitted file
// stays in the simple comma/newline dialect.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells) {
    if (cells.size() != header.size())
      throw invariant_error("csv.width", "row width differs from header");
    rows.push_back(std::move(cells));
  }

  std::string to_string() const {
    std::string out;
    auto append_line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string& c = cells[i];
        if (c.find_first_of(",\"\n\r") != std::string::npos)
          throw invariant_error("csv.cell", "cell contains a separator");
        if (i) out.push_back(',');
        out += c;
      }
      out.push_back('\n');
    };
    append_line(header);
    for (const auto& r : rows) append_line(r);
    return out;
  }
};

// FNV-1a, the 64-bit variant; used to fingerprint configuration bytes.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string fnv1a_hex(const std::string& bytes) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

}  // namespace maglab
