#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cftle {

/// Separator line between the JSON header and the little-endian float64
/// payload in field and policy files.
inline constexpr const char *kBinaryMarker = "---BINARY---\n";

struct HeaderedPayload {
  nlohmann::json header;
  std::vector<double> payload;
};

/// Writes `header`, a newline, the marker line and the payload, atomically
/// (temporary file + rename).
void writeHeaderedBinary(const std::filesystem::path &path, const nlohmann::json &header,
                         std::span<const double> payload);

/// Reads a file written by writeHeaderedBinary. `expected_values` is derived
/// from the header by the caller and checked against the payload size.
HeaderedPayload readHeaderedBinary(const std::filesystem::path &path);

/// Writes bytes atomically.
void writeFileAtomic(const std::filesystem::path &path, std::string_view bytes);

std::string readTextFile(const std::filesystem::path &path);

/// 64-bit FNV-1a, used for config provenance hashes.
std::uint64_t fnv1a(std::string_view bytes);
std::string hexDigest(std::uint64_t h);

}  // namespace cftle
