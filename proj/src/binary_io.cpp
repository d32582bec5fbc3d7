#include "cftle/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cftle/types.hpp"

namespace cftle {

namespace fs = std::filesystem;

namespace {

std::uint64_t toLittle(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return r;
  }
}

}  // namespace

void writeFileAtomic(const fs::path &path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string readTextFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void writeHeaderedBinary(const fs::path &path, const nlohmann::json &header, std::span<const double> payload) {
  std::string bytes = header.dump(2);
  bytes += '\n';
  bytes += kBinaryMarker;
  const std::size_t offset = bytes.size();
  bytes.resize(offset + payload.size() * 8);
  for (std::size_t n = 0; n < payload.size(); ++n) {
    const std::uint64_t le = toLittle(std::bit_cast<std::uint64_t>(payload[n]));
    std::memcpy(bytes.data() + offset + 8 * n, &le, 8);
  }
  writeFileAtomic(path, bytes);
}

HeaderedPayload readHeaderedBinary(const fs::path &path) {
  const std::string bytes = readTextFile(path);
  const std::string marker = std::string("\n") + kBinaryMarker;
  const auto pos = bytes.find(marker);
  if (pos == std::string::npos)
    throw IoError("'" + path.string() + "': missing ---BINARY--- marker line");
  HeaderedPayload out;
  try {
    out.header = nlohmann::json::parse(bytes.substr(0, pos));
  } catch (const nlohmann::json::exception &e) {
    throw IoError("'" + path.string() + "': malformed header: " + e.what());
  }
  if (!out.header.is_object()) throw IoError("'" + path.string() + "': header is not a JSON object");
  const std::size_t offset = pos + marker.size();
  const std::size_t n_bytes = bytes.size() - offset;
  if (n_bytes % 8 != 0)
    throw IoError("'" + path.string() + "': payload size " + std::to_string(n_bytes) +
                  " is not a multiple of 8 bytes");
  out.payload.resize(n_bytes / 8);
  for (std::size_t n = 0; n < out.payload.size(); ++n) {
    std::uint64_t le;
    std::memcpy(&le, bytes.data() + offset + 8 * n, 8);
    out.payload[n] = std::bit_cast<double>(toLittle(le));
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hexDigest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace cftle
