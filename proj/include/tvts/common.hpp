#pragma once

#include <cstdint>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tvts {

// Error taxonomy. The CLI maps these onto its exit-code table.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error { using Error::Error; };      // dimension mismatches
struct ConfigError : Error { using Error::Error; };     // invalid configuration
struct NumericError : Error { using Error::Error; };    // NaN/Inf where finiteness is required
struct RangeError : Error { using Error::Error; };      // window/index out of range
struct SamplingError : Error { using Error::Error; };   // no frame in segment, etc.
struct EmptyTranscriptError : SamplingError { using SamplingError::SamplingError; };
struct VocabError : Error { using Error::Error; };
struct LabelError : Error { using Error::Error; };      // bad permutation / label set
struct ContractError : Error { using Error::Error; };   // internal contract violated
struct DataError : Error { using Error::Error; };       // corpus unusable for request
struct IoError : Error { using Error::Error; };
struct CheckpointError : Error { using Error::Error; }; // version / truncation / checksum / shape
struct TrainAbort : Error { using Error::Error; };      // non-finite loss abort

inline std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ']';
  return os.str();
}

// FNV-1a, used for parameter fingerprints and seed derivation.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}
inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

// CRC-32 (IEEE), used by the checkpoint payload checksum.
inline uint32_t crc32_update(uint32_t crc, const void* data, size_t n) {
  static const uint32_t table = 0xEDB88320u;
  const auto* p = static_cast<const unsigned char*>(data);
  crc = ~crc;
  for (size_t i = 0; i < n; ++i) {
    crc ^= p[i];
    for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (table & (0u - (crc & 1u)));
  }
  return ~crc;
}
inline uint32_t crc32(const void* data, size_t n) { return crc32_update(0u, data, n); }

}  // namespace tvts
