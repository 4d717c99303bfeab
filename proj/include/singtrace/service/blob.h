#ifndef SINGTRACE_SERVICE_BLOB_H_
#define SINGTRACE_SERVICE_BLOB_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace singtrace::service {

// Dense float-32 tensor. On disk:
//   "STBL" | u32 version | u32 rank | rank x u32 dims | float32 LE row-major
// with product(dims) * 4 payload bytes.
struct Blob {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
  // Row `i` of the leading dimension.
  std::span<const float> slice(std::size_t i) const;
};

inline constexpr std::uint32_t kBlobVersion = 1;

std::string encode_blob(const Blob& b);
// Throws FormatError on bad magic/version or when the payload size does not
// match the header.
Blob decode_blob(const std::string& bytes);
std::size_t blob_header_bytes(std::size_t rank);

}  // namespace singtrace::service

#endif  // SINGTRACE_SERVICE_BLOB_H_
