#include "singtrace/service/blob.h"

#include <bit>
#include <cstring>
#include <functional>
#include <numeric>

#include "singtrace/error.h"

namespace singtrace::service {

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'S', 'T', 'B', 'L'};
constexpr std::size_t kMaxRank = 8;
}  // namespace

std::size_t Blob::element_count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::span<const float> Blob::slice(std::size_t i) const {
  if (dims.empty() || i >= dims[0]) throw InvalidArgument("blob: slice index out of range");
  const std::size_t inner = element_count() / dims[0];
  return {data.data() + i * inner, inner};
}

std::size_t blob_header_bytes(std::size_t rank) { return 4 + 4 + 4 + 4 * rank; }

std::string encode_blob(const Blob& b) {
  if (b.dims.empty() || b.dims.size() > kMaxRank) throw InvalidArgument("blob: rank must be 1..8");
  if (b.element_count() != b.data.size()) {
    throw InvalidArgument("blob: dims do not match element count");
  }
  std::string out(blob_header_bytes(b.dims.size()) + 4 * b.data.size(), '\0');
  char* p = out.data();
  std::memcpy(p, kMagic, 4);
  const std::uint32_t head[2] = {kBlobVersion, static_cast<std::uint32_t>(b.dims.size())};
  std::memcpy(p + 4, head, 8);
  std::memcpy(p + 12, b.dims.data(), 4 * b.dims.size());
  std::memcpy(p + blob_header_bytes(b.dims.size()), b.data.data(), 4 * b.data.size());
  return out;
}

Blob decode_blob(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("blob: bad magic");
  }
  std::uint32_t head[2];
  std::memcpy(head, bytes.data() + 4, 8);
  if (head[0] != kBlobVersion) throw FormatError("blob: unsupported version");
  const std::size_t rank = head[1];
  if (rank == 0 || rank > kMaxRank || bytes.size() < blob_header_bytes(rank)) {
    throw FormatError("blob: bad rank");
  }
  Blob b;
  b.dims.resize(rank);
  std::memcpy(b.dims.data(), bytes.data() + 12, 4 * rank);
  const std::size_t n = b.element_count();
  if (bytes.size() - blob_header_bytes(rank) != 4 * n) {
    throw FormatError("blob: payload size does not match header");
  }
  b.data.resize(n);
  std::memcpy(b.data.data(), bytes.data() + blob_header_bytes(rank), 4 * n);
  return b;
}

}  // namespace singtrace::service
