#ifndef SINGTRACE_SERVICE_WIRE_H_
#define SINGTRACE_SERVICE_WIRE_H_

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "singtrace/service/blob.h"

namespace singtrace::service {

std::string base64_encode(std::string_view bytes);
// Throws FormatError on malformed input.
std::string base64_decode(std::string_view text);

// {"dims": [...], "dtype": "float32", "encoding": "base64", "data": "..."};
// the data field holds the little-endian float-32 bytes.
nlohmann::json matrix_envelope(const std::vector<std::uint32_t>& dims,
                               std::span<const float> values);
Blob parse_envelope(const nlohmann::json& j);

}  // namespace singtrace::service

#endif  // SINGTRACE_SERVICE_WIRE_H_
