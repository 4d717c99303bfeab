#include "singtrace/service/wire.h"

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cctype>
#include <cstring>

#include "singtrace/error.h"

namespace singtrace::service {

namespace it = boost::archive::iterators;

std::string base64_encode(std::string_view bytes) {
  using Enc = it::base64_from_binary<it::transform_width<const char*, 6, 8>>;
  std::string out(Enc(bytes.data()), Enc(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("base64: length is not a multiple of 4");
  std::size_t pad = 0;
  while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
  const std::string_view body = text.substr(0, text.size() - pad);
  for (char c : body) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '/') {
      throw FormatError("base64: invalid character");
    }
  }
  using Dec = it::transform_width<it::binary_from_base64<const char*>, 8, 6>;
  std::string out(Dec(body.data()), Dec(body.data() + body.size()));
  out.resize(text.size() / 4 * 3 - pad);
  return out;
}

nlohmann::json matrix_envelope(const std::vector<std::uint32_t>& dims,
                               std::span<const float> values) {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  if (dims.empty() || n != values.size()) {
    throw InvalidArgument("envelope: dims do not match the value count");
  }
  return {{"dims", dims},
          {"dtype", "float32"},
          {"encoding", "base64"},
          {"data", base64_encode(std::string_view(reinterpret_cast<const char*>(values.data()),
                                                  values.size() * sizeof(float)))}};
}

Blob parse_envelope(const nlohmann::json& j) {
  try {
    if (j.at("dtype") != "float32" || j.at("encoding") != "base64") {
      throw FormatError("envelope: unsupported dtype or encoding");
    }
    Blob b;
    b.dims = j.at("dims").get<std::vector<std::uint32_t>>();
    const std::string raw = base64_decode(j.at("data").get<std::string>());
    if (raw.size() != 4 * b.element_count()) {
      throw FormatError("envelope: payload size does not match dims");
    }
    b.data.resize(b.element_count());
    std::memcpy(b.data.data(), raw.data(), raw.size());
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("envelope: ") + e.what());
  }
}

}  // namespace singtrace::service
