#include "singtrace/audio/waveform.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "singtrace/error.h"

namespace singtrace::audio {

namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::string& bytes, std::size_t offset) {
  if (offset + sizeof(T) > bytes.size()) {
    throw FormatError("wav: truncated header");
  }
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void append_le(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

void validate(const Waveform& w) {
  if (w.samples.empty()) throw InvalidArgument("waveform is empty");
  if (w.sample_rate <= 0) throw InvalidArgument("waveform sample rate <= 0");
  for (float s : w.samples) {
    if (!std::isfinite(s)) throw InvalidArgument("waveform has non-finite samples");
    if (std::fabs(s) > 1.0f + 1e-6f) {
      throw InvalidArgument("waveform sample outside [-1, 1]");
    }
  }
}

float peak(const Waveform& w) {
  float p = 0.0f;
  for (float s : w.samples) p = std::max(p, std::fabs(s));
  return p;
}

void normalize_peak(Waveform& w, double level) {
  const float p = peak(w);
  if (p <= 0.0f) return;
  const float gain = static_cast<float>(level / p);
  for (float& s : w.samples) s *= gain;
}

Waveform decode_wav(const std::string& bytes, int expected_rate) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw FormatError("wav: missing RIFF/WAVE header");
  }
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const auto size = read_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      format = read_le<std::uint16_t>(bytes, body);
      channels = read_le<std::uint16_t>(bytes, body + 2);
      rate = read_le<std::uint32_t>(bytes, body + 4);
      bits = read_le<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible && size >= 26) {
        format = read_le<std::uint16_t>(bytes, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_offset = body;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw FormatError("wav: missing fmt chunk");
  if (data_offset == 0) throw FormatError("wav: missing data chunk");
  if (channels == 0) throw FormatError("wav: zero channels");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    std::ostringstream msg;
    msg << "wav: unsupported codec (format " << format << ", " << bits
        << " bits)";
    throw FormatError(msg.str());
  }
  if (static_cast<int>(rate) != expected_rate) {
    std::ostringstream msg;
    msg << "wav: sample rate " << rate << " Hz, expected " << expected_rate
        << " Hz (resampling is not supported)";
    throw FormatError(msg.str());
  }

  const std::size_t sample_bytes = bits / 8;
  const std::size_t frames = data_size / (sample_bytes * channels);
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(frames);
  const char* data = bytes.data() + data_offset;
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const char* p = data + (i * channels + c) * sample_bytes;
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += v / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += v;
      }
    }
    w.samples[i] = static_cast<float>(acc / channels);
  }
  return w;
}

Waveform load_wav(const std::string& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("wav: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_wav(buf.str(), expected_rate);
}

std::string encode_wav(const Waveform& w, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(w.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  append_le<std::uint32_t>(out, 36 + data_size);
  out += "WAVEfmt ";
  append_le<std::uint32_t>(out, 16);
  append_le<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  append_le<std::uint16_t>(out, 1);
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  append_le<std::uint32_t>(out,
                           static_cast<std::uint32_t>(w.sample_rate) * bits / 8);
  append_le<std::uint16_t>(out, bits / 8);
  append_le<std::uint16_t>(out, bits);
  out += "data";
  append_le<std::uint32_t>(out, data_size);
  for (float s : w.samples) {
    if (pcm) {
      const double scaled = std::round(std::clamp(s, -1.0f, 1.0f) * 32767.0);
      append_le<std::int16_t>(out, static_cast<std::int16_t>(scaled));
    } else {
      append_le<float>(out, s);
    }
  }
  return out;
}

void save_wav(const std::string& path, const Waveform& w, WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("wav: cannot write " + path);
  const std::string bytes = encode_wav(w, encoding);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("wav: write failed for " + path);
}

}  // namespace singtrace::audio
