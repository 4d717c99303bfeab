#include "singtrace/diffusion/checkpoint.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "singtrace/error.h"
#include "singtrace/hash.h"

namespace singtrace::diffusion {

namespace {

static_assert(std::endian::native == std::endian::little);

constexpr char kMagic[4] = {'S', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 2;
// Arch ints, pitch range, T, beta range, train_steps.
constexpr std::uint32_t kHeaderBytes = 8 * 4 + 2 * 8 + 4 + 2 * 8 + 8;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, s_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return s_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw FormatError("checkpoint: truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(kHeaderBytes);
  w.put<std::int32_t>(c.arch.n_mels);
  w.put<std::int32_t>(c.arch.channels);
  w.put<std::int32_t>(c.arch.layers);
  w.put<std::int32_t>(c.arch.dilation_cycle);
  w.put<std::int32_t>(c.arch.kernel_size);
  w.put<std::int32_t>(c.arch.n_speakers);
  w.put<std::int32_t>(c.arch.pitch_bins);
  w.put<double>(c.arch.pitch_min);
  w.put<double>(c.arch.pitch_max);
  w.put<std::int32_t>(c.arch.excitation ? 1 : 0);
  w.put<std::int32_t>(c.schedule.T);
  w.put<double>(c.schedule.beta_start);
  w.put<double>(c.schedule.beta_end);
  w.put<std::uint64_t>(c.train_steps);
  if (c.normalizer.n_mels() != c.arch.n_mels) {
    throw InvalidArgument("checkpoint: normaliser does not match n_mels");
  }
  w.raw(c.normalizer.min.data(), c.normalizer.min.size() * 4);
  w.raw(c.normalizer.max.data(), c.normalizer.max.size() * 4);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.speaker_pitch.size()));
  for (const PitchStats& p : c.speaker_pitch) {
    w.put<double>(p.mean);
    w.put<double>(p.stddev);
  }
  w.put<std::uint64_t>(c.params.size());
  w.raw(c.params.data(), c.params.size() * 4);
  return std::move(w.str());
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  if (r.get<std::uint32_t>() != kHeaderBytes) throw FormatError("checkpoint: bad header size");
  Checkpoint c;
  c.arch.n_mels = r.get<std::int32_t>();
  c.arch.channels = r.get<std::int32_t>();
  c.arch.layers = r.get<std::int32_t>();
  c.arch.dilation_cycle = r.get<std::int32_t>();
  c.arch.kernel_size = r.get<std::int32_t>();
  c.arch.n_speakers = r.get<std::int32_t>();
  c.arch.pitch_bins = r.get<std::int32_t>();
  c.arch.pitch_min = r.get<double>();
  c.arch.pitch_max = r.get<double>();
  c.arch.excitation = r.get<std::int32_t>() != 0;
  c.schedule.T = r.get<std::int32_t>();
  c.schedule.beta_start = r.get<double>();
  c.schedule.beta_end = r.get<double>();
  c.train_steps = r.get<std::uint64_t>();
  try {
    c.arch.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  c.normalizer.min.resize(c.arch.n_mels);
  c.normalizer.max.resize(c.arch.n_mels);
  r.raw(c.normalizer.min.data(), c.arch.n_mels * 4);
  r.raw(c.normalizer.max.data(), c.arch.n_mels * 4);
  const auto pitch_count = r.get<std::uint32_t>();
  if (pitch_count != 0 && pitch_count != static_cast<std::uint32_t>(c.arch.n_speakers)) {
    throw FormatError("checkpoint: pitch statistics do not match speaker count");
  }
  c.speaker_pitch.resize(pitch_count);
  for (PitchStats& p : c.speaker_pitch) {
    p.mean = r.get<double>();
    p.stddev = r.get<double>();
  }
  const auto count = r.get<std::uint64_t>();
  if (count != param_count(c.arch) || r.remaining() != count * 4) {
    throw FormatError("checkpoint: parameter blob does not match header");
  }
  c.params.resize(count);
  r.raw(c.params.data(), count * 4);
  return c;
}

std::string Checkpoint::fingerprint() const {
  return fnv1a_hex(serialize_checkpoint(*this));
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::string bytes = serialize_checkpoint(c);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("checkpoint: cannot write " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw FormatError("checkpoint: cannot move into place: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("checkpoint: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace singtrace::diffusion
