#include "singtrace/svc/corpus.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "singtrace/error.h"

namespace singtrace::svc {

namespace {

using nlohmann::json;

constexpr double kAttackMs = 20.0;
constexpr double kReleaseMs = 40.0;
constexpr double kNoteGapMs = 25.0;
constexpr double kPortamentoMs = 25.0;
constexpr double kBreathLevel = 0.004;
constexpr double kNoiseFloor = 2e-4;

// Klatt-style two-pole resonator with unity gain at DC.
class Resonator {
 public:
  Resonator(double freq, double bw, int rate) {
    const double r = std::exp(-std::numbers::pi * bw / rate);
    b_ = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / rate);
    c_ = -r * r;
    a_ = 1.0 - b_ - c_;
  }
  double process(double x) {
    const double y = a_ * x + b_ * y1_ + c_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a_, b_, c_;
  double y1_ = 0.0, y2_ = 0.0;
};

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  return h * 0xBF58476D1CE4E5B9ull;
}

struct Archetype {
  std::array<Formant, 3> formants;
  double tilt;
};

// Four distinct vocal-tract shapes cycled across singer ids.
constexpr std::array<Archetype, 4> kArchetypes = {{
    {{{{650, 80}, {1100, 90}, {2500, 120}}}, -12.0},
    {{{{850, 90}, {1650, 110}, {2950, 150}}}, -9.0},
    {{{{500, 70}, {950, 90}, {2300, 110}}}, -14.0},
    {{{{950, 100}, {1900, 120}, {3300, 170}}}, -10.0},
}};

}  // namespace

double midi_to_hz(double midi) { return 440.0 * std::pow(2.0, (midi - 69.0) / 12.0); }

void SingerSpec::validate() const {
  if (!(register_multiplier >= 0.5 && register_multiplier <= 2.0)) {
    throw InvalidArgument("singer: register multiplier outside [0.5, 2.0]");
  }
  for (std::size_t i = 0; i < formants.size(); ++i) {
    if (!(formants[i].frequency_hz > 0.0) || !(formants[i].bandwidth_hz > 0.0)) {
      throw InvalidArgument("singer: formants need positive frequency and bandwidth");
    }
    if (i > 0 && !(formants[i].frequency_hz > formants[i - 1].frequency_hz)) {
      throw InvalidArgument("singer: formants must be strictly increasing");
    }
  }
  if (vibrato_rate_hz < 0.0 || vibrato_depth_cents < 0.0) {
    throw InvalidArgument("singer: negative vibrato parameters");
  }
}

double SongSpec::duration_ms() const {
  double total = 0.0;
  for (const Note& n : notes) total += n.duration_ms;
  return total;
}

void SongSpec::validate() const {
  if (notes.empty()) throw InvalidArgument("song: no notes");
  for (const Note& n : notes) {
    if (n.midi < 36 || n.midi > 84) throw InvalidArgument("song: pitch outside [36, 84]");
    if (n.duration_ms < 80.0) throw InvalidArgument("song: note shorter than 80 ms");
  }
  if (duration_ms() + 2.0 * kEdgeSilenceMs > kMaxSongMs) {
    throw InvalidArgument("song: longer than 6 s");
  }
}

audio::Waveform synth_singer(const SingerSpec& singer, const SongSpec& song,
                             std::uint64_t seed, int sample_rate) {
  singer.validate();
  song.validate();
  std::mt19937_64 rng(mix(seed, 0x5157));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double ms = sample_rate / 1000.0;
  const auto edge = static_cast<std::size_t>(kEdgeSilenceMs * ms);
  const auto body = static_cast<std::size_t>(song.duration_ms() * ms);
  const std::size_t total = body + 2 * edge;

  // Per-sample target log-F0 and amplitude envelope.
  std::vector<double> target_log_f0(total, 0.0);
  std::vector<double> envelope(total, 0.0);
  std::size_t pos = edge;
  double first_log_f0 = 0.0;
  for (std::size_t n = 0; n < song.notes.size(); ++n) {
    const Note& note = song.notes[n];
    const auto len = static_cast<std::size_t>(note.duration_ms * ms);
    const double log_f0 = std::log(midi_to_hz(note.midi) * singer.register_multiplier);
    if (n == 0) first_log_f0 = log_f0;
    const double attack = kAttackMs * ms;
    const double release = kReleaseMs * ms;
    const double sounding = std::max(attack + release, len - kNoteGapMs * ms);
    const double level = 0.8 + 0.2 * uniform(rng);
    for (std::size_t i = 0; i < len && pos + i < total; ++i) {
      target_log_f0[pos + i] = log_f0;
      const double t = static_cast<double>(i);
      double env = 0.0;
      if (t < attack) {
        env = 0.5 - 0.5 * std::cos(std::numbers::pi * t / attack);
      } else if (t < sounding - release) {
        env = 1.0;
      } else if (t < sounding) {
        env = 0.5 + 0.5 * std::cos(std::numbers::pi * (t - (sounding - release)) / release);
      }
      envelope[pos + i] = level * env;
    }
    pos += len;
  }
  for (std::size_t i = 0; i < edge; ++i) target_log_f0[i] = first_log_f0;
  for (std::size_t i = pos; i < total; ++i) target_log_f0[i] = target_log_f0[pos - 1];

  const double vib_phase0 = 2.0 * std::numbers::pi * uniform(rng);
  const double vib_rate = singer.vibrato_rate_hz * (0.95 + 0.1 * uniform(rng));
  const double glide = 1.0 - std::exp(-1.0 / (kPortamentoMs * ms));
  const double jitter_step = 0.3 / std::sqrt(ms);  // cents per sample, random walk
  const double tilt_exponent = singer.tilt_db_per_octave / (20.0 * std::log10(2.0));
  const double nyquist_guard = 0.45 * sample_rate;

  std::vector<Resonator> tract;
  for (const Formant& f : singer.formants) {
    tract.emplace_back(f.frequency_hz, f.bandwidth_hz, sample_rate);
  }

  std::vector<double> out(total, 0.0);
  double log_f0 = target_log_f0[0];
  double jitter_cents = 0.0;
  double phase = 0.0;
  double breath_lp = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    log_f0 += glide * (target_log_f0[i] - log_f0);
    jitter_cents = 0.999 * jitter_cents + jitter_step * gauss(rng);
    const double t = static_cast<double>(i) / sample_rate;
    const double vib_cents = singer.vibrato_depth_cents *
                             std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase0);
    const double f0 = std::exp(log_f0) * std::pow(2.0, (vib_cents + jitter_cents) / 1200.0);
    phase += 2.0 * std::numbers::pi * f0 / sample_rate;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;

    double source = 0.0;
    if (envelope[i] > 0.0) {
      const std::complex<double> step = std::polar(1.0, phase);
      std::complex<double> z = step;
      for (int k = 1; k * f0 < nyquist_guard; ++k) {
        source += std::pow(static_cast<double>(k), tilt_exponent) * z.imag();
        z *= step;
      }
    }
    breath_lp = 0.7 * breath_lp + 0.3 * gauss(rng);
    double x = envelope[i] * (source + kBreathLevel * breath_lp * 4.0);
    for (Resonator& r : tract) x = r.process(x);
    out[i] = x + kNoiseFloor * gauss(rng);
  }

  audio::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(out.begin(), out.end());
  audio::normalize_peak(w, 0.95);
  return w;
}

const SingerSpec& Corpus::singer(int id) const {
  for (const SingerSpec& s : singers) {
    if (s.singer_id == id) return s;
  }
  throw NotFound("unknown singer id " + std::to_string(id));
}

const SongSpec& Corpus::song(int id) const {
  for (const SongSpec& s : songs) {
    if (s.song_id == id) return s;
  }
  throw NotFound("unknown song id " + std::to_string(id));
}

bool Corpus::has_singer(int id) const {
  return std::any_of(singers.begin(), singers.end(),
                     [id](const SingerSpec& s) { return s.singer_id == id; });
}

bool Corpus::has_song(int id) const {
  return std::any_of(songs.begin(), songs.end(),
                     [id](const SongSpec& s) { return s.song_id == id; });
}

std::uint64_t Corpus::take_seed(int singer_id, int song_id) const {
  return mix(mix(seed, static_cast<std::uint64_t>(singer_id)),
             static_cast<std::uint64_t>(song_id) + 0x100);
}

Corpus make_catalog(const CorpusOptions& opts) {
  if (opts.n_singers < 2 || opts.n_songs < 2) {
    throw InvalidArgument("corpus: need at least two singers and two songs");
  }
  if (opts.song_ms + 2.0 * kEdgeSilenceMs > kMaxSongMs) {
    throw InvalidArgument("corpus: songs longer than 6 s");
  }
  Corpus c;
  c.seed = opts.seed;
  std::mt19937_64 rng(mix(opts.seed, 0xC0));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  for (int id = 1; id <= opts.n_singers; ++id) {
    const Archetype& arch = kArchetypes[(id - 1) % kArchetypes.size()];
    SingerSpec s;
    s.singer_id = id;
    const bool low = id % 2 == 1;
    s.register_multiplier = low ? 0.72 + 0.08 * uniform(rng) : 1.30 + 0.15 * uniform(rng);
    const double scale = 0.96 + 0.08 * uniform(rng);
    for (std::size_t k = 0; k < 3; ++k) {
      s.formants[k] = {arch.formants[k].frequency_hz * scale,
                       arch.formants[k].bandwidth_hz * (0.9 + 0.2 * uniform(rng))};
    }
    s.tilt_db_per_octave = arch.tilt + uniform(rng) - 0.5;
    s.vibrato_rate_hz = 4.8 + 1.4 * uniform(rng);
    s.vibrato_depth_cents = 20.0 + 25.0 * uniform(rng);
    c.singers.push_back(s);
  }

  std::uniform_int_distribution<int> start(-3, 3);
  std::uniform_int_distribution<int> leap(-4, 4);
  std::uniform_real_distribution<double> dur(150.0, 450.0);
  const double body_ms = opts.song_ms - 2.0 * kEdgeSilenceMs;
  for (int id = 1; id <= opts.n_songs; ++id) {
    SongSpec song;
    song.song_id = id;
    int pitch = 57 + start(rng);
    double used = 0.0;
    while (used < body_ms) {
      double d = std::round(dur(rng));
      if (body_ms - used - d < 80.0) d = body_ms - used;
      if (d < 80.0) {
        song.notes.back().duration_ms += d;
        break;
      }
      song.notes.push_back({pitch, d});
      used += d;
      int next = pitch;
      while (next == pitch) next = std::clamp(pitch + leap(rng), 50, 64);
      pitch = next;
    }
    c.songs.push_back(song);
  }

  for (const SingerSpec& s : c.singers) {
    for (const SongSpec& song : c.songs) {
      std::ostringstream name;
      name << "singer" << s.singer_id << "_song" << song.song_id << ".wav";
      c.items.push_back({s.singer_id, song.song_id, name.str()});
    }
  }
  return c;
}

audio::Waveform render_item(const Corpus& corpus, int singer_id, int song_id) {
  return synth_singer(corpus.singer(singer_id), corpus.song(song_id),
                      corpus.take_seed(singer_id, song_id), corpus.sample_rate);
}

Corpus build_corpus(const CorpusOptions& opts, const std::string& dir) {
  namespace fs = std::filesystem;
  Corpus c = make_catalog(opts);
  fs::create_directories(dir);
  for (const CorpusItem& item : c.items) {
    audio::save_wav((fs::path(dir) / item.wav_path).string(),
                    render_item(c, item.singer_id, item.song_id));
  }
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
  out << manifest_json(c) << "\n";
  if (!out) throw FormatError("corpus: cannot write manifest in " + dir);
  return c;
}

std::string manifest_json(const Corpus& c) {
  json j;
  j["format"] = "singtrace-corpus";
  j["version"] = 1;
  j["seed"] = c.seed;
  j["sample_rate"] = c.sample_rate;
  for (const SingerSpec& s : c.singers) {
    json formants = json::array();
    for (const Formant& f : s.formants) {
      formants.push_back({{"frequency_hz", f.frequency_hz}, {"bandwidth_hz", f.bandwidth_hz}});
    }
    j["singers"].push_back({{"singer_id", s.singer_id},
                            {"register_multiplier", s.register_multiplier},
                            {"formants", formants},
                            {"tilt_db_per_octave", s.tilt_db_per_octave},
                            {"vibrato_rate_hz", s.vibrato_rate_hz},
                            {"vibrato_depth_cents", s.vibrato_depth_cents}});
  }
  for (const SongSpec& song : c.songs) {
    json notes = json::array();
    for (const Note& n : song.notes) notes.push_back({n.midi, n.duration_ms});
    j["songs"].push_back({{"song_id", song.song_id}, {"notes", notes}});
  }
  for (const CorpusItem& item : c.items) {
    j["items"].push_back({{"singer_id", item.singer_id},
                          {"song_id", item.song_id},
                          {"wav", item.wav_path}});
  }
  return j.dump(2);
}

Corpus parse_manifest(const std::string& text) {
  Corpus c;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "singtrace-corpus") throw FormatError("manifest: wrong format tag");
    c.seed = j.at("seed").get<std::uint64_t>();
    c.sample_rate = j.at("sample_rate").get<int>();
    for (const json& s : j.at("singers")) {
      SingerSpec spec;
      spec.singer_id = s.at("singer_id").get<int>();
      spec.register_multiplier = s.at("register_multiplier").get<double>();
      for (std::size_t k = 0; k < 3; ++k) {
        spec.formants[k] = {s.at("formants").at(k).at("frequency_hz").get<double>(),
                            s.at("formants").at(k).at("bandwidth_hz").get<double>()};
      }
      spec.tilt_db_per_octave = s.at("tilt_db_per_octave").get<double>();
      spec.vibrato_rate_hz = s.at("vibrato_rate_hz").get<double>();
      spec.vibrato_depth_cents = s.at("vibrato_depth_cents").get<double>();
      spec.validate();
      c.singers.push_back(spec);
    }
    for (const json& s : j.at("songs")) {
      SongSpec song;
      song.song_id = s.at("song_id").get<int>();
      for (const json& n : s.at("notes")) {
        song.notes.push_back({n.at(0).get<int>(), n.at(1).get<double>()});
      }
      song.validate();
      c.songs.push_back(song);
    }
    for (const json& item : j.at("items")) {
      c.items.push_back({item.at("singer_id").get<int>(), item.at("song_id").get<int>(),
                         item.at("wav").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return c;
}

Corpus load_corpus(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / "manifest.json");
  if (!in) throw NotFound("corpus: no manifest in " + dir);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

}  // namespace singtrace::svc
