#ifndef SINGTRACE_SVC_CORPUS_H_
#define SINGTRACE_SVC_CORPUS_H_

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "singtrace/audio/waveform.h"

namespace singtrace::svc {

struct Formant {
  double frequency_hz = 0.0;
  double bandwidth_hz = 0.0;
};

struct SingerSpec {
  int singer_id = 0;
  // Scales every note's F0; low registers < 1 < high registers.
  double register_multiplier = 1.0;
  std::array<Formant, 3> formants{};
  double tilt_db_per_octave = -12.0;
  double vibrato_rate_hz = 5.5;
  double vibrato_depth_cents = 30.0;

  void validate() const;
};

struct Note {
  int midi = 57;
  double duration_ms = 300.0;
};

struct SongSpec {
  int song_id = 0;
  std::vector<Note> notes;

  double duration_ms() const;
  void validate() const;
};

inline constexpr double kMaxSongMs = 6000.0;
// Silence rendered before the first and after the last note.
inline constexpr double kEdgeSilenceMs = 100.0;

double midi_to_hz(double midi);

// Source-filter rendering: band-limited glottal pulse train (harmonic sum with
// the singer's spectral tilt) at note F0 times the register multiplier, with
// vibrato and note envelopes, passed through three formant resonators. The
// seed drives vibrato phase, pitch jitter and breath noise, so different seeds
// give different takes. Output is peak-normalised to 0.95.
audio::Waveform synth_singer(const SingerSpec& singer, const SongSpec& song,
                             std::uint64_t seed, int sample_rate = 16000);

struct CorpusItem {
  int singer_id = 0;
  int song_id = 0;
  std::string wav_path;  // Relative to the corpus directory.
};

struct Corpus {
  std::uint64_t seed = 0;
  int sample_rate = 16000;
  std::vector<SingerSpec> singers;
  std::vector<SongSpec> songs;
  std::vector<CorpusItem> items;

  const SingerSpec& singer(int id) const;
  const SongSpec& song(int id) const;
  bool has_singer(int id) const;
  bool has_song(int id) const;
  // Seed used to render the corpus take of (singer, song).
  std::uint64_t take_seed(int singer_id, int song_id) const;
};

struct CorpusOptions {
  int n_singers = 4;
  int n_songs = 4;
  std::uint64_t seed = 1234;
  double song_ms = 3000.0;
};

// Deterministic catalog: odd singer ids sing in a low register, even ids in a
// high one. Songs are random walks around A3 with 150-450 ms notes.
Corpus make_catalog(const CorpusOptions& opts);

// Renders every singer x song waveform into `dir` and writes manifest.json.
Corpus build_corpus(const CorpusOptions& opts, const std::string& dir);

audio::Waveform render_item(const Corpus& corpus, int singer_id, int song_id);

std::string manifest_json(const Corpus& corpus);
Corpus parse_manifest(const std::string& text);
Corpus load_corpus(const std::string& dir);

}  // namespace singtrace::svc

#endif  // SINGTRACE_SVC_CORPUS_H_
