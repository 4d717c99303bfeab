#ifndef SINGTRACE_AUDIO_WAVEFORM_H_
#define SINGTRACE_AUDIO_WAVEFORM_H_

#include <cstddef>
#include <string>
#include <vector>

namespace singtrace::audio {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws InvalidArgument unless the waveform is non-empty, finite and within
// [-1, 1] (with 1e-6 slack).
void validate(const Waveform& w);

// Scales so the absolute peak equals `level`. Silent input is returned as is.
void normalize_peak(Waveform& w, double level);

float peak(const Waveform& w);

// RIFF/WAVE reading. PCM-16 and IEEE float-32 are accepted; stereo is averaged
// to mono. A sample rate different from `expected_rate` is an error because no
// resampling is performed.
Waveform load_wav(const std::string& path, int expected_rate = 16000);
Waveform decode_wav(const std::string& bytes, int expected_rate = 16000);

enum class WavEncoding { kPcm16, kFloat32 };

std::string encode_wav(const Waveform& w,
                       WavEncoding encoding = WavEncoding::kPcm16);
void save_wav(const std::string& path, const Waveform& w,
              WavEncoding encoding = WavEncoding::kPcm16);

}  // namespace singtrace::audio

#endif  // SINGTRACE_AUDIO_WAVEFORM_H_
