#ifndef SINGTRACE_AUDIO_MEL_H_
#define SINGTRACE_AUDIO_MEL_H_

#include <span>
#include <vector>

#include "singtrace/audio/dsp_config.h"
#include "singtrace/audio/waveform.h"

namespace singtrace::audio {

// Frame-major log-mel matrix: values[frame * n_mels + channel].
struct MelSpectrogram {
  int frames = 0;
  int n_mels = 0;
  int hop_length = 256;
  int win_length = 1024;
  int sample_rate = 16000;
  std::vector<float> values;

  float& at(int frame, int channel) { return values[frame * n_mels + channel]; }
  float at(int frame, int channel) const {
    return values[frame * n_mels + channel];
  }
  std::span<const float> row(int frame) const {
    return {values.data() + static_cast<std::size_t>(frame) * n_mels,
            static_cast<std::size_t>(n_mels)};
  }
  std::span<float> row(int frame) {
    return {values.data() + static_cast<std::size_t>(frame) * n_mels,
            static_cast<std::size_t>(n_mels)};
  }
};

// Builds an empty spectrogram with the geometry of `cfg`.
MelSpectrogram make_mel(int frames, const DspConfig& cfg, float fill = 0.0f);

// Frame count of a waveform of `num_samples` after reflect-padding n_fft / 2
// on both sides: 1 + floor((num_samples + 2 * (n_fft / 2) - n_fft) / hop).
int frame_count(std::size_t num_samples, const DspConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Slaney-normalised triangular filters, row-major [n_mels][n_fft / 2 + 1].
std::vector<double> mel_filterbank(const DspConfig& cfg);

// Centre frequency (Hz) of each filterbank channel.
std::vector<double> mel_center_frequencies(const DspConfig& cfg);

// Power STFT frames with a periodic Hann window and reflect padding,
// row-major [frames][n_fft / 2 + 1].
std::vector<float> power_spectrogram(const Waveform& w, const DspConfig& cfg,
                                     int* frames_out);

// Mel projection of power frames laid out as power_spectrogram returns them,
// then log(max(mel power, log_floor)).
MelSpectrogram log_mel_from_power(const std::vector<float>& power, int frames,
                                  const DspConfig& cfg);

// log(max(mel power, log_floor)).
MelSpectrogram mel_spectrogram(const Waveform& w, const DspConfig& cfg = {});

// Element-wise absolute difference; throws on dimension mismatch.
struct MelDiffMap {
  int frames = 0;
  int n_mels = 0;
  std::vector<float> values;
  float max_value = 0.0f;  // Upper end of the colour scale (warm end).
};

MelDiffMap mel_diff(const MelSpectrogram& a, const MelSpectrogram& b);

}  // namespace singtrace::audio

#endif  // SINGTRACE_AUDIO_MEL_H_
