#ifndef SINGTRACE_AUDIO_CEPSTRUM_H_
#define SINGTRACE_AUDIO_CEPSTRUM_H_

#include <span>
#include <vector>

#include "singtrace/audio/mel.h"

namespace singtrace::audio {

inline constexpr int kMcdOrder = 13;

// Mel cepstra: row-major [frames][order + 1], column 0 holds c0.
struct CepstralSequence {
  int frames = 0;
  int order = 0;
  std::vector<double> values;

  int width() const { return order + 1; }
  std::span<const double> row(int frame) const {
    return {values.data() + static_cast<std::size_t>(frame) * width(),
            static_cast<std::size_t>(width())};
  }
};

// Orthonormal DCT-II of each log-mel frame, keeping c0..c_order.
// order must lie in [0, n_mels - 1].
CepstralSequence mel_cepstrum(const MelSpectrogram& m, int order = kMcdOrder);

// Orthonormal DCT-II of one vector, keeping `count` coefficients.
std::vector<double> dct2(std::span<const float> x, int count);

// Inverse of a full-order cepstrum (order = n_mels - 1) back to log-mel.
MelSpectrogram inverse_mel_cepstrum(const CepstralSequence& c,
                                    const MelSpectrogram& geometry);

}  // namespace singtrace::audio

#endif  // SINGTRACE_AUDIO_CEPSTRUM_H_
