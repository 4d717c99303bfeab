#ifndef SINGTRACE_AUDIO_PITCH_H_
#define SINGTRACE_AUDIO_PITCH_H_

#include <vector>

#include "singtrace/audio/dsp_config.h"
#include "singtrace/audio/waveform.h"

namespace singtrace::audio {

// Per-frame F0 in Hz on the mel frame grid; 0.0 marks an unvoiced frame.
struct PitchContour {
  std::vector<double> f0_hz;

  std::size_t size() const { return f0_hz.size(); }
  bool voiced(std::size_t i) const { return f0_hz[i] > 0.0; }
  std::size_t voiced_count() const;
};

// YIN: cumulative-mean-normalised difference function, absolute threshold,
// parabolic refinement. Frames without a dip below the threshold, silent
// frames and estimates outside [f0_min, f0_max] are unvoiced.
PitchContour extract_f0(const Waveform& w, const DspConfig& cfg = {});

double median_voiced_f0(const PitchContour& p);

}  // namespace singtrace::audio

#endif  // SINGTRACE_AUDIO_PITCH_H_
