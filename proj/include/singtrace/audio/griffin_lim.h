#ifndef SINGTRACE_AUDIO_GRIFFIN_LIM_H_
#define SINGTRACE_AUDIO_GRIFFIN_LIM_H_

#include <cstdint>

#include "singtrace/audio/dsp_config.h"
#include "singtrace/audio/mel.h"
#include "singtrace/audio/waveform.h"

namespace singtrace::audio {

struct GriffinLimOptions {
  int iters = 32;
  double momentum = 0.99;
  // Non-negative least-squares refinement passes after the pseudo-inverse.
  int refine_iters = 50;
  // Output peak after normalisation; <= 0 keeps the raw reconstruction.
  double peak_level = 0.95;
  std::uint64_t phase_seed = 0;
};

// Reconstructions whose raw peak falls below this are returned as silence.
inline constexpr double kSilencePeak = 1e-4;

// Mel -> linear magnitude via the filterbank pseudo-inverse (negative power
// clipped, then refined by multiplicative NNLS updates), then fast Griffin-Lim
// phase recovery. Output length is
// (frames - 1) * hop so that re-analysis yields the same frame count.
Waveform griffin_lim(const MelSpectrogram& m, const DspConfig& cfg,
                     const GriffinLimOptions& opts);
Waveform griffin_lim(const MelSpectrogram& m, const DspConfig& cfg = {});

}  // namespace singtrace::audio

#endif  // SINGTRACE_AUDIO_GRIFFIN_LIM_H_
