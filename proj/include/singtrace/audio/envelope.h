#ifndef SINGTRACE_AUDIO_ENVELOPE_H_
#define SINGTRACE_AUDIO_ENVELOPE_H_

#include "singtrace/audio/dsp_config.h"
#include "singtrace/audio/mel.h"
#include "singtrace/audio/pitch.h"
#include "singtrace/audio/waveform.h"

namespace singtrace::audio {

// Smoothing width for unvoiced frames.
inline constexpr double kUnvoicedSmoothingHz = 200.0;

// Pitch-adaptive spectral envelope on the mel grid. Each power frame is
// averaged over a rectangular window one F0 wide, which cancels the ripple of
// a harmonic comb at that F0, then projected and logged like
// mel_spectrogram. Throws InvalidArgument when `f0` is not frame-aligned.
MelSpectrogram envelope_mel(const Waveform& w, const PitchContour& f0,
                            const DspConfig& cfg = {});

// Log-mel pattern of an equal-amplitude harmonic comb at each voiced frame's
// F0, seen through the analysis window and standardised across channels.
// Unvoiced frames are zero rows.
MelSpectrogram harmonic_template(const PitchContour& f0, const DspConfig& cfg = {});

}  // namespace singtrace::audio

#endif  // SINGTRACE_AUDIO_ENVELOPE_H_
