#ifndef SINGTRACE_SVC_CONDITIONS_H_
#define SINGTRACE_SVC_CONDITIONS_H_

#include "singtrace/audio/dsp_config.h"
#include "singtrace/audio/envelope.h"
#include "singtrace/audio/mel.h"
#include "singtrace/audio/pitch.h"
#include "singtrace/audio/waveform.h"
#include "singtrace/diffusion/conditions.h"
#include "singtrace/svc/corpus.h"

namespace singtrace::svc {

// Source analysis shared by condition building and metrics.
struct SourceFeatures {
  audio::MelSpectrogram mel;
  audio::PitchContour f0;
  audio::MelSpectrogram envelope;  // pitch-adaptive, see envelope_mel
};

SourceFeatures analyze_source(const audio::Waveform& w, const audio::DspConfig& cfg = {});

// Log-F0 statistics over the voiced frames of one or more contours. With no
// voiced frame the result is {0, 1}; a zero spread is reported as 1.
diffusion::PitchStats pitch_stats(const std::vector<const audio::PitchContour*>& contours);

// Moves a source log-F0 into the target singer's register (matching
// standardised values) and expresses it on a scale shared by all singers.
struct MelodyMapping {
  diffusion::PitchStats source;
  diffusion::PitchStats target;
  diffusion::PitchStats reference;

  double operator()(double log_f0) const;
  // The source log-F0 moved into the target register.
  double target_log_f0(double log_f0) const;
};

// Reference scale: equal-weight mixture of the per-singer statistics.
diffusion::PitchStats pooled_pitch_stats(const std::vector<diffusion::PitchStats>& speakers);
// Throws InvalidArgument when either id has no statistics.
MelodyMapping melody_mapping(const std::vector<diffusion::PitchStats>& speakers,
                             int source_singer, int target_singer);

// content: cepstra c1..c20 of the spectral envelope, standardised per
// coefficient over the utterance.
// melody: [mapped log-F0, voicing flag], zeros when unvoiced. Without a
// mapping the log-F0 is standardised with the utterance's own statistics.
// excitation: harmonic_template of the target-register F0.
// speaker: table row of `target_singer` (ids start at 1).
diffusion::ConditionSet conditions_from_features(const SourceFeatures& f, int target_singer,
                                                 const MelodyMapping* mapping = nullptr,
                                                 const audio::DspConfig& cfg = {});

// Throws NotFound when `target_singer` is not in the catalog.
diffusion::ConditionSet build_conditions(const audio::Waveform& source, int target_singer,
                                         const Corpus& catalog,
                                         const audio::DspConfig& cfg = {},
                                         const MelodyMapping* mapping = nullptr);

}  // namespace singtrace::svc

#endif  // SINGTRACE_SVC_CONDITIONS_H_
