#ifndef SINGTRACE_DIFFUSION_CONDITIONS_H_
#define SINGTRACE_DIFFUSION_CONDITIONS_H_

#include "singtrace/diffusion/tensor.h"

namespace singtrace::diffusion {

inline constexpr int kContentDim = 20;
// Normalised log-F0 and a voicing flag.
inline constexpr int kMelodyDim = 2;

// Mean and standard deviation of log-F0 (natural log, voiced frames).
struct PitchStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool operator==(const PitchStats&) const = default;
};

// Conditioning streams for the denoiser, all on the mel frame grid.
struct ConditionSet {
  MatrixF content;  // frames x kContentDim
  MatrixF melody;   // frames x kMelodyDim
  int speaker = 0;  // Row in the speaker look-up table.
  // frames x n_mels harmonic template of the melody; may be empty.
  MatrixF excitation;

  int frames() const { return static_cast<int>(content.rows()); }
  // Throws InvalidArgument when the streams disagree on frame count.
  void validate() const;
  ConditionSet crop(int first_frame, int frames) const;
};

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_CONDITIONS_H_
