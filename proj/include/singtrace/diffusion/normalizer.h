#ifndef SINGTRACE_DIFFUSION_NORMALIZER_H_
#define SINGTRACE_DIFFUSION_NORMALIZER_H_

#include <vector>

#include "singtrace/audio/mel.h"
#include "singtrace/diffusion/tensor.h"

namespace singtrace::diffusion {

// Per-channel affine map of log-mel values from the corpus [min, max] range
// onto [-1, 1].
struct MelNormalizer {
  std::vector<float> min;
  std::vector<float> max;

  static MelNormalizer fit(const std::vector<audio::MelSpectrogram>& corpus);

  int n_mels() const { return static_cast<int>(min.size()); }
  MatrixD normalize(const audio::MelSpectrogram& m) const;
  // Inverse map. With `clamp`, values are first limited to [-1, 1], which
  // keeps early-step estimates inside the corpus range for rendering.
  audio::MelSpectrogram denormalize(const MatrixD& x, const audio::MelSpectrogram& geometry,
                                    bool clamp = true) const;
};

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_NORMALIZER_H_
