#ifndef SINGTRACE_DIFFUSION_SAMPLER_H_
#define SINGTRACE_DIFFUSION_SAMPLER_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "singtrace/diffusion/conditions.h"
#include "singtrace/diffusion/denoiser.h"
#include "singtrace/diffusion/embedding.h"
#include "singtrace/diffusion/schedule.h"

namespace singtrace::diffusion {

// Anything that predicts the noise in y_t at step t.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual int n_mels() const = 0;
  virtual MatrixD predict(const MatrixD& y_t, int t, const ConditionSet& c,
                          EmbeddingTaps* taps) const = 0;
};

// Adapts a trained float denoiser to the sampler's float64 state.
class DenoiserPredictor : public NoisePredictor {
 public:
  explicit DenoiserPredictor(const Denoiser& net) : net_(net) {}
  int n_mels() const override { return net_.arch().n_mels; }
  MatrixD predict(const MatrixD& y_t, int t, const ConditionSet& c,
                  EmbeddingTaps* taps) const override;

 private:
  const Denoiser& net_;
};

// One visited step. `step` labels the state produced by the update
// (t' in y_{t'}); the denoiser ran at `model_t` (> step).
struct StepRecord {
  int step = 0;
  int model_t = 0;
  const MatrixD* y = nullptr;        // y_{t'}
  const MatrixD* x0_hat = nullptr;   // clean estimate used for the update
  const EmbeddingTaps* taps = nullptr;
};

using StepCallback = std::function<void(const StepRecord&)>;

struct SamplerOptions {
  bool capture_taps = true;
  // When > 0, x0 is clipped to [-clip_x0, clip_x0] and eps re-derived from the
  // clipped estimate before the update. 0 keeps the plain update.
  double clip_x0 = 0.0;
};

// Evenly spaced step subsequence T = t_n > ... > t_0 = 0 with
// t_i = round(i * T / num_steps).
std::vector<int> ddim_timesteps(int T, int num_steps);

// Visited step labels, t_{n-1} down to t_0 = 0.
std::vector<int> ddim_visited_steps(int T, int num_steps);

// Deterministic (eta = 0) DDIM: from y_T ~ N(0, I) drawn with `seed`, each
// update predicts x0 = (y_t - sqrt(1 - ab_t) eps) / sqrt(ab_t) and moves to
// y_t' = sqrt(ab_t') x0 + sqrt(1 - ab_t') eps. Throws NumericError naming the
// step when the state becomes non-finite.
MatrixD ddim_sample(const NoisePredictor& net, const ConditionSet& c,
                    const NoiseSchedule& s, int num_steps, std::uint64_t seed,
                    const StepCallback& on_step = {}, const SamplerOptions& opts = {});

// Same, starting from an explicit y_T.
MatrixD ddim_sample_from(const NoisePredictor& net, const ConditionSet& c,
                         const NoiseSchedule& s, int num_steps, MatrixD y_T,
                         const StepCallback& on_step = {}, const SamplerOptions& opts = {});

// Standard-normal matrix from a seeded generator.
MatrixD gaussian_matrix(int rows, int cols, std::uint64_t seed);

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_SAMPLER_H_
