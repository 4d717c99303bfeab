#ifndef SINGTRACE_DIFFUSION_TRAIN_H_
#define SINGTRACE_DIFFUSION_TRAIN_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "singtrace/diffusion/checkpoint.h"
#include "singtrace/diffusion/conditions.h"
#include "singtrace/diffusion/denoiser.h"

namespace singtrace::diffusion {

// A normalised target mel and the conditions extracted from the same take
// (self-reconstruction training).
struct TrainExample {
  MatrixF mel;
  ConditionSet conditions;
};

// Examples plus the data statistics carried into the checkpoint.
struct TrainingSet {
  std::vector<TrainExample> examples;
  MelNormalizer normalizer;
  std::vector<PitchStats> speaker_pitch;
};

struct TrainConfig {
  ArchConfig arch;
  ScheduleConfig schedule;
  int steps = 12000;
  int batch_size = 4;
  int crop_frames = 96;
  double learning_rate = 2e-3;
  double final_lr_fraction = 0.1;  // cosine decay floor
  double grad_clip = 1.0;          // global-norm clip; <= 0 disables
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double loss_smoothing = 0.98;    // EMA factor for smoothed_loss
  int checkpoint_every = 0;        // 0 disables periodic checkpoints
};

struct TrainStats {
  int step = 0;
  double loss = 0.0;
  double smoothed_loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainHooks {
  std::function<void(const TrainStats&)> on_stats;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

// MSE(eps_hat, eps) over all elements, accumulating dLoss/dparams into
// `grad` when non-null.
template <typename Scalar>
double noise_prediction_loss(const BasicDenoiser<Scalar>& net, const Matrix<Scalar>& y_t,
                             int t, const ConditionSet& c, const Matrix<Scalar>& eps,
                             std::vector<Scalar>* grad, double grad_scale = 1.0);

// Adam on the noise-prediction MSE with t ~ U{1..T} per example and random
// crops. Deterministic for a fixed seed. Throws NumericError if the loss
// becomes non-finite.
Checkpoint train(const TrainingSet& set, const TrainConfig& cfg, std::uint64_t seed,
                 const TrainHooks& hooks = {});

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_TRAIN_H_
