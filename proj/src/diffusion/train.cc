#include "singtrace/diffusion/train.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "singtrace/error.h"

namespace singtrace::diffusion {

template <typename Scalar>
double noise_prediction_loss(const BasicDenoiser<Scalar>& net, const Matrix<Scalar>& y_t,
                             int t, const ConditionSet& c, const Matrix<Scalar>& eps,
                             std::vector<Scalar>* grad, double grad_scale) {
  typename BasicDenoiser<Scalar>::Cache cache;
  const Matrix<Scalar> eps_hat = net.forward(y_t, t, c, nullptr, grad ? &cache : nullptr);
  const Matrix<Scalar> diff = eps_hat - eps;
  const double n = static_cast<double>(diff.size());
  const double loss = diff.template cast<double>().squaredNorm() / n;
  if (grad != nullptr) {
    const Matrix<Scalar> d_eps = diff * static_cast<Scalar>(2.0 * grad_scale / n);
    net.backward(cache, d_eps, *grad);
  }
  return loss;
}

template double noise_prediction_loss<float>(const BasicDenoiser<float>&, const MatrixF&, int,
                                             const ConditionSet&, const MatrixF&,
                                             std::vector<float>*, double);
template double noise_prediction_loss<double>(const BasicDenoiser<double>&, const MatrixD&, int,
                                              const ConditionSet&, const MatrixD&,
                                              std::vector<double>*, double);

Checkpoint train(const TrainingSet& set, const TrainConfig& cfg, std::uint64_t seed,
                 const TrainHooks& hooks) {
  const std::vector<TrainExample>& data = set.examples;
  if (data.empty()) throw InvalidArgument("train: empty dataset");
  if (set.normalizer.n_mels() != cfg.arch.n_mels) {
    throw InvalidArgument("train: normaliser does not match the architecture");
  }
  if (cfg.steps < 1 || cfg.batch_size < 1 || cfg.crop_frames < 1) {
    throw InvalidArgument("train: steps, batch size and crop length must be positive");
  }
  for (const TrainExample& ex : data) {
    ex.conditions.validate();
    if (ex.mel.cols() != cfg.arch.n_mels || ex.mel.rows() != ex.conditions.frames()) {
      throw InvalidArgument("train: example mel does not match conditions/architecture");
    }
  }
  const NoiseSchedule schedule = cfg.schedule.build();
  Denoiser net(cfg.arch, seed ^ 0xA5A5A5A5ull);
  std::vector<float>& params = net.mutable_params();
  const std::size_t n = params.size();
  std::vector<float> grad(n), m(n, 0.0f), v(n, 0.0f);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(data.size()) - 1);
  std::uniform_int_distribution<int> step_dist(1, schedule.T);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto snapshot = [&](int step) {
    Checkpoint c;
    c.arch = cfg.arch;
    c.schedule = cfg.schedule;
    c.normalizer = set.normalizer;
    c.speaker_pitch = set.speaker_pitch;
    c.params = params;
    c.train_steps = static_cast<std::uint64_t>(step);
    return c;
  };

  double ema = 0.0;
  double ema_weight = 0.0;
  for (int step = 1; step <= cfg.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0f);
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const TrainExample& ex = data[pick(rng)];
      const int frames = static_cast<int>(ex.mel.rows());
      const int len = std::min(cfg.crop_frames, frames);
      const int start = std::uniform_int_distribution<int>(0, frames - len)(rng);
      const int t = step_dist(rng);
      MatrixD eps(len, cfg.arch.n_mels);
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = gauss(rng);
      const MatrixD y0 = ex.mel.middleRows(start, len).cast<double>();
      const MatrixF y_t = forward_noise(y0, t, eps, schedule).cast<float>();
      loss += noise_prediction_loss<float>(net, y_t, t, ex.conditions.crop(start, len),
                                           eps.cast<float>(), &grad, 1.0 / cfg.batch_size) /
              cfg.batch_size;
    }
    if (!std::isfinite(loss)) {
      throw NumericError("train: loss diverged (non-finite) at step " + std::to_string(step));
    }

    double norm2 = 0.0;
    for (float g : grad) norm2 += static_cast<double>(g) * g;
    const double grad_norm = std::sqrt(norm2);
    if (!std::isfinite(grad_norm)) {
      throw NumericError("train: non-finite gradient at step " + std::to_string(step));
    }
    const double clip = (cfg.grad_clip > 0.0 && grad_norm > cfg.grad_clip)
                            ? cfg.grad_clip / grad_norm
                            : 1.0;

    const double progress = static_cast<double>(step - 1) / std::max(1, cfg.steps - 1);
    const double lr = cfg.learning_rate *
                      (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * 0.5 *
                                                   (1.0 + std::cos(std::numbers::pi * progress)));
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    const auto b1 = static_cast<float>(cfg.beta1);
    const auto b2 = static_cast<float>(cfg.beta2);
    const auto step_size = static_cast<float>(lr / bc1);
    const auto inv_bc2 = static_cast<float>(1.0 / bc2);
    const auto eps_adam = static_cast<float>(cfg.adam_epsilon);
    const auto clip_f = static_cast<float>(clip);
    for (std::size_t i = 0; i < n; ++i) {
      const float g = grad[i] * clip_f;
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      params[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + eps_adam);
    }

    ema = cfg.loss_smoothing * ema + (1.0 - cfg.loss_smoothing) * loss;
    ema_weight = cfg.loss_smoothing * ema_weight + (1.0 - cfg.loss_smoothing);
    if (hooks.on_stats) hooks.on_stats({step, loss, ema / ema_weight, grad_norm});
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 &&
        step != cfg.steps) {
      hooks.on_checkpoint(snapshot(step));
    }
  }
  Checkpoint final = snapshot(cfg.steps);
  if (hooks.on_checkpoint) hooks.on_checkpoint(final);
  return final;
}

}  // namespace singtrace::diffusion
