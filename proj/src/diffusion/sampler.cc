#include "singtrace/diffusion/sampler.h"

#include <cmath>
#include <random>
#include <string>

#include "singtrace/error.h"

namespace singtrace::diffusion {

MatrixD DenoiserPredictor::predict(const MatrixD& y_t, int t, const ConditionSet& c,
                                   EmbeddingTaps* taps) const {
  return net_.forward(y_t.cast<float>(), t, c, taps).cast<double>();
}

std::vector<int> ddim_timesteps(int T, int num_steps) {
  if (num_steps < 1 || num_steps > T) {
    throw InvalidArgument("ddim: num_steps must lie in [1, T]");
  }
  std::vector<int> ts(num_steps + 1);
  for (int i = 0; i <= num_steps; ++i) {
    ts[num_steps - i] = static_cast<int>(std::lround(static_cast<double>(i) * T / num_steps));
  }
  return ts;  // descending: T ... 0
}

std::vector<int> ddim_visited_steps(int T, int num_steps) {
  const std::vector<int> ts = ddim_timesteps(T, num_steps);
  return {ts.begin() + 1, ts.end()};
}

MatrixD gaussian_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  return m;
}

MatrixD ddim_sample(const NoisePredictor& net, const ConditionSet& c,
                    const NoiseSchedule& s, int num_steps, std::uint64_t seed,
                    const StepCallback& on_step, const SamplerOptions& opts) {
  return ddim_sample_from(net, c, s, num_steps,
                          gaussian_matrix(c.frames(), net.n_mels(), seed),
                          on_step, opts);
}

MatrixD ddim_sample_from(const NoisePredictor& net, const ConditionSet& c,
                         const NoiseSchedule& s, int num_steps, MatrixD y,
                         const StepCallback& on_step, const SamplerOptions& opts) {
  c.validate();
  if (opts.clip_x0 < 0.0) throw InvalidArgument("ddim: clip_x0 must be non-negative");
  const bool capture_taps = opts.capture_taps;
  if (y.rows() != c.frames() || y.cols() != net.n_mels()) {
    throw InvalidArgument("ddim: initial state does not match conditions/model");
  }
  const std::vector<int> ts = ddim_timesteps(s.T, num_steps);
  EmbeddingTaps taps;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const int t = ts[i];
    const int next = ts[i + 1];
    const double ab = s.alpha_bar[t];
    const double ab_next = s.alpha_bar[next];
    MatrixD eps = net.predict(y, t, c, capture_taps ? &taps : nullptr);
    MatrixD x0 = (y - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
    if (opts.clip_x0 > 0.0 && ab < 1.0) {
      x0 = x0.cwiseMax(-opts.clip_x0).cwiseMin(opts.clip_x0);
      eps = (y - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
    }
    y = std::sqrt(ab_next) * x0 + std::sqrt(1.0 - ab_next) * eps;
    if (!y.allFinite() || !x0.allFinite()) {
      throw NumericError("ddim: non-finite state at step " + std::to_string(next));
    }
    if (on_step) {
      StepRecord rec;
      rec.step = next;
      rec.model_t = t;
      rec.y = &y;
      rec.x0_hat = &x0;
      rec.taps = capture_taps ? &taps : nullptr;
      on_step(rec);
    }
  }
  return y;
}

}  // namespace singtrace::diffusion
