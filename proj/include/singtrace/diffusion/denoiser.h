#ifndef SINGTRACE_DIFFUSION_DENOISER_H_
#define SINGTRACE_DIFFUSION_DENOISER_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "singtrace/diffusion/conditions.h"
#include "singtrace/diffusion/embedding.h"
#include "singtrace/diffusion/tensor.h"

namespace singtrace::diffusion {

inline constexpr int kStepCodeDim = 128;

struct ArchConfig {
  int n_mels = 80;
  int channels = 64;
  int layers = 4;
  int dilation_cycle = 4;  // Dilations 1, 2, 4, ..., 2^(cycle-1), repeating.
  int kernel_size = 3;
  int n_speakers = 4;
  // Soft pitch bins: Gaussian bumps over the melody value (column 0) at
  // evenly spaced centres in [pitch_min, pitch_max], gated by voicing.
  int pitch_bins = 64;
  double pitch_min = -3.0;
  double pitch_max = 3.0;
  // Consume ConditionSet::excitation (n_mels wide) in the condition encoder.
  bool excitation = true;

  int melody_features() const { return kMelodyDim + pitch_bins; }
  int dilation(int layer) const { return 1 << (layer % dilation_cycle); }
  // 0-based indices of the first, middle (ceil(N/2)) and last layers.
  std::array<int, 3> tapped_layers() const {
    return {0, (layers + 1) / 2 - 1, layers - 1};
  }
  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

// Sinusoidal code of an integer step: [sin(t * 10^(4i/63)), cos(...)],
// i = 0..63.
std::vector<double> step_code(int t);

// Raw melody columns followed by the soft pitch-bin encoding.
template <typename Scalar>
Matrix<Scalar> melody_features(const MatrixF& melody, const ArchConfig& arch);

// Offset and shape of one parameter tensor inside the flat parameter vector.
struct ParamSlot {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Layout of every parameter tensor for an architecture.
std::vector<ParamSlot> param_layout(const ArchConfig& arch);
std::size_t param_count(const ArchConfig& arch);

enum class OutputInit { kZero, kRandom };

// Bidirectional dilated-convolution residual denoiser (DiffWave-style):
// 1x1 input projection with ReLU, per-layer step projection added to the
// residual stream, non-causal dilated convolution plus 1x1 condition
// projection feeding a tanh/sigmoid gate, 1x1 residual/skip projection, and
// an output head over the summed skips plus a step-dependent per-channel gain
// on y_t (zero-initialised with the head). Parameters live in one flat vector
// so that optimisers and checkpoints treat them uniformly.
template <typename Scalar>
class BasicDenoiser {
 public:
  using Mat = Matrix<Scalar>;

  BasicDenoiser(const ArchConfig& arch, std::uint64_t seed,
                OutputInit output_init = OutputInit::kZero);
  BasicDenoiser(const ArchConfig& arch, std::vector<Scalar> params);

  const ArchConfig& arch() const { return arch_; }
  const std::vector<Scalar>& params() const { return params_; }
  std::vector<Scalar>& mutable_params() { return params_; }
  std::size_t param_count() const { return params_.size(); }

  // Activations kept for backward().
  struct Cache;

  // Predicts the noise in y_t (frames x n_mels). Throws InvalidArgument when
  // the condition frame count differs from y_t's. When `taps` is non-null
  // the time-pooled embeddings are recorded; when `cache` is non-null the
  // activations needed for backward() are stored.
  Mat forward(const Mat& y_t, int t, const ConditionSet& c,
              EmbeddingTaps* taps = nullptr, Cache* cache = nullptr) const;

  // Accumulates dLoss/dparams into `grad` (same layout as params()).
  void backward(const Cache& cache, const Mat& d_eps,
                std::vector<Scalar>& grad) const;

 private:
  ArchConfig arch_;
  std::vector<ParamSlot> layout_;
  std::vector<Scalar> params_;
};

template <typename Scalar>
struct BasicDenoiser<Scalar>::Cache {
  struct Layer {
    Mat h;          // residual input + step projection
    Mat z;          // pre-gate activations (frames x 2C)
    Mat gate;       // tanh * sigmoid output (frames x C)
  };
  int t = 0;
  int speaker = 0;
  Mat y;
  Mat x0_pre;       // input projection before ReLU
  std::vector<Layer> layers;
  Mat content, melody;  // melody holds melody_features()
  Mat excitation;
  Mat cond_pre;     // condition encoder before swish
  Mat cond;         // condition encoder output
  Mat skip;         // summed skips / sqrt(N)
  Mat head_pre;     // skip head before ReLU
  Mat code, fc1_pre, fc1, fc2_pre, fc2;  // 1-row step pathway
};

using Denoiser = BasicDenoiser<float>;

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_DENOISER_H_
