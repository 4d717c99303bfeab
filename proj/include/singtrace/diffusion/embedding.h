#ifndef SINGTRACE_DIFFUSION_EMBEDDING_H_
#define SINGTRACE_DIFFUSION_EMBEDDING_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "singtrace/diffusion/tensor.h"

namespace singtrace::diffusion {

enum class TapKind { kStep, kStepNoise, kStepNoiseCond };
enum class TapLayer { kFirst, kMiddle, kLast };

inline constexpr std::array<TapKind, 3> kTapKinds = {
    TapKind::kStep, TapKind::kStepNoise, TapKind::kStepNoiseCond};
inline constexpr std::array<TapLayer, 3> kTapLayers = {
    TapLayer::kFirst, TapLayer::kMiddle, TapLayer::kLast};

std::string_view to_string(TapKind kind);
std::string_view to_string(TapLayer layer);
std::optional<TapKind> parse_tap_kind(std::string_view s);
std::optional<TapLayer> parse_tap_layer(std::string_view s);

// Time-pooled activations recorded during one denoiser call. `step` is the
// raw sinusoidal step code; the other two hold one C-dim vector per tapped
// residual layer (first, ceil(N/2), N).
struct EmbeddingTaps {
  std::vector<float> step;
  std::array<std::vector<float>, 3> step_noise;
  std::array<std::vector<float>, 3> step_noise_cond;

  bool empty() const { return step.empty(); }
  const std::vector<float>& get(TapKind kind, TapLayer layer) const;
};

// One row per visited sampler step, in visit order (t descending).
struct EmbeddingSequence {
  TapKind kind = TapKind::kStep;
  TapLayer layer = TapLayer::kFirst;
  std::vector<int> steps;
  MatrixD matrix;
};

// The seven distinct (kind, layer) combinations; kStep appears once, with
// layer kFirst.
std::vector<std::pair<TapKind, TapLayer>> tap_combinations();

// Stacks per-step taps into a sequence. Throws InvalidArgument if any step
// lacks taps or the dimensions disagree.
EmbeddingSequence capture_embeddings(const std::vector<int>& steps,
                                     const std::vector<EmbeddingTaps>& taps,
                                     TapKind kind, TapLayer layer);

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_EMBEDDING_H_
