#include "singtrace/diffusion/embedding.h"

#include "singtrace/error.h"

namespace singtrace::diffusion {

std::string_view to_string(TapKind kind) {
  switch (kind) {
    case TapKind::kStep: return "step";
    case TapKind::kStepNoise: return "step_noise";
    case TapKind::kStepNoiseCond: return "step_noise_cond";
  }
  return "?";
}

std::string_view to_string(TapLayer layer) {
  switch (layer) {
    case TapLayer::kFirst: return "first";
    case TapLayer::kMiddle: return "middle";
    case TapLayer::kLast: return "last";
  }
  return "?";
}

std::optional<TapKind> parse_tap_kind(std::string_view s) {
  for (TapKind k : kTapKinds) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<TapLayer> parse_tap_layer(std::string_view s) {
  for (TapLayer l : kTapLayers) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

const std::vector<float>& EmbeddingTaps::get(TapKind kind, TapLayer layer) const {
  const auto slot = static_cast<std::size_t>(layer);
  switch (kind) {
    case TapKind::kStep: return step;
    case TapKind::kStepNoise: return step_noise[slot];
    case TapKind::kStepNoiseCond: return step_noise_cond[slot];
  }
  return step;
}

std::vector<std::pair<TapKind, TapLayer>> tap_combinations() {
  std::vector<std::pair<TapKind, TapLayer>> out = {{TapKind::kStep, TapLayer::kFirst}};
  for (TapKind k : {TapKind::kStepNoise, TapKind::kStepNoiseCond}) {
    for (TapLayer l : kTapLayers) out.emplace_back(k, l);
  }
  return out;
}

EmbeddingSequence capture_embeddings(const std::vector<int>& steps,
                                     const std::vector<EmbeddingTaps>& taps,
                                     TapKind kind, TapLayer layer) {
  if (steps.size() != taps.size() || steps.empty()) {
    throw InvalidArgument("capture_embeddings: need one tap set per visited step");
  }
  EmbeddingSequence seq;
  seq.kind = kind;
  seq.layer = kind == TapKind::kStep ? TapLayer::kFirst : layer;
  seq.steps = steps;
  const std::size_t dim = taps.front().get(kind, layer).size();
  if (dim == 0) throw InvalidArgument("capture_embeddings: trace lacks taps");
  seq.matrix.resize(static_cast<Eigen::Index>(taps.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const auto& v = taps[i].get(kind, layer);
    if (v.size() != dim) throw InvalidArgument("capture_embeddings: trace lacks taps");
    for (std::size_t j = 0; j < dim; ++j) seq.matrix(i, j) = v[j];
  }
  return seq;
}

}  // namespace singtrace::diffusion
