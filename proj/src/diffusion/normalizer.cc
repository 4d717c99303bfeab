#include "singtrace/diffusion/normalizer.h"

#include <algorithm>
#include <limits>

#include "singtrace/error.h"

namespace singtrace::diffusion {

namespace {
constexpr float kMinRange = 1e-3f;
}

MelNormalizer MelNormalizer::fit(const std::vector<audio::MelSpectrogram>& corpus) {
  if (corpus.empty()) throw InvalidArgument("normalizer: empty corpus");
  const int n = corpus.front().n_mels;
  MelNormalizer norm;
  norm.min.assign(n, std::numeric_limits<float>::infinity());
  norm.max.assign(n, -std::numeric_limits<float>::infinity());
  for (const auto& m : corpus) {
    if (m.n_mels != n) throw InvalidArgument("normalizer: n_mels differs across corpus");
    for (int f = 0; f < m.frames; ++f) {
      for (int c = 0; c < n; ++c) {
        norm.min[c] = std::min(norm.min[c], m.at(f, c));
        norm.max[c] = std::max(norm.max[c], m.at(f, c));
      }
    }
  }
  for (int c = 0; c < n; ++c) {
    if (norm.max[c] - norm.min[c] < kMinRange) norm.max[c] = norm.min[c] + kMinRange;
  }
  return norm;
}

MatrixD MelNormalizer::normalize(const audio::MelSpectrogram& m) const {
  if (m.n_mels != n_mels()) throw InvalidArgument("normalizer: n_mels mismatch");
  MatrixD x(m.frames, m.n_mels);
  for (int f = 0; f < m.frames; ++f) {
    for (int c = 0; c < m.n_mels; ++c) {
      x(f, c) = 2.0 * (m.at(f, c) - min[c]) / (static_cast<double>(max[c]) - min[c]) - 1.0;
    }
  }
  return x;
}

audio::MelSpectrogram MelNormalizer::denormalize(const MatrixD& x,
                                                 const audio::MelSpectrogram& geometry,
                                                 bool clamp) const {
  if (x.cols() != n_mels()) throw InvalidArgument("normalizer: n_mels mismatch");
  audio::MelSpectrogram m = geometry;
  m.frames = static_cast<int>(x.rows());
  m.n_mels = n_mels();
  m.values.resize(static_cast<std::size_t>(m.frames) * m.n_mels);
  for (int f = 0; f < m.frames; ++f) {
    for (int c = 0; c < m.n_mels; ++c) {
      double v = x(f, c);
      if (clamp) v = std::clamp(v, -1.0, 1.0);
      m.at(f, c) = static_cast<float>(min[c] + 0.5 * (v + 1.0) * (static_cast<double>(max[c]) - min[c]));
    }
  }
  return m;
}

}  // namespace singtrace::diffusion
