#include "singtrace/audio/cepstrum.h"

#include <cmath>
#include <numbers>

#include "singtrace/error.h"

namespace singtrace::audio {

namespace {

// Orthonormal DCT-II basis, row-major [count][n].
std::vector<double> dct_basis(int n, int count) {
  std::vector<double> basis(static_cast<std::size_t>(count) * n);
  for (int k = 0; k < count; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      basis[k * n + i] =
          scale * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
    }
  }
  return basis;
}

}  // namespace

std::vector<double> dct2(std::span<const float> x, int count) {
  const int n = static_cast<int>(x.size());
  const std::vector<double> basis = dct_basis(n, count);
  std::vector<double> out(count, 0.0);
  for (int k = 0; k < count; ++k) {
    for (int i = 0; i < n; ++i) out[k] += basis[k * n + i] * x[i];
  }
  return out;
}

CepstralSequence mel_cepstrum(const MelSpectrogram& m, int order) {
  if (order < 0 || order >= m.n_mels) {
    throw InvalidArgument("mel_cepstrum: order must lie in [0, n_mels)");
  }
  CepstralSequence c;
  c.frames = m.frames;
  c.order = order;
  c.values.assign(static_cast<std::size_t>(m.frames) * c.width(), 0.0);
  const std::vector<double> basis = dct_basis(m.n_mels, c.width());
  for (int f = 0; f < m.frames; ++f) {
    const auto row = m.row(f);
    for (int k = 0; k < c.width(); ++k) {
      double acc = 0.0;
      for (int i = 0; i < m.n_mels; ++i) acc += basis[k * m.n_mels + i] * row[i];
      c.values[static_cast<std::size_t>(f) * c.width() + k] = acc;
    }
  }
  return c;
}

MelSpectrogram inverse_mel_cepstrum(const CepstralSequence& c,
                                    const MelSpectrogram& geometry) {
  if (c.width() != geometry.n_mels || c.frames != geometry.frames) {
    throw InvalidArgument("inverse_mel_cepstrum: needs a full-order cepstrum");
  }
  const int n = geometry.n_mels;
  const std::vector<double> basis = dct_basis(n, n);
  MelSpectrogram out = geometry;
  for (int f = 0; f < c.frames; ++f) {
    const auto coeffs = c.row(f);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += basis[k * n + i] * coeffs[k];
      out.at(f, i) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace singtrace::audio
