#include "singtrace/audio/griffin_lim.h"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <tuple>

#include "singtrace/audio/fft.h"
#include "singtrace/error.h"

namespace singtrace::audio {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FilterbankInverse {
  Eigen::SparseMatrix<float, Eigen::RowMajor> filterbank;  // [n_mels][bins]
  RowMatrix pinv;         // [bins][n_mels]
};

// Filterbank and its pseudo-inverse, shared per analysis geometry.
std::shared_ptr<const FilterbankInverse> filterbank_inverse(const DspConfig& cfg) {
  using Key = std::tuple<int, int, int, double, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const FilterbankInverse>> cache;
  const Key key{cfg.sample_rate, cfg.n_fft, cfg.n_mels, cfg.f_min,
                cfg.upper_frequency()};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const std::vector<double> fb = mel_filterbank(cfg);
  const Eigen::Map<const RowMatrix> fb_map(fb.data(), cfg.n_mels, cfg.n_bins());
  auto inv = std::make_shared<FilterbankInverse>();
  inv->filterbank = fb_map.cast<float>().sparseView();
  inv->pinv = fb_map.completeOrthogonalDecomposition().pseudoInverse();
  cache.emplace(key, inv);
  return inv;
}

class Stft {
 public:
  explicit Stft(const DspConfig& cfg)
      : cfg_(cfg), fft_(cfg.n_fft), window_(cfg.n_fft) {
    for (int i = 0; i < cfg.n_fft; ++i) {
      window_[i] = static_cast<float>(
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.n_fft));
    }
  }

  // Centred analysis of `x` (reflect padding), spectra row-major [frames][bins].
  void analyze(const std::vector<float>& x, int frames,
               std::vector<std::complex<float>>& out) {
    const int pad = cfg_.n_fft / 2;
    const int n = static_cast<int>(x.size());
    const int bins = cfg_.n_bins();
    out.resize(static_cast<std::size_t>(frames) * bins);
    for (int f = 0; f < frames; ++f) {
      auto buf = fft_.time();
      for (int i = 0; i < cfg_.n_fft; ++i) {
        int idx = f * cfg_.hop_length + i - pad;
        if (idx < 0) idx = -idx;
        if (idx >= n) idx = 2 * (n - 1) - idx;
        idx = std::clamp(idx, 0, n - 1);
        buf[i] = x[idx] * window_[i];
      }
      fft_.forward();
      auto spec = fft_.spectrum();
      std::copy(spec.begin(), spec.end(),
                out.begin() + static_cast<std::ptrdiff_t>(f) * bins);
    }
  }

  // Weighted overlap-add inverse, trimmed to (frames - 1) * hop samples.
  std::vector<float> synthesize(const std::vector<std::complex<float>>& spectra,
                                int frames) {
    const int bins = cfg_.n_bins();
    const int pad = cfg_.n_fft / 2;
    const int full = cfg_.n_fft + (frames - 1) * cfg_.hop_length;
    std::vector<double> acc(full, 0.0);
    std::vector<double> norm(full, 0.0);
    const float scale = 1.0f / cfg_.n_fft;
    for (int f = 0; f < frames; ++f) {
      auto spec = fft_.spectrum();
      std::copy(spectra.begin() + static_cast<std::ptrdiff_t>(f) * bins,
                spectra.begin() + static_cast<std::ptrdiff_t>(f + 1) * bins,
                spec.begin());
      fft_.inverse();
      auto buf = fft_.time();
      const int offset = f * cfg_.hop_length;
      for (int i = 0; i < cfg_.n_fft; ++i) {
        acc[offset + i] += buf[i] * scale * window_[i];
        norm[offset + i] += static_cast<double>(window_[i]) * window_[i];
      }
    }
    const int length = (frames - 1) * cfg_.hop_length;
    std::vector<float> out(length);
    for (int i = 0; i < length; ++i) {
      const double nrm = norm[i + pad];
      out[i] = nrm > 1e-8 ? static_cast<float>(acc[i + pad] / nrm) : 0.0f;
    }
    return out;
  }

 private:
  DspConfig cfg_;
  RealFft fft_;
  std::vector<float> window_;
};

}  // namespace

Waveform griffin_lim(const MelSpectrogram& m, const DspConfig& cfg) {
  GriffinLimOptions opts;
  opts.iters = cfg.griffin_lim_iters;
  opts.momentum = cfg.griffin_lim_momentum;
  opts.peak_level = cfg.peak_level;
  return griffin_lim(m, cfg, opts);
}

Waveform griffin_lim(const MelSpectrogram& m, const DspConfig& cfg,
                     const GriffinLimOptions& opts) {
  cfg.validate();
  if (m.n_mels != cfg.n_mels) throw InvalidArgument("griffin_lim: n_mels mismatch");
  if (m.frames < 2) throw InvalidArgument("griffin_lim: need at least two frames");
  if (opts.iters < 1) throw InvalidArgument("griffin_lim: iters must be >= 1");
  for (float v : m.values) {
    if (!std::isfinite(v)) throw InvalidArgument("griffin_lim: non-finite mel");
  }

  const int frames = m.frames;
  const int bins = cfg.n_bins();
  const auto inverse = filterbank_inverse(cfg);

  // Linear magnitude target, row-major [frames][bins].
  RowMatrix mel_power(frames, cfg.n_mels);
  for (int f = 0; f < frames; ++f) {
    for (int c = 0; c < cfg.n_mels; ++c) {
      mel_power(f, c) = std::exp(std::min<double>(m.at(f, c), 40.0));
    }
  }
  const RowMatrix linear = mel_power * inverse->pinv.transpose();
  // Multiplicative non-negative least-squares refinement of the clipped
  // pseudo-inverse; it removes the inter-harmonic energy the minimum-norm
  // solution spreads below the resolution of the mel filters.
  RowMatrixF lin = linear.cwiseMax(0.0).cast<float>();
  if (opts.refine_iters > 0) {
    const auto& fb = inverse->filterbank;
    const RowMatrixF numerator = mel_power.cast<float>() * fb;
    lin.array() += 1e-12f;
    for (int it = 0; it < opts.refine_iters; ++it) {
      const RowMatrixF mel_estimate = lin * fb.transpose();
      const RowMatrixF denom = mel_estimate * fb;
      lin.array() *= numerator.array() / (denom.array() + 1e-30f);
    }
  }
  std::vector<float> magnitude(static_cast<std::size_t>(frames) * bins);
  for (int f = 0; f < frames; ++f) {
    for (int k = 0; k < bins; ++k) {
      magnitude[f * bins + k] =
          static_cast<float>(std::sqrt(std::max(0.0f, lin(f, k))));
    }
  }

  std::mt19937_64 rng(opts.phase_seed);
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  std::vector<std::complex<float>> angles(magnitude.size());
  for (auto& a : angles) {
    a = std::polar(1.0f, static_cast<float>(2.0 * std::numbers::pi) * uniform(rng));
  }

  Stft stft(cfg);
  std::vector<std::complex<float>> spectra(magnitude.size());
  std::vector<std::complex<float>> rebuilt;
  std::vector<std::complex<float>> previous(magnitude.size());
  const float accel = static_cast<float>(opts.momentum / (1.0 + opts.momentum));
  std::vector<float> signal;
  for (int it = 0; it < opts.iters; ++it) {
    for (std::size_t i = 0; i < spectra.size(); ++i) spectra[i] = magnitude[i] * angles[i];
    signal = stft.synthesize(spectra, frames);
    stft.analyze(signal, frames, rebuilt);
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const std::complex<float> a = rebuilt[i] - accel * previous[i];
      angles[i] = a / (std::abs(a) + 1e-16f);
    }
    previous.swap(rebuilt);
  }
  for (std::size_t i = 0; i < spectra.size(); ++i) spectra[i] = magnitude[i] * angles[i];

  Waveform out;
  out.sample_rate = cfg.sample_rate;
  out.samples = stft.synthesize(spectra, frames);
  if (opts.peak_level > 0.0) {
    if (peak(out) < kSilencePeak) {
      std::fill(out.samples.begin(), out.samples.end(), 0.0f);
    } else {
      normalize_peak(out, opts.peak_level);
    }
  }
  return out;
}

}  // namespace singtrace::audio
