#include "singtrace/audio/mel.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "singtrace/audio/fft.h"
#include "singtrace/error.h"

namespace singtrace::audio {

namespace {

// Slaney mel scale: linear below 1 kHz, logarithmic above.
constexpr double kLinearHzPerMel = 200.0 / 3.0;
constexpr double kBreakHz = 1000.0;
constexpr double kBreakMel = kBreakHz / kLinearHzPerMel;
const double kLogStep = std::log(6.4) / 27.0;

std::vector<double> filter_edges(const DspConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min);
  const double hi = hz_to_mel(cfg.upper_frequency());
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  }
  return edges;
}

std::vector<float> periodic_hann(int n) {
  std::vector<float> w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n));
  }
  return w;
}

// Reflect about the first/last sample, as numpy.pad(mode="reflect").
std::vector<float> reflect_pad(std::span<const float> x, int pad) {
  const int n = static_cast<int>(x.size());
  if (n <= pad) throw InvalidArgument("signal too short for reflect padding");
  std::vector<float> out(n + 2 * pad);
  for (int i = 0; i < pad; ++i) out[i] = x[pad - i];
  std::copy(x.begin(), x.end(), out.begin() + pad);
  for (int i = 0; i < pad; ++i) out[pad + n + i] = x[n - 2 - i];
  return out;
}

}  // namespace

double hz_to_mel(double hz) {
  if (hz < kBreakHz) return hz / kLinearHzPerMel;
  return kBreakMel + std::log(hz / kBreakHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kBreakMel) return mel * kLinearHzPerMel;
  return kBreakHz * std::exp(kLogStep * (mel - kBreakMel));
}

MelSpectrogram make_mel(int frames, const DspConfig& cfg, float fill) {
  MelSpectrogram m;
  m.frames = frames;
  m.n_mels = cfg.n_mels;
  m.hop_length = cfg.hop_length;
  m.win_length = cfg.win_length;
  m.sample_rate = cfg.sample_rate;
  m.values.assign(static_cast<std::size_t>(frames) * cfg.n_mels, fill);
  return m;
}

int frame_count(std::size_t num_samples, const DspConfig& cfg) {
  const std::size_t padded = num_samples + 2 * (cfg.n_fft / 2);
  return 1 + static_cast<int>((padded - cfg.n_fft) / cfg.hop_length);
}

std::vector<double> mel_filterbank(const DspConfig& cfg) {
  cfg.validate();
  const int bins = cfg.n_bins();
  const std::vector<double> edges = filter_edges(cfg);
  std::vector<double> fb(static_cast<std::size_t>(cfg.n_mels) * bins, 0.0);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m];
    const double centre = edges[m + 1];
    const double right = edges[m + 2];
    const double norm = 2.0 / (right - left);
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      const double rise = (f - left) / (centre - left);
      const double fall = (right - f) / (right - centre);
      fb[m * bins + k] = norm * std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

std::vector<double> mel_center_frequencies(const DspConfig& cfg) {
  const std::vector<double> edges = filter_edges(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

std::vector<float> power_spectrogram(const Waveform& w, const DspConfig& cfg,
                                     int* frames_out) {
  cfg.validate();
  if (static_cast<int>(w.samples.size()) < cfg.win_length) {
    throw InvalidArgument("waveform shorter than one analysis window");
  }
  const int pad = cfg.n_fft / 2;
  const std::vector<float> x = reflect_pad(w.samples, pad);
  const int frames = frame_count(w.samples.size(), cfg);
  const int bins = cfg.n_bins();
  const std::vector<float> window = periodic_hann(cfg.n_fft);

  RealFft fft(cfg.n_fft);
  std::vector<float> power(static_cast<std::size_t>(frames) * bins);
  for (int f = 0; f < frames; ++f) {
    auto buf = fft.time();
    const float* src = x.data() + static_cast<std::size_t>(f) * cfg.hop_length;
    for (int i = 0; i < cfg.n_fft; ++i) buf[i] = src[i] * window[i];
    fft.forward();
    auto spec = fft.spectrum();
    float* dst = power.data() + static_cast<std::size_t>(f) * bins;
    for (int k = 0; k < bins; ++k) dst[k] = std::norm(spec[k]);
  }
  if (frames_out != nullptr) *frames_out = frames;
  return power;
}

MelSpectrogram log_mel_from_power(const std::vector<float>& power, int frames,
                                  const DspConfig& cfg) {
  const std::vector<double> fb = mel_filterbank(cfg);
  const int bins = cfg.n_bins();

  // Only the non-zero support of each triangle contributes.
  std::vector<std::pair<int, int>> support(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) {
    int lo = bins;
    int hi = 0;
    for (int k = 0; k < bins; ++k) {
      if (fb[m * bins + k] > 0.0) {
        lo = std::min(lo, k);
        hi = std::max(hi, k + 1);
      }
    }
    support[m] = {lo, std::max(lo, hi)};
  }

  MelSpectrogram out = make_mel(frames, cfg);
  for (int f = 0; f < frames; ++f) {
    const float* p = power.data() + static_cast<std::size_t>(f) * bins;
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      for (int k = support[m].first; k < support[m].second; ++k) {
        acc += fb[m * bins + k] * p[k];
      }
      out.at(f, m) = static_cast<float>(std::log(std::max(acc, cfg.log_floor)));
    }
  }
  return out;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const DspConfig& cfg) {
  int frames = 0;
  const std::vector<float> power = power_spectrogram(w, cfg, &frames);
  return log_mel_from_power(power, frames, cfg);
}

MelDiffMap mel_diff(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.frames != b.frames || a.n_mels != b.n_mels) {
    throw InvalidArgument("mel_diff: dimension mismatch");
  }
  MelDiffMap d;
  d.frames = a.frames;
  d.n_mels = a.n_mels;
  d.values.resize(a.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    d.values[i] = std::fabs(a.values[i] - b.values[i]);
    d.max_value = std::max(d.max_value, d.values[i]);
  }
  return d;
}

}  // namespace singtrace::audio
