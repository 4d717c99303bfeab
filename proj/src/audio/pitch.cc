#include "singtrace/audio/pitch.h"

#include <algorithm>
#include <cmath>

#include "singtrace/audio/fft.h"
#include "singtrace/audio/mel.h"
#include "singtrace/error.h"

namespace singtrace::audio {

namespace {

// Mean-square level under which a frame is treated as silence.
constexpr double kSilenceMeanSquare = 1e-6;  // -60 dBFS

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

std::size_t PitchContour::voiced_count() const {
  return static_cast<std::size_t>(
      std::count_if(f0_hz.begin(), f0_hz.end(), [](double f) { return f > 0.0; }));
}

PitchContour extract_f0(const Waveform& w, const DspConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(w.samples.size()) < cfg.win_length) {
    throw InvalidArgument("extract_f0: waveform shorter than one window");
  }
  const int window = cfg.win_length;
  const int min_lag = std::max(2, static_cast<int>(std::floor(cfg.sample_rate / cfg.f0_max)));
  const int max_lag = static_cast<int>(std::ceil(cfg.sample_rate / cfg.f0_min));
  const int span = window + max_lag + 1;
  const int n = next_pow2(span);
  const int frames = frame_count(w.samples.size(), cfg);
  const int num_samples = static_cast<int>(w.samples.size());

  RealFft seg_fft(n);
  RealFft ref_fft(n);
  std::vector<double> segment(span);
  std::vector<double> prefix(span + 1);
  std::vector<double> cmnd(max_lag + 2);
  std::vector<std::complex<float>> seg_spec(seg_fft.bins());

  PitchContour out;
  out.f0_hz.assign(frames, 0.0);
  for (int f = 0; f < frames; ++f) {
    // Analysis segment starts half a window before the frame centre.
    const int start = f * cfg.hop_length - window / 2;
    for (int i = 0; i < span; ++i) {
      const int idx = start + i;
      segment[i] = (idx >= 0 && idx < num_samples) ? w.samples[idx] : 0.0;
    }
    prefix[0] = 0.0;
    for (int i = 0; i < span; ++i) prefix[i + 1] = prefix[i] + segment[i] * segment[i];
    const double energy0 = prefix[window];
    if (energy0 / window < kSilenceMeanSquare) continue;

    // r(lag) = sum_{j < window} x[j] * x[j + lag] via one cross-spectrum.
    auto seg_time = seg_fft.time();
    auto ref_time = ref_fft.time();
    std::fill(seg_time.begin(), seg_time.end(), 0.0f);
    std::fill(ref_time.begin(), ref_time.end(), 0.0f);
    for (int i = 0; i < span; ++i) seg_time[i] = static_cast<float>(segment[i]);
    for (int i = 0; i < window; ++i) ref_time[i] = static_cast<float>(segment[i]);
    seg_fft.forward();
    ref_fft.forward();
    auto a = ref_fft.spectrum();
    auto b = seg_fft.spectrum();
    for (int k = 0; k < seg_fft.bins(); ++k) b[k] = std::conj(a[k]) * b[k];
    seg_fft.inverse();
    const auto corr = seg_fft.time();

    cmnd[0] = 1.0;
    double running = 0.0;
    for (int lag = 1; lag <= max_lag + 1 && lag < span - window + 1; ++lag) {
      const double energy_lag = prefix[lag + window] - prefix[lag];
      const double r = static_cast<double>(corr[lag]) / n;
      const double d = std::max(0.0, energy0 + energy_lag - 2.0 * r);
      running += d;
      cmnd[lag] = running > 0.0 ? d * lag / running : 1.0;
    }

    int best = -1;
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      if (cmnd[lag] < cfg.yin_threshold) {
        while (lag + 1 <= max_lag && cmnd[lag + 1] < cmnd[lag]) ++lag;
        best = lag;
        break;
      }
    }
    if (best < 0) continue;

    double period = best;
    if (best > 1 && best < max_lag + 1) {
      const double left = cmnd[best - 1];
      const double mid = cmnd[best];
      const double right = cmnd[best + 1];
      const double denom = left - 2.0 * mid + right;
      if (denom > 0.0) {
        period = best + std::clamp(0.5 * (left - right) / denom, -1.0, 1.0);
      }
    }
    const double f0 = cfg.sample_rate / period;
    if (f0 >= cfg.f0_min && f0 <= cfg.f0_max) out.f0_hz[f] = f0;
  }
  return out;
}

double median_voiced_f0(const PitchContour& p) {
  std::vector<double> v;
  for (double f : p.f0_hz) {
    if (f > 0.0) v.push_back(f);
  }
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

}  // namespace singtrace::audio
