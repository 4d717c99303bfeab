#include "singtrace/audio/envelope.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "singtrace/error.h"

namespace singtrace::audio {

MelSpectrogram envelope_mel(const Waveform& w, const PitchContour& f0, const DspConfig& cfg) {
  int frames = 0;
  std::vector<float> power = power_spectrogram(w, cfg, &frames);
  if (static_cast<int>(f0.size()) != frames) {
    throw InvalidArgument("envelope_mel: pitch contour is not frame-aligned");
  }
  const int bins = cfg.n_bins();
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  std::vector<double> prefix(bins + 1);
  for (int f = 0; f < frames; ++f) {
    float* p = power.data() + static_cast<std::size_t>(f) * bins;
    prefix[0] = 0.0;
    for (int k = 0; k < bins; ++k) prefix[k + 1] = prefix[k] + p[k];
    const double width_hz = f0.voiced(f) ? f0.f0_hz[f] : kUnvoicedSmoothingHz;
    const double half = 0.5 * width_hz / bin_hz;
    for (int k = 0; k < bins; ++k) {
      // Fractional-edge boxcar over [k - half, k + half], clipped to the axis.
      const double lo = std::max(0.0, k - half + 0.5);
      const double hi = std::min(static_cast<double>(bins), k + half + 0.5);
      const auto area = [&](double x) {
        const int i = std::min(static_cast<int>(x), bins - 1);
        return prefix[i] + (x - i) * (prefix[i + 1] - prefix[i]);
      };
      p[k] = static_cast<float>((area(hi) - area(lo)) / std::max(hi - lo, 1e-12));
    }
  }
  return log_mel_from_power(power, frames, cfg);
}

namespace {

// Magnitude response of a Hann window, in bins from a sinusoid's frequency.
double hann_response(double d) {
  const double a = std::abs(d);
  if (a < 1e-9) return 1.0;
  if (std::abs(a - 1.0) < 1e-9) return 0.5;
  const double x = std::numbers::pi * a;
  return std::abs(std::sin(x) / (x * (1.0 - a * a)));
}

}  // namespace

MelSpectrogram harmonic_template(const PitchContour& f0, const DspConfig& cfg) {
  const int frames = static_cast<int>(f0.size());
  const int bins = cfg.n_bins();
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  constexpr double kReach = 3.0;  // bins on either side of each harmonic
  constexpr float kValley = 1e-3f;  // -30 dB between harmonics
  std::vector<float> power(static_cast<std::size_t>(frames) * bins, 0.0f);
  for (int f = 0; f < frames; ++f) {
    if (!f0.voiced(f)) continue;
    float* p = power.data() + static_cast<std::size_t>(f) * bins;
    std::fill(p, p + bins, kValley);
    const double spacing = f0.f0_hz[f] / bin_hz;
    for (double centre = spacing; centre < bins - 1; centre += spacing) {
      const int lo = std::max(0, static_cast<int>(std::ceil(centre - kReach)));
      const int hi = std::min(bins - 1, static_cast<int>(std::floor(centre + kReach)));
      for (int k = lo; k <= hi; ++k) {
        const double w = hann_response(k - centre);
        p[k] += static_cast<float>(w * w);
      }
    }
  }
  MelSpectrogram m = log_mel_from_power(power, frames, cfg);
  for (int f = 0; f < frames; ++f) {
    float* row = m.values.data() + static_cast<std::size_t>(f) * m.n_mels;
    if (!f0.voiced(f)) {
      std::fill(row, row + m.n_mels, 0.0f);
      continue;
    }
    double mean = 0.0, sq = 0.0;
    for (int k = 0; k < m.n_mels; ++k) mean += row[k];
    mean /= m.n_mels;
    for (int k = 0; k < m.n_mels; ++k) sq += (row[k] - mean) * (row[k] - mean);
    const double sd = std::sqrt(sq / m.n_mels);
    const double inv = sd > 1e-8 ? 1.0 / sd : 0.0;
    for (int k = 0; k < m.n_mels; ++k) row[k] = static_cast<float>((row[k] - mean) * inv);
  }
  return m;
}

}  // namespace singtrace::audio
