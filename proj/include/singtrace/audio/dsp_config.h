#ifndef SINGTRACE_AUDIO_DSP_CONFIG_H_
#define SINGTRACE_AUDIO_DSP_CONFIG_H_

namespace singtrace::audio {

// Shared analysis settings. Every feature extractor uses the same frame grid:
// frame i is centred on sample i * hop_length.
struct DspConfig {
  int sample_rate = 16000;
  int n_fft = 1024;
  int hop_length = 256;
  int win_length = 1024;
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 selects Nyquist.
  double log_floor = 1e-10;

  double f0_min = 55.0;
  double f0_max = 1400.0;
  double yin_threshold = 0.15;

  int griffin_lim_iters = 32;
  double griffin_lim_momentum = 0.99;
  double peak_level = 0.95;

  double nyquist() const { return 0.5 * sample_rate; }
  double upper_frequency() const { return f_max > 0.0 ? f_max : nyquist(); }
  int n_bins() const { return n_fft / 2 + 1; }

  // Throws InvalidArgument for inconsistent settings.
  void validate() const;
};

}  // namespace singtrace::audio

#endif  // SINGTRACE_AUDIO_DSP_CONFIG_H_
