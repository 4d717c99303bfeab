#include "singtrace/audio/dsp_config.h"

#include "singtrace/error.h"

namespace singtrace::audio {

void DspConfig::validate() const {
  if (sample_rate <= 0) throw InvalidArgument("dsp: sample_rate must be > 0");
  if (n_fft < 16 || (n_fft & (n_fft - 1)) != 0) {
    throw InvalidArgument("dsp: n_fft must be a power of two >= 16");
  }
  if (win_length != n_fft) {
    throw InvalidArgument("dsp: win_length must equal n_fft");
  }
  if (hop_length <= 0 || hop_length > win_length) {
    throw InvalidArgument("dsp: hop_length must lie in (0, win_length]");
  }
  if (n_mels < 2) throw InvalidArgument("dsp: n_mels must be >= 2");
  if (f_min < 0.0 || upper_frequency() > nyquist() ||
      f_min >= upper_frequency()) {
    throw InvalidArgument("dsp: invalid mel frequency range");
  }
  if (!(log_floor > 0.0)) throw InvalidArgument("dsp: log_floor must be > 0");
  if (!(f0_min > 0.0) || !(f0_max > f0_min) || f0_max >= nyquist()) {
    throw InvalidArgument("dsp: invalid F0 range");
  }
}

}  // namespace singtrace::audio
