#ifndef SINGTRACE_AUDIO_FFT_H_
#define SINGTRACE_AUDIO_FFT_H_

#include <complex>
#include <span>

namespace singtrace::audio {

// Real-to-complex FFT of a fixed size backed by FFTW. Each instance owns its
// plans and aligned buffers, so distinct instances may run concurrently.
class RealFft {
 public:
  explicit RealFft(int size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return size_; }
  int bins() const { return size_ / 2 + 1; }

  // Time-domain buffer of size() floats read by forward().
  std::span<float> time() { return {time_, static_cast<std::size_t>(size_)}; }
  // Spectrum of bins() values written by forward(), read by inverse().
  std::span<std::complex<float>> spectrum() {
    return {spectrum_, static_cast<std::size_t>(bins())};
  }

  void forward();
  // Unnormalised inverse: result is size() times the original signal. The
  // spectrum buffer is clobbered.
  void inverse();

 private:
  int size_;
  float* time_;
  std::complex<float>* spectrum_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace singtrace::audio

#endif  // SINGTRACE_AUDIO_FFT_H_
