#include "singtrace/audio/fft.h"

#include <fftw3.h>

#include <mutex>

#include "singtrace/error.h"

namespace singtrace::audio {

namespace {

// FFTW's planner is not re-entrant; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(int size) : size_(size) {
  if (size < 2 || size % 2 != 0) throw InvalidArgument("fft size must be even");
  std::lock_guard<std::mutex> lock(planner_mutex());
  time_ = fftwf_alloc_real(size);
  spectrum_ = reinterpret_cast<std::complex<float>*>(
      fftwf_alloc_complex(size / 2 + 1));
  auto* spec = reinterpret_cast<fftwf_complex*>(spectrum_);
  forward_plan_ = fftwf_plan_dft_r2c_1d(size, time_, spec, FFTW_ESTIMATE);
  inverse_plan_ = fftwf_plan_dft_c2r_1d(size, spec, time_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftwf_destroy_plan(static_cast<fftwf_plan>(forward_plan_));
  fftwf_destroy_plan(static_cast<fftwf_plan>(inverse_plan_));
  fftwf_free(time_);
  fftwf_free(spectrum_);
}

void RealFft::forward() { fftwf_execute(static_cast<fftwf_plan>(forward_plan_)); }

void RealFft::inverse() { fftwf_execute(static_cast<fftwf_plan>(inverse_plan_)); }

}  // namespace singtrace::audio
