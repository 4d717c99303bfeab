#ifndef SINGTRACE_DIFFUSION_SCHEDULE_H_
#define SINGTRACE_DIFFUSION_SCHEDULE_H_

#include <vector>

#include "singtrace/diffusion/tensor.h"

namespace singtrace::diffusion {

// Index t runs over 0..T. alpha_bar[0] = 1 is the clean state and
// alpha_bar[t] = prod_{s <= t} (1 - betas[s]); betas[0] is unused (zero).
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;
  std::vector<double> alpha_bar;

  // Throws InvalidArgument unless alpha_bar[0] == 1, values lie in (0, 1]
  // and alpha_bar is strictly decreasing.
  void validate() const;
};

// Linear beta ramp from beta_start (step 1) to beta_end (step T).
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

// The 1e-4 -> 0.02 ramp of a 1000-step schedule, rescaled by 1000 / T.
NoiseSchedule scaled_linear_schedule(int T);

// Builds a schedule from explicit cumulative weights (alpha_bar[0] must be 1).
// Strict monotonicity is not enforced so that degenerate weights can be
// injected in tests.
NoiseSchedule schedule_from_alpha_bar(std::vector<double> alpha_bar);

// y_t = sqrt(alpha_bar_t) * y0 + sqrt(1 - alpha_bar_t) * eps.
MatrixD forward_noise(const MatrixD& y0, int t, const MatrixD& eps,
                      const NoiseSchedule& s);

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_SCHEDULE_H_
