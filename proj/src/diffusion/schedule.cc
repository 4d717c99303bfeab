#include "singtrace/diffusion/schedule.h"

#include <cmath>

#include "singtrace/error.h"

namespace singtrace::diffusion {

void NoiseSchedule::validate() const {
  if (T < 1 || static_cast<int>(alpha_bar.size()) != T + 1 ||
      static_cast<int>(betas.size()) != T + 1) {
    throw InvalidArgument("schedule: inconsistent sizes");
  }
  if (alpha_bar[0] != 1.0) throw InvalidArgument("schedule: alpha_bar[0] must be 1");
  for (int t = 1; t <= T; ++t) {
    if (!(alpha_bar[t] > 0.0 && alpha_bar[t] < alpha_bar[t - 1])) {
      throw InvalidArgument("schedule: alpha_bar must be strictly decreasing in (0, 1]");
    }
  }
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw InvalidArgument("schedule: T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw InvalidArgument("schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.betas.assign(T + 1, 0.0);
  s.alpha_bar.assign(T + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    s.betas[t] = beta_start + frac * (beta_end - beta_start);
    s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.betas[t]);
  }
  return s;
}

NoiseSchedule scaled_linear_schedule(int T) {
  if (T < 1) throw InvalidArgument("schedule: T must be >= 1");
  const double scale = 1000.0 / T;
  return make_schedule(T, 1e-4 * scale, std::min(0.02 * scale, 0.999));
}

NoiseSchedule schedule_from_alpha_bar(std::vector<double> alpha_bar) {
  if (alpha_bar.size() < 2 || alpha_bar[0] != 1.0) {
    throw InvalidArgument("schedule: alpha_bar must start at 1 and have T >= 1");
  }
  NoiseSchedule s;
  s.T = static_cast<int>(alpha_bar.size()) - 1;
  s.betas.assign(alpha_bar.size(), 0.0);
  for (int t = 1; t <= s.T; ++t) {
    if (!(alpha_bar[t] > 0.0 && alpha_bar[t] <= 1.0)) {
      throw InvalidArgument("schedule: alpha_bar values must lie in (0, 1]");
    }
    s.betas[t] = 1.0 - alpha_bar[t] / alpha_bar[t - 1];
  }
  s.alpha_bar = std::move(alpha_bar);
  return s;
}

MatrixD forward_noise(const MatrixD& y0, int t, const MatrixD& eps,
                      const NoiseSchedule& s) {
  if (y0.rows() != eps.rows() || y0.cols() != eps.cols()) {
    throw InvalidArgument("forward_noise: shape mismatch between y0 and eps");
  }
  if (t < 0 || t > s.T) throw InvalidArgument("forward_noise: step out of range");
  const double ab = s.alpha_bar[t];
  return std::sqrt(ab) * y0 + std::sqrt(1.0 - ab) * eps;
}

}  // namespace singtrace::diffusion
