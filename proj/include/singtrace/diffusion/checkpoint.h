#ifndef SINGTRACE_DIFFUSION_CHECKPOINT_H_
#define SINGTRACE_DIFFUSION_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "singtrace/diffusion/denoiser.h"
#include "singtrace/diffusion/normalizer.h"
#include "singtrace/diffusion/schedule.h"

namespace singtrace::diffusion {

struct ScheduleConfig {
  int T = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;

  NoiseSchedule build() const { return make_schedule(T, beta_start, beta_end); }
  bool operator==(const ScheduleConfig&) const = default;
};

// Everything needed to run conversions: architecture, schedule, mel
// normalisation and float-32 parameters.
struct Checkpoint {
  ArchConfig arch;
  ScheduleConfig schedule;
  MelNormalizer normalizer;
  // Per speaker row; used to standardise source melody at conversion time.
  std::vector<PitchStats> speaker_pitch;
  std::vector<float> params;
  std::uint64_t train_steps = 0;

  Denoiser denoiser() const { return Denoiser(arch, params); }
  // FNV-1a over the serialised bytes, as 16 hex digits.
  std::string fingerprint() const;
};

// Binary layout, little-endian:
//   "STCK" | u32 version | u32 header_bytes | header fields | normaliser
//   (2 x n_mels f32) | u32 pitch_count | pitch_count x (f64 mean, f64 std) |
//   u64 param_count | param_count x f32
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace singtrace::diffusion

#endif  // SINGTRACE_DIFFUSION_CHECKPOINT_H_
