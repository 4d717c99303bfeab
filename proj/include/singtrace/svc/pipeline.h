#ifndef SINGTRACE_SVC_PIPELINE_H_
#define SINGTRACE_SVC_PIPELINE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "singtrace/audio/dsp_config.h"
#include "singtrace/audio/mel.h"
#include "singtrace/audio/pitch.h"
#include "singtrace/audio/waveform.h"
#include "singtrace/diffusion/checkpoint.h"
#include "singtrace/diffusion/embedding.h"
#include "singtrace/diffusion/train.h"
#include "singtrace/svc/conditions.h"
#include "singtrace/svc/corpus.h"

namespace singtrace::svc {

struct ConversionJob {
  int source_singer = 1;
  int song = 1;
  int target_singer = 1;
  int num_steps = 100;
  std::uint64_t seed = 0;

  // Throws NotFound for ids missing from the catalog, InvalidArgument for a
  // step count outside [1, T].
  void validate(const Corpus& catalog, int T) const;
  bool operator==(const ConversionJob&) const = default;
};

struct TraceStep {
  int step = 0;     // label of y_step
  int model_t = 0;  // denoiser step used to produce it
  diffusion::MatrixF y;       // normalised
  diffusion::MatrixF x0_hat;  // normalised
  audio::PitchContour f0;     // of the Griffin-Lim render of x0_hat
  diffusion::EmbeddingTaps taps;
};

struct DiffusionTrace {
  std::string trace_id;
  ConversionJob job;
  std::string checkpoint;  // checkpoint fingerprint
  int T = 0;
  std::vector<double> alpha_bar;  // T + 1 entries
  diffusion::MelNormalizer normalizer;
  audio::DspConfig dsp;
  int frames = 0;
  int n_mels = 0;
  std::vector<TraceStep> steps;  // strictly decreasing step labels, last is 0

  std::vector<int> step_labels() const;
  // Index of `step` in `steps`, or -1.
  int index_of(int step) const;
  const TraceStep& at_step(int step) const;  // throws NotFound
  const diffusion::MatrixF& final_mel() const { return steps.back().y; }

  // Denormalised (clamped) log-mel of a step's x0 estimate or state.
  audio::MelSpectrogram x0_mel(int index) const;
  audio::MelSpectrogram y_mel(int index) const;

  // FNV-1a over job, schedule and every per-step payload.
  std::string content_hash() const;
};

// Deterministic id from the job and checkpoint fingerprint.
std::string make_trace_id(const ConversionJob& job, const std::string& checkpoint);

struct ConvertOptions {
  audio::DspConfig dsp;
  int render_threads = 0;  // 0: hardware concurrency
  double clip_x0 = 1.0;    // normalised mels live in [-1, 1]
};

// Corpus take from `corpus_dir` when the file exists, else re-synthesised.
audio::Waveform load_source(const Corpus& catalog, const std::string& corpus_dir,
                            int singer_id, int song_id);

// Griffin-Lim render of a denormalised mel with the trace's phase seed.
audio::Waveform render_mel(const audio::MelSpectrogram& mel, const audio::DspConfig& dsp);

// Runs the sampler on conditions from `source` and the target singer,
// recording every visited step. When the checkpoint holds pitch statistics
// for both singers the source melody is moved into the target's register.
// Sampler failures are rethrown with the job appended.
DiffusionTrace convert(const ConversionJob& job, const diffusion::Checkpoint& ckpt,
                       const Corpus& catalog, const audio::Waveform& source,
                       const ConvertOptions& opts = {});

// Self-reconstruction pairs: each take's own conditions (speaker = its
// singer, melody on the shared register scale) and
// normalised mel.
diffusion::TrainingSet prepare_training(const Corpus& catalog, const std::string& corpus_dir,
                              const audio::DspConfig& dsp = {});

}  // namespace singtrace::svc

#endif  // SINGTRACE_SVC_PIPELINE_H_
