#include "singtrace/svc/pipeline.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>

#include "singtrace/audio/griffin_lim.h"
#include "singtrace/diffusion/sampler.h"
#include "singtrace/error.h"
#include "singtrace/hash.h"

namespace singtrace::svc {

namespace fs = std::filesystem;
using diffusion::MatrixD;
using diffusion::MatrixF;

void ConversionJob::validate(const Corpus& catalog, int T) const {
  if (!catalog.has_singer(source_singer)) {
    throw NotFound("unknown source singer " + std::to_string(source_singer));
  }
  if (!catalog.has_singer(target_singer)) {
    throw NotFound("unknown target singer " + std::to_string(target_singer));
  }
  if (!catalog.has_song(song)) throw NotFound("unknown song " + std::to_string(song));
  if (num_steps < 1 || num_steps > T) {
    throw InvalidArgument("num_steps must lie in [1, " + std::to_string(T) + "]");
  }
}

std::vector<int> DiffusionTrace::step_labels() const {
  std::vector<int> out;
  out.reserve(steps.size());
  for (const TraceStep& s : steps) out.push_back(s.step);
  return out;
}

int DiffusionTrace::index_of(int step) const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].step == step) return static_cast<int>(i);
  }
  return -1;
}

const TraceStep& DiffusionTrace::at_step(int step) const {
  const int i = index_of(step);
  if (i < 0) throw NotFound("step " + std::to_string(step) + " not in trace " + trace_id);
  return steps[i];
}

audio::MelSpectrogram DiffusionTrace::x0_mel(int index) const {
  const audio::MelSpectrogram geometry = audio::make_mel(frames, dsp);
  return normalizer.denormalize(steps.at(index).x0_hat.cast<double>(), geometry);
}

audio::MelSpectrogram DiffusionTrace::y_mel(int index) const {
  const audio::MelSpectrogram geometry = audio::make_mel(frames, dsp);
  return normalizer.denormalize(steps.at(index).y.cast<double>(), geometry);
}

namespace {

void hash_matrix(Fnv1a& h, const MatrixF& m) {
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  h.update(dims, sizeof(dims));
  h.update(m.data(), sizeof(float) * m.size());
}

void hash_floats(Fnv1a& h, const std::vector<float>& v) {
  const std::uint64_t n = v.size();
  h.update(&n, sizeof(n));
  h.update(v.data(), sizeof(float) * v.size());
}

}  // namespace

std::string DiffusionTrace::content_hash() const {
  Fnv1a h;
  const std::int64_t header[] = {job.source_singer, job.song, job.target_singer,
                                 job.num_steps, static_cast<std::int64_t>(job.seed),
                                 T, frames, n_mels};
  h.update(header, sizeof(header));
  h.update(checkpoint);
  h.update(alpha_bar.data(), sizeof(double) * alpha_bar.size());
  for (const TraceStep& s : steps) {
    const std::int32_t labels[2] = {s.step, s.model_t};
    h.update(labels, sizeof(labels));
    hash_matrix(h, s.y);
    hash_matrix(h, s.x0_hat);
    h.update(s.f0.f0_hz.data(), sizeof(double) * s.f0.f0_hz.size());
    hash_floats(h, s.taps.step);
    for (const auto& v : s.taps.step_noise) hash_floats(h, v);
    for (const auto& v : s.taps.step_noise_cond) hash_floats(h, v);
  }
  return h.hex();
}

std::string make_trace_id(const ConversionJob& job, const std::string& checkpoint) {
  return "s" + std::to_string(job.source_singer) + "-g" + std::to_string(job.song) + "-t" +
         std::to_string(job.target_singer) + "-n" + std::to_string(job.num_steps) + "-r" +
         std::to_string(job.seed) + "-" + checkpoint.substr(0, 8);
}

audio::Waveform load_source(const Corpus& catalog, const std::string& corpus_dir,
                            int singer_id, int song_id) {
  if (!corpus_dir.empty()) {
    for (const CorpusItem& item : catalog.items) {
      if (item.singer_id != singer_id || item.song_id != song_id) continue;
      const fs::path p = fs::path(corpus_dir) / item.wav_path;
      if (fs::exists(p)) return audio::load_wav(p.string(), catalog.sample_rate);
    }
  }
  return render_item(catalog, singer_id, song_id);
}

audio::Waveform render_mel(const audio::MelSpectrogram& mel, const audio::DspConfig& dsp) {
  return audio::griffin_lim(mel, dsp);
}

namespace {

// Applies fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(int n, int threads, Fn fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

DiffusionTrace convert(const ConversionJob& job, const diffusion::Checkpoint& ckpt,
                       const Corpus& catalog, const audio::Waveform& source,
                       const ConvertOptions& opts) {
  const diffusion::NoiseSchedule schedule = ckpt.schedule.build();
  job.validate(catalog, schedule.T);
  if (ckpt.arch.n_mels != opts.dsp.n_mels || ckpt.normalizer.n_mels() != opts.dsp.n_mels) {
    throw InvalidArgument("convert: checkpoint mel size does not match the DSP config");
  }
  if (job.target_singer > ckpt.arch.n_speakers) {
    throw InvalidArgument("convert: checkpoint has no speaker row for singer " +
                          std::to_string(job.target_singer));
  }
  const int known = static_cast<int>(ckpt.speaker_pitch.size());
  std::optional<MelodyMapping> mapping;
  if (job.source_singer <= known && job.target_singer <= known) {
    mapping = melody_mapping(ckpt.speaker_pitch, job.source_singer, job.target_singer);
  }
  const diffusion::ConditionSet cond = conditions_from_features(
      analyze_source(source, opts.dsp), job.target_singer, mapping ? &*mapping : nullptr,
      opts.dsp);

  DiffusionTrace trace;
  trace.job = job;
  trace.checkpoint = ckpt.fingerprint();
  trace.trace_id = make_trace_id(job, trace.checkpoint);
  trace.T = schedule.T;
  trace.alpha_bar = schedule.alpha_bar;
  trace.normalizer = ckpt.normalizer;
  trace.dsp = opts.dsp;
  trace.frames = cond.frames();
  trace.n_mels = ckpt.arch.n_mels;

  const diffusion::Denoiser net = ckpt.denoiser();
  const diffusion::DenoiserPredictor predictor(net);
  auto record = [&](const diffusion::StepRecord& r) {
    TraceStep s;
    s.step = r.step;
    s.model_t = r.model_t;
    s.y = r.y->cast<float>();
    s.x0_hat = r.x0_hat->cast<float>();
    if (r.taps != nullptr) s.taps = *r.taps;
    trace.steps.push_back(std::move(s));
  };
  try {
    diffusion::ddim_sample(predictor, cond, schedule, job.num_steps, job.seed, record,
                           {.capture_taps = true, .clip_x0 = opts.clip_x0});
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " (job " + make_trace_id(job, trace.checkpoint) +
                       ")");
  }

  parallel_for(static_cast<int>(trace.steps.size()), opts.render_threads, [&](int i) {
    auto& f0 = trace.steps[i].f0;
    f0 = audio::extract_f0(render_mel(trace.x0_mel(i), opts.dsp), opts.dsp);
    // Stored as float32; round here so a reloaded trace hashes identically.
    for (double& v : f0.f0_hz) v = static_cast<float>(v);
  });
  return trace;
}

diffusion::TrainingSet prepare_training(const Corpus& catalog, const std::string& corpus_dir,
                                        const audio::DspConfig& dsp) {
  std::vector<SourceFeatures> feats;
  std::vector<int> speakers;
  int max_singer = 0;
  for (const CorpusItem& item : catalog.items) {
    feats.push_back(analyze_source(load_source(catalog, corpus_dir, item.singer_id,
                                               item.song_id),
                                   dsp));
    speakers.push_back(item.singer_id);
    max_singer = std::max(max_singer, item.singer_id);
  }
  if (feats.empty()) throw InvalidArgument("prepare_training: corpus has no takes");
  std::vector<audio::MelSpectrogram> mels;
  for (const auto& f : feats) mels.push_back(f.mel);
  diffusion::TrainingSet data;
  data.normalizer = diffusion::MelNormalizer::fit(mels);
  data.speaker_pitch.resize(max_singer);
  for (int s = 1; s <= max_singer; ++s) {
    std::vector<const audio::PitchContour*> contours;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      if (speakers[i] == s) contours.push_back(&feats[i].f0);
    }
    data.speaker_pitch[s - 1] = pitch_stats(contours);
  }
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const MelodyMapping own = melody_mapping(data.speaker_pitch, speakers[i], speakers[i]);
    data.examples.push_back({data.normalizer.normalize(feats[i].mel).cast<float>(),
                             conditions_from_features(feats[i], speakers[i], &own, dsp)});
  }
  return data;
}

}  // namespace singtrace::svc
