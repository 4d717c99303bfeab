#include "singtrace/svc/conditions.h"

#include <cmath>
#include <string>

#include "singtrace/audio/cepstrum.h"
#include "singtrace/audio/envelope.h"
#include "singtrace/error.h"

namespace singtrace::svc {

using diffusion::ConditionSet;
using diffusion::kContentDim;
using diffusion::kMelodyDim;

SourceFeatures analyze_source(const audio::Waveform& w, const audio::DspConfig& cfg) {
  SourceFeatures f{audio::mel_spectrogram(w, cfg), audio::extract_f0(w, cfg), {}};
  f.envelope = audio::envelope_mel(w, f.f0, cfg);
  return f;
}

diffusion::PitchStats pitch_stats(const std::vector<const audio::PitchContour*>& contours) {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (const audio::PitchContour* p : contours) {
    for (double f : p->f0_hz) {
      if (f <= 0.0) continue;
      const double l = std::log(f);
      sum += l;
      sum2 += l * l;
      ++n;
    }
  }
  diffusion::PitchStats s;
  if (n == 0) return s;
  s.mean = sum / n;
  const double sd = std::sqrt(std::max(0.0, sum2 / n - s.mean * s.mean));
  s.stddev = sd > 1e-8 ? sd : 1.0;
  return s;
}

double MelodyMapping::target_log_f0(double log_f0) const {
  return target.mean + (log_f0 - source.mean) / source.stddev * target.stddev;
}

double MelodyMapping::operator()(double log_f0) const {
  return (target_log_f0(log_f0) - reference.mean) / reference.stddev;
}

diffusion::PitchStats pooled_pitch_stats(const std::vector<diffusion::PitchStats>& speakers) {
  diffusion::PitchStats s;
  if (speakers.empty()) return s;
  double mean = 0.0;
  for (const auto& p : speakers) mean += p.mean;
  mean /= speakers.size();
  double var = 0.0;
  for (const auto& p : speakers) {
    var += p.stddev * p.stddev + (p.mean - mean) * (p.mean - mean);
  }
  s.mean = mean;
  s.stddev = std::sqrt(var / speakers.size());
  return s;
}

MelodyMapping melody_mapping(const std::vector<diffusion::PitchStats>& speakers,
                             int source_singer, int target_singer) {
  const int n = static_cast<int>(speakers.size());
  if (source_singer < 1 || source_singer > n || target_singer < 1 || target_singer > n) {
    throw InvalidArgument("melody mapping: no pitch statistics for singer");
  }
  return {speakers[source_singer - 1], speakers[target_singer - 1],
          pooled_pitch_stats(speakers)};
}

ConditionSet conditions_from_features(const SourceFeatures& f, int target_singer,
                                      const MelodyMapping* mapping,
                                      const audio::DspConfig& cfg) {
  if (target_singer < 1) throw InvalidArgument("conditions: singer ids start at 1");
  const int frames = f.mel.frames;
  if (static_cast<int>(f.f0.size()) != frames || f.envelope.frames != frames) {
    throw InvalidArgument("conditions: pitch, envelope and mel frame counts differ");
  }
  ConditionSet c;
  c.speaker = target_singer - 1;

  const audio::CepstralSequence cep = audio::mel_cepstrum(f.envelope, kContentDim);
  c.content.resize(frames, kContentDim);
  for (int k = 0; k < kContentDim; ++k) {
    double mean = 0.0;
    for (int i = 0; i < frames; ++i) mean += cep.row(i)[k + 1];
    mean /= frames;
    double var = 0.0;
    for (int i = 0; i < frames; ++i) {
      const double d = cep.row(i)[k + 1] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / frames);
    const double inv = sd > 1e-8 ? 1.0 / sd : 0.0;
    for (int i = 0; i < frames; ++i) {
      c.content(i, k) = static_cast<float>((cep.row(i)[k + 1] - mean) * inv);
    }
  }

  MelodyMapping map;
  if (mapping != nullptr) {
    map = *mapping;
  } else {
    map.source = map.target = map.reference = pitch_stats({&f.f0});
  }
  c.melody = diffusion::MatrixF::Zero(frames, kMelodyDim);
  audio::PitchContour moved;
  moved.f0_hz.assign(frames, 0.0);
  for (int i = 0; i < frames; ++i) {
    if (!f.f0.voiced(i)) continue;
    const double l = std::log(f.f0.f0_hz[i]);
    c.melody(i, 0) = static_cast<float>(map(l));
    c.melody(i, 1) = 1.0f;
    moved.f0_hz[i] = std::exp(map.target_log_f0(l));
  }
  const audio::MelSpectrogram tmpl = audio::harmonic_template(moved, cfg);
  c.excitation = Eigen::Map<const diffusion::MatrixF>(tmpl.values.data(), frames, tmpl.n_mels);
  return c;
}

ConditionSet build_conditions(const audio::Waveform& source, int target_singer,
                              const Corpus& catalog, const audio::DspConfig& cfg,
                              const MelodyMapping* mapping) {
  if (!catalog.has_singer(target_singer)) {
    throw NotFound("unknown singer id " + std::to_string(target_singer));
  }
  return conditions_from_features(analyze_source(source, cfg), target_singer, mapping, cfg);
}

}  // namespace singtrace::svc
