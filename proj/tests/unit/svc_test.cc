#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "singtrace/audio/cepstrum.h"
#include "singtrace/audio/envelope.h"
#include "singtrace/audio/griffin_lim.h"
#include "singtrace/audio/mel.h"
#include "singtrace/audio/pitch.h"
#include "singtrace/diffusion/checkpoint.h"
#include "singtrace/diffusion/train.h"
#include "singtrace/error.h"
#include "singtrace/metrics/metrics.h"
#include "singtrace/svc/conditions.h"
#include "singtrace/svc/corpus.h"
#include "singtrace/svc/pipeline.h"
#include "test_util.h"

namespace singtrace::svc {
namespace {

namespace fs = std::filesystem;

double median_voiced(const audio::PitchContour& p) {
  std::vector<double> v;
  for (double f : p.f0_hz) {
    if (f > 0.0) v.push_back(f);
  }
  if (v.empty()) return 0.0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

CorpusOptions short_corpus() {
  CorpusOptions o;
  o.n_singers = 4;
  o.n_songs = 2;
  o.song_ms = 800.0;
  return o;
}

TEST(Corpus, CatalogIsDeterministic) {
  const Corpus a = make_catalog({}), b = make_catalog({});
  EXPECT_EQ(manifest_json(a), manifest_json(b));
  CorpusOptions other;
  other.seed = 99;
  EXPECT_NE(manifest_json(make_catalog(other)), manifest_json(a));
  EXPECT_EQ(a.singers.size(), 4u);
  EXPECT_EQ(a.songs.size(), 4u);
  EXPECT_EQ(a.items.size(), 16u);
  for (const SongSpec& s : a.songs) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_LE(s.duration_ms() + 2 * kEdgeSilenceMs, kMaxSongMs);
  }
  for (const SingerSpec& s : a.singers) EXPECT_NO_THROW(s.validate());
}

TEST(Corpus, RegistersAlternate) {
  const Corpus c = make_catalog({});
  for (const SingerSpec& s : c.singers) {
    if (s.singer_id % 2 == 1) {
      EXPECT_LT(s.register_multiplier, 1.0);
    } else {
      EXPECT_GT(s.register_multiplier, 1.0);
    }
  }
  for (int song : {1, 2}) {
    const double low = median_voiced(audio::extract_f0(render_item(c, 1, song)));
    const double high = median_voiced(audio::extract_f0(render_item(c, 2, song)));
    EXPECT_GT(high, low) << "song " << song;
  }
}

TEST(Corpus, BuildWritesEveryTakeAndManifest) {
  const std::string dir = testing::temp_dir("corpus");
  const Corpus built = build_corpus({}, dir);
  int wavs = 0;
  for (const auto& e : fs::directory_iterator(dir)) wavs += e.path().extension() == ".wav";
  EXPECT_EQ(wavs, 16);
  const Corpus loaded = load_corpus(dir);
  EXPECT_EQ(manifest_json(loaded), manifest_json(built));
  EXPECT_EQ(parse_manifest(manifest_json(built)).items.size(), 16u);
  EXPECT_THROW(load_corpus(dir + "/missing"), NotFound);
  EXPECT_THROW(parse_manifest("{not json"), FormatError);

  const audio::Waveform from_disk = load_source(built, dir, 3, 2);
  const audio::Waveform rendered = render_item(built, 3, 2);
  ASSERT_EQ(from_disk.samples.size(), rendered.samples.size());
  // PCM-16 storage: one quantisation step plus the 32767 / 32768 scale convention.
  for (std::size_t i = 0; i < rendered.samples.size(); ++i) {
    ASSERT_NEAR(from_disk.samples[i], rendered.samples[i], 2.0 / 32768.0);
  }
  const audio::Waveform resynth = load_source(built, dir + "/missing", 3, 2);
  EXPECT_EQ(resynth.samples, rendered.samples);
  fs::remove_all(dir);
}

TEST(Corpus, RejectsInvalidSpecs) {
  SingerSpec s = make_catalog({}).singers[0];
  s.register_multiplier = 2.5;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = make_catalog({}).singers[0];
  std::swap(s.formants[0], s.formants[1]);
  EXPECT_THROW(s.validate(), InvalidArgument);

  SongSpec song{1, {{30, 200.0}}};
  EXPECT_THROW(song.validate(), InvalidArgument);
  song.notes = {{60, 50.0}};
  EXPECT_THROW(song.validate(), InvalidArgument);
  song.notes = {{60, 7000.0}};
  EXPECT_THROW(song.validate(), InvalidArgument);

  CorpusOptions o;
  o.n_singers = 1;
  EXPECT_THROW(make_catalog(o), InvalidArgument);
}

TEST(Synth, SameSeedIsBitIdentical) {
  const Corpus c = make_catalog({});
  const audio::Waveform a = synth_singer(c.singer(2), c.song(3), 5);
  const audio::Waveform b = synth_singer(c.singer(2), c.song(3), 5);
  const audio::Waveform d = synth_singer(c.singer(2), c.song(3), 6);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, d.samples);
}

TEST(Synth, A3NoteHasExpectedPitch) {
  SingerSpec s = make_catalog({}).singers[0];
  s.register_multiplier = 1.0;
  const SongSpec song{1, {{57, 1000.0}}};
  const audio::PitchContour f0 = audio::extract_f0(synth_singer(s, song, 3));
  EXPECT_NEAR(median_voiced(f0), 220.0, 0.02 * 220.0);
}

TEST(Synth, FormantsDriveTimbreSimilarity) {
  const Corpus c = make_catalog({});
  const SingerSpec a = c.singer(1);
  SingerSpec b = a;
  b.formants = c.singer(3).formants;
  ASSERT_NE(a.formants[0].frequency_hz, b.formants[0].frequency_hz);
  const SongSpec& song = c.song(1);
  auto embed = [](const audio::Waveform& w) {
    return metrics::timbre_embed(audio::mel_spectrogram(w));
  };
  const auto a1 = embed(synth_singer(a, song, 1));
  const auto a2 = embed(synth_singer(a, song, 2));
  const auto b1 = embed(synth_singer(b, song, 1));
  EXPECT_LT(metrics::dembed(a1, b1), metrics::dembed(a1, a2));
}

TEST(Conditions, StreamsShareTheMelFrameGrid) {
  const Corpus c = make_catalog(short_corpus());
  for (const CorpusItem& item : c.items) {
    const audio::Waveform w = render_item(c, item.singer_id, item.song_id);
    const diffusion::ConditionSet cond = build_conditions(w, item.singer_id, c);
    const int frames = audio::mel_spectrogram(w).frames;
    EXPECT_EQ(cond.content.rows(), frames);
    EXPECT_EQ(cond.melody.rows(), frames);
    EXPECT_EQ(cond.excitation.rows(), frames);
    EXPECT_EQ(cond.content.cols(), diffusion::kContentDim);
    EXPECT_EQ(cond.excitation.cols(), 80);
    EXPECT_TRUE(cond.content.allFinite());
  }
}

TEST(Conditions, UnvoicedSourceGivesZeroMelody) {
  const Corpus c = make_catalog({});
  audio::Waveform silent;
  silent.samples.assign(16000, 0.0f);
  const diffusion::ConditionSet cond = build_conditions(silent, 2, c);
  EXPECT_EQ(cond.melody.cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_EQ(cond.excitation.cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_TRUE(cond.content.allFinite());

  const diffusion::ConditionSet noisy = build_conditions(testing::white_noise(1.0, 4), 2, c);
  for (int i = 0; i < noisy.frames(); ++i) {
    if (noisy.melody(i, 1) == 0.0f) {
      EXPECT_EQ(noisy.melody(i, 0), 0.0f);
    }
  }
}

TEST(Conditions, TargetOnlyChangesSpeaker) {
  const Corpus c = make_catalog({});
  const audio::Waveform w = render_item(c, 1, 2);
  const diffusion::ConditionSet a = build_conditions(w, 1, c);
  const diffusion::ConditionSet b = build_conditions(w, 3, c);
  EXPECT_TRUE(a.content == b.content);
  EXPECT_TRUE(a.melody == b.melody);
  EXPECT_TRUE(a.excitation == b.excitation);
  EXPECT_EQ(a.speaker, 0);
  EXPECT_EQ(b.speaker, 2);
  EXPECT_THROW(build_conditions(w, 9, c), NotFound);
}

TEST(Conditions, ContentIsStandardisedPerCoefficient) {
  const Corpus c = make_catalog({});
  const diffusion::ConditionSet cond = build_conditions(render_item(c, 2, 1), 2, c);
  for (int k = 0; k < diffusion::kContentDim; ++k) {
    const auto col = cond.content.col(k).cast<double>();
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-4);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(Conditions, UtteranceMelodyIsZScored) {
  const Corpus c = make_catalog({});
  const SourceFeatures f = analyze_source(render_item(c, 1, 1));
  const diffusion::ConditionSet cond = conditions_from_features(f, 1);
  double sum = 0.0, sum2 = 0.0;
  int n = 0;
  for (int i = 0; i < cond.frames(); ++i) {
    ASSERT_EQ(cond.melody(i, 1) > 0.0f, f.f0.voiced(i));
    if (!f.f0.voiced(i)) continue;
    sum += cond.melody(i, 0);
    sum2 += cond.melody(i, 0) * cond.melody(i, 0);
    ++n;
  }
  ASSERT_GT(n, 10);
  EXPECT_NEAR(sum / n, 0.0, 1e-4);
  EXPECT_NEAR(sum2 / n, 1.0, 1e-3);
}

TEST(PitchStats, MatchesDirectComputation) {
  audio::PitchContour a{{0.0, 100.0, 200.0}}, b{{400.0, 0.0}};
  const diffusion::PitchStats s = pitch_stats({&a, &b});
  const std::vector<double> logs = {std::log(100.0), std::log(200.0), std::log(400.0)};
  const double mean = (logs[0] + logs[1] + logs[2]) / 3.0;
  double var = 0.0;
  for (double l : logs) var += (l - mean) * (l - mean);
  EXPECT_NEAR(s.mean, mean, 1e-12);
  EXPECT_NEAR(s.stddev, std::sqrt(var / 3.0), 1e-12);

  audio::PitchContour none{{0.0, 0.0}};
  EXPECT_EQ(pitch_stats({&none}), (diffusion::PitchStats{0.0, 1.0}));
}

TEST(MelodyMapping, MovesIntoTargetRegister) {
  const std::vector<diffusion::PitchStats> speakers = {{5.0, 0.1}, {5.7, 0.2}, {5.2, 0.3}};
  const diffusion::PitchStats ref = pooled_pitch_stats(speakers);
  // Equal-weight Gaussian mixture moments.
  const double mean = (5.0 + 5.7 + 5.2) / 3.0;
  const double second = ((0.01 + 25.0) + (0.04 + 5.7 * 5.7) + (0.09 + 5.2 * 5.2)) / 3.0;
  EXPECT_NEAR(ref.mean, mean, 1e-12);
  EXPECT_NEAR(ref.stddev, std::sqrt(second - mean * mean), 1e-12);

  const MelodyMapping m = melody_mapping(speakers, 1, 2);
  EXPECT_NEAR(m.target_log_f0(5.0), 5.7, 1e-12);
  EXPECT_NEAR(m.target_log_f0(5.1), 5.9, 1e-12);
  EXPECT_NEAR(m(5.1), (5.9 - ref.mean) / ref.stddev, 1e-12);
  EXPECT_THROW(melody_mapping(speakers, 0, 2), InvalidArgument);
  EXPECT_THROW(melody_mapping(speakers, 1, 4), InvalidArgument);
}

TEST(Envelope, RemovesHarmonicRipple) {
  const audio::Waveform w = testing::sawtooth(400.0, 1.0);
  const audio::MelSpectrogram mel = audio::mel_spectrogram(w);
  audio::PitchContour f0;
  f0.f0_hz.assign(mel.frames, 400.0);
  const audio::MelSpectrogram env = audio::envelope_mel(w, f0);
  ASSERT_EQ(env.frames, mel.frames);
  auto ripple = [](const audio::MelSpectrogram& m) {
    const audio::CepstralSequence c = audio::mel_cepstrum(m, 40);
    double e = 0.0;
    for (int f = 4; f < m.frames - 4; ++f) {
      for (int k = 10; k <= 40; ++k) e += c.row(f)[k] * c.row(f)[k];
    }
    return e;
  };
  EXPECT_LT(ripple(env), 0.1 * ripple(mel));
  f0.f0_hz.pop_back();
  EXPECT_THROW(audio::envelope_mel(w, f0), InvalidArgument);
}

TEST(HarmonicTemplate, PeaksSitOnHarmonics) {
  const audio::DspConfig cfg;
  audio::PitchContour f0{{200.0, 0.0, 200.0}};
  const audio::MelSpectrogram t = audio::harmonic_template(f0, cfg);
  ASSERT_EQ(t.frames, 3);
  const std::vector<double> centres = audio::mel_center_frequencies(cfg);
  auto nearest = [&](double hz) {
    int best = 0;
    for (int k = 0; k < cfg.n_mels; ++k) {
      if (std::abs(centres[k] - hz) < std::abs(centres[best] - hz)) best = k;
    }
    return best;
  };
  for (double h : {200.0, 400.0, 600.0}) {
    EXPECT_GT(t.at(0, nearest(h)), t.at(0, nearest(h + 100.0))) << h;
  }
  double mean = 0.0, sq = 0.0;
  for (int k = 0; k < cfg.n_mels; ++k) mean += t.at(0, k);
  mean /= cfg.n_mels;
  for (int k = 0; k < cfg.n_mels; ++k) sq += (t.at(0, k) - mean) * (t.at(0, k) - mean);
  EXPECT_NEAR(mean, 0.0, 1e-5);
  EXPECT_NEAR(sq / cfg.n_mels, 1.0, 1e-4);
  for (int k = 0; k < cfg.n_mels; ++k) EXPECT_EQ(t.at(1, k), 0.0f);
}

TEST(GriffinLim, CorpusTakesSurviveRoundTrip) {
  const Corpus c = make_catalog({});
  for (int singer : {1, 2}) {
    const audio::MelSpectrogram a = audio::mel_spectrogram(render_item(c, singer, 1));
    const audio::MelSpectrogram b = audio::mel_spectrogram(audio::griffin_lim(a));
    ASSERT_EQ(a.frames, b.frames);
    // Rendering renormalises the peak, so compare after removing the mean offset.
    double offset = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) offset += b.values[i] - a.values[i];
    offset /= a.values.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      const double d = b.values[i] - offset - a.values[i];
      num += d * d;
      den += static_cast<double>(a.values[i]) * a.values[i];
    }
    EXPECT_LE(std::sqrt(num / den), 0.35) << "singer " << singer;
  }
}

diffusion::Checkpoint random_checkpoint(const Corpus& c) {
  diffusion::Checkpoint ck;
  ck.arch.channels = 8;
  ck.arch.layers = 2;
  ck.arch.n_speakers = 4;
  ck.schedule.T = 100;
  ck.params = diffusion::Denoiser(ck.arch, 3, diffusion::OutputInit::kRandom).params();
  std::vector<audio::MelSpectrogram> mels;
  for (const CorpusItem& item : c.items) {
    mels.push_back(audio::mel_spectrogram(render_item(c, item.singer_id, item.song_id)));
  }
  ck.normalizer = diffusion::MelNormalizer::fit(mels);
  return ck;
}

TEST(Pipeline, JobValidation) {
  const Corpus c = make_catalog(short_corpus());
  ConversionJob job{1, 2, 3, 100, 0};
  EXPECT_NO_THROW(job.validate(c, 100));
  EXPECT_THROW((ConversionJob{5, 1, 1, 10, 0}.validate(c, 100)), NotFound);
  EXPECT_THROW((ConversionJob{1, 3, 1, 10, 0}.validate(c, 100)), NotFound);
  EXPECT_THROW((ConversionJob{1, 1, 7, 10, 0}.validate(c, 100)), NotFound);
  EXPECT_THROW((ConversionJob{1, 1, 1, 0, 0}.validate(c, 100)), InvalidArgument);
  EXPECT_THROW((ConversionJob{1, 1, 1, 101, 0}.validate(c, 100)), InvalidArgument);

  EXPECT_EQ(make_trace_id(job, "abc"), make_trace_id(job, "abc"));
  ConversionJob other = job;
  other.seed = 1;
  EXPECT_NE(make_trace_id(job, "abc"), make_trace_id(other, "abc"));
  EXPECT_NE(make_trace_id(job, "abc"), make_trace_id(job, "abd"));
}

TEST(Pipeline, FullScheduleTraceIsCompleteAndDeterministic) {
  const Corpus c = make_catalog(short_corpus());
  const diffusion::Checkpoint ck = random_checkpoint(c);
  const audio::Waveform src = render_item(c, 1, 1);
  const ConversionJob job{1, 1, 2, 100, 4};
  ConvertOptions one;
  one.render_threads = 1;
  const DiffusionTrace a = convert(job, ck, c, src, one);
  ConvertOptions two;
  two.render_threads = 2;
  const DiffusionTrace b = convert(job, ck, c, src, two);

  std::vector<int> expect(100);
  for (int i = 0; i < 100; ++i) expect[i] = 99 - i;
  EXPECT_EQ(a.step_labels(), expect);
  EXPECT_EQ(a.content_hash(), b.content_hash());
  EXPECT_EQ(a.trace_id, make_trace_id(job, ck.fingerprint()));
  EXPECT_EQ(a.frames, audio::mel_spectrogram(src).frames);
  for (const TraceStep& s : a.steps) {
    EXPECT_EQ(s.model_t, s.step + 1);
    EXPECT_EQ(static_cast<int>(s.f0.size()), a.frames);
    EXPECT_TRUE(s.y.allFinite());
    EXPECT_LE(s.x0_hat.cwiseAbs().maxCoeff(), 1.0f);
    EXPECT_FALSE(s.taps.empty());
  }
  EXPECT_EQ(a.index_of(0), 99);
  EXPECT_EQ(a.index_of(100), -1);
  EXPECT_THROW(a.at_step(100), NotFound);

  ConversionJob reseeded = job;
  reseeded.seed = 5;
  EXPECT_NE(convert(reseeded, ck, c, src, one).content_hash(), a.content_hash());
}

TEST(Pipeline, SubsampledScheduleVisitsGrid) {
  const Corpus c = make_catalog(short_corpus());
  const diffusion::Checkpoint ck = random_checkpoint(c);
  const DiffusionTrace t = convert({2, 2, 1, 10, 0}, ck, c, render_item(c, 2, 2));
  EXPECT_EQ(t.step_labels(), (std::vector<int>{90, 80, 70, 60, 50, 40, 30, 20, 10, 0}));
}

TEST(Pipeline, RejectsMismatchedCheckpoint) {
  const Corpus c = make_catalog(short_corpus());
  diffusion::Checkpoint ck = random_checkpoint(c);
  ConvertOptions opts;
  opts.dsp.n_mels = 64;
  EXPECT_THROW(convert({1, 1, 2, 10, 0}, ck, c, render_item(c, 1, 1), opts), InvalidArgument);
}

TEST(Pipeline, TrainingSetPairsTakesWithTheirConditions) {
  const std::string dir = testing::temp_dir("train_set");
  const Corpus c = build_corpus(short_corpus(), dir);
  const diffusion::TrainingSet set = prepare_training(c, dir);
  ASSERT_EQ(set.examples.size(), 8u);
  ASSERT_EQ(set.speaker_pitch.size(), 4u);
  EXPECT_GT(set.speaker_pitch[1].mean, set.speaker_pitch[0].mean);
  for (const auto& ex : set.examples) {
    EXPECT_EQ(ex.mel.rows(), ex.conditions.frames());
    EXPECT_LE(ex.mel.cwiseAbs().maxCoeff(), 1.0f + 1e-5f);
    EXPECT_EQ(ex.conditions.excitation.cols(), 80);
  }
  fs::remove_all(dir);
}

TEST(Pipeline, TrainedModelReconstructsSource) {
  const std::string dir = testing::temp_dir("recon");
  const Corpus c = build_corpus(short_corpus(), dir);
  diffusion::TrainConfig cfg;
  cfg.arch.channels = 32;
  cfg.arch.layers = 3;
  cfg.arch.n_speakers = 4;
  cfg.steps = 1500;
  cfg.crop_frames = 48;
  const diffusion::Checkpoint ck = diffusion::train(prepare_training(c, dir), cfg, 1);

  const audio::Waveform src = load_source(c, dir, 2, 1);
  const DiffusionTrace t = convert({2, 1, 2, 100, 0}, ck, c, src);
  const audio::CepstralSequence ref = audio::mel_cepstrum(audio::mel_spectrogram(src));
  const double first = metrics::mcd(audio::mel_cepstrum(t.y_mel(0)), ref);
  const double last = metrics::mcd(audio::mel_cepstrum(t.y_mel(99)), ref);
  EXPECT_LT(last, first);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace singtrace::svc
