#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "singtrace/audio/cepstrum.h"
#include "singtrace/audio/mel.h"
#include "singtrace/error.h"
#include "singtrace/metrics/evaluation.h"
#include "singtrace/metrics/metrics.h"
#include "singtrace/svc/corpus.h"
#include "singtrace/svc/pipeline.h"

namespace singtrace::metrics {
namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

audio::PitchContour random_contour(int n, std::mt19937_64& rng, double voiced_p = 0.8) {
  std::uniform_real_distribution<double> hz(80.0, 600.0), u(0.0, 1.0);
  audio::PitchContour p;
  for (int i = 0; i < n; ++i) p.f0_hz.push_back(u(rng) < voiced_p ? hz(rng) : 0.0);
  return p;
}

// Two-pass Pearson over jointly voiced frames.
double naive_pearson(const audio::PitchContour& f, const audio::PitchContour& g) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.f0_hz[i] > 0 && g.f0_hz[i] > 0) {
      x.push_back(f.f0_hz[i]);
      y.push_back(g.f0_hz[i]);
    }
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double naive_rmse(const audio::PitchContour& f, const audio::PitchContour& g) {
  double s = 0;
  int n = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.f0_hz[i] > 0 && g.f0_hz[i] > 0) {
      s += (f.f0_hz[i] - g.f0_hz[i]) * (f.f0_hz[i] - g.f0_hz[i]);
      ++n;
    }
  }
  return std::sqrt(s / n);
}

audio::CepstralSequence random_cepstra(int frames, int order, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  audio::CepstralSequence c;
  c.frames = frames;
  c.order = order;
  c.values.resize(static_cast<std::size_t>(frames) * (order + 1));
  for (double& v : c.values) v = n(rng);
  return c;
}

double frame_distance(const audio::CepstralSequence& a, int i, const audio::CepstralSequence& b,
                      int j) {
  double s = 0;
  for (int k = 1; k <= a.order; ++k) {
    const double d = a.row(i)[k] - b.row(j)[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// Minimum summed distance over every monotone path, by exhaustive search.
double brute_force_dtw(const audio::CepstralSequence& a, const audio::CepstralSequence& b) {
  const int n = a.frames, m = b.frames;
  std::vector<double> dist(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) dist[i * m + j] = frame_distance(a, i, b, j);
  }
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, int, double)> walk = [&](int i, int j, double acc) {
    acc += dist[i * m + j];
    if (i == n - 1 && j == m - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < n) walk(i + 1, j, acc);
    if (j + 1 < m) walk(i, j + 1, acc);
    if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

TEST(TimbreEmbed, ConstantSpectrogramHasZeroSpread) {
  audio::MelSpectrogram m = audio::make_mel(10, {}, -3.0f);
  const TimbreEmbedding e = timbre_embed(m);
  ASSERT_EQ(e.size(), 160u);
  for (int k = 0; k < 80; ++k) {
    EXPECT_FLOAT_EQ(e[k], -3.0);
    EXPECT_EQ(e[80 + k], 0.0);
  }
  EXPECT_THROW(timbre_embed(audio::make_mel(1, {})), InvalidArgument);
}

TEST(TimbreEmbed, FrameOrderDoesNotMatter) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0.0f, 2.0f);
  audio::MelSpectrogram m = audio::make_mel(30, {});
  for (float& v : m.values) v = n(rng);
  audio::MelSpectrogram p = m;
  std::vector<int> order(30);
  for (int i = 0; i < 30; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (int f = 0; f < 30; ++f) {
    for (int k = 0; k < 80; ++k) p.at(f, k) = m.at(order[f], k);
  }
  const TimbreEmbedding a = timbre_embed(m), b = timbre_embed(p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(TimbreEmbed, TakesOfOneSingerAgree) {
  const svc::Corpus c = svc::make_catalog({});
  for (int singer = 1; singer <= 4; ++singer) {
    svc::SongSpec song = c.song(1);
    const auto a = timbre_embed(audio::mel_spectrogram(svc::synth_singer(c.singer(singer), song, 1)));
    const auto b = timbre_embed(audio::mel_spectrogram(svc::synth_singer(c.singer(singer), song, 2)));
    EXPECT_GE(dembed(a, b), 0.99) << "singer " << singer;
  }
}

TEST(Dembed, ClosedFormCases) {
  const TimbreEmbedding a = {1.0, 2.0, -0.5}, o = {2.0, -1.0, 0.0};
  EXPECT_NEAR(dembed(a, a), 1.0, 1e-15);
  EXPECT_NEAR(dembed(a, o), 0.0, 1e-15);
  EXPECT_NEAR(dembed(a, {-1.0, -2.0, 0.5}), -1.0, 1e-15);
  EXPECT_NEAR(dembed(a, {3.0, 6.0, -1.5}), 1.0, 1e-15);
  EXPECT_THROW(dembed(a, {0.0, 0.0, 0.0}), InvalidArgument);
  EXPECT_THROW(dembed(a, {1.0}), InvalidArgument);
}

TEST(Dembed, MatchesNaiveCosine) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    TimbreEmbedding a(16), b(16);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    double dot = 0, na = 0, nb = 0;
    for (int i = 0; i < 16; ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    EXPECT_LE(rel_err(dembed(a, b), dot / std::sqrt(na) / std::sqrt(nb)), 1e-9);
  }
}

TEST(F0Corr, ClosedFormCases) {
  audio::PitchContour f{{100.0, 0.0, 150.0, 220.0, 180.0}};
  audio::PitchContour affine = f, neg = f, flat = f;
  for (double& v : affine.f0_hz) v = v > 0 ? 2 * v + 10 : 0;
  // Negation keeps voicing by mirroring around a large offset.
  for (double& v : neg.f0_hz) v = v > 0 ? 1000 - v : 0;
  for (double& v : flat.f0_hz) v = v > 0 ? 200 : 0;
  EXPECT_NEAR(f0corr(f, affine), 1.0, 1e-12);
  EXPECT_NEAR(f0corr(f, neg), -1.0, 1e-12);
  EXPECT_THROW(f0corr(f, flat), NumericError);
  EXPECT_THROW(f0corr(f, audio::PitchContour{{100.0, 0.0, 0.0, 0.0, 0.0}}), NumericError);
  EXPECT_THROW(f0corr(f, audio::PitchContour{{100.0}}), InvalidArgument);
}

TEST(F0Corr, MatchesNaiveOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 300);
    const auto f = random_contour(n, rng), g = random_contour(n, rng);
    double r = 0;
    try {
      r = f0corr(f, g);
    } catch (const NumericError&) {
      continue;
    }
    EXPECT_LE(rel_err(r, naive_pearson(f, g)), 1e-9);
    // Positive affine maps leave r unchanged.
    audio::PitchContour h = g;
    for (double& v : h.f0_hz) v = v > 0 ? 3.5 * v + 40 : 0;
    EXPECT_LE(rel_err(f0corr(f, h), r), 1e-9);
  }
}

TEST(F0Rmse, ClosedFormCasesAndOracle) {
  audio::PitchContour f{{100.0, 0.0, 150.0, 220.0}};
  audio::PitchContour g = f;
  EXPECT_EQ(f0rmse(f, g), 0.0);
  for (double& v : g.f0_hz) v = v > 0 ? v + 5 : 0;
  EXPECT_NEAR(f0rmse(f, g), 5.0, 1e-12);
  EXPECT_THROW(f0rmse(f, audio::PitchContour{{0.0, 10.0, 0.0, 0.0}}), NumericError);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 300);
    const auto a = random_contour(n, rng), b = random_contour(n, rng);
    double r = 0;
    try {
      r = f0rmse(a, b);
    } catch (const NumericError&) {
      continue;
    }
    EXPECT_LE(rel_err(r, naive_rmse(a, b)), 1e-9);
    EXPECT_EQ(r, f0rmse(b, a));
  }
}

TEST(Mcd, IdenticalSequencesGiveZero) {
  std::mt19937_64 rng(5);
  const auto a = random_cepstra(20, 13, rng);
  EXPECT_EQ(mcd(a, a), 0.0);
  audio::CepstralSequence empty;
  EXPECT_THROW(mcd(a, empty), InvalidArgument);
}

TEST(Mcd, ConstantOffsetClosedForm) {
  std::mt19937_64 rng(6);
  for (double d : {0.05, 0.3, 1.7}) {
    // Frames far apart relative to d keep the alignment diagonal.
    audio::CepstralSequence a = random_cepstra(8, 13, rng);
    for (int f = 0; f < a.frames; ++f) a.values[f * a.width() + 2] += 20.0 * f;
    audio::CepstralSequence b = a;
    for (int f = 0; f < b.frames; ++f) b.values[f * b.width() + 1] += d;
    const double expect = 10.0 / std::log(10.0) * std::sqrt(2.0) * d;
    EXPECT_LE(std::abs(mcd(a, b) - expect), 1e-6);
    EXPECT_LE(std::abs(mcd(b, a) - expect), 1e-6);
  }
}

TEST(Dtw, MatchesExhaustiveSearchUpToTenByTen) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(7);
  for (int n = 1; n <= 10; ++n) {
    for (int m = 1; m <= 10; ++m) {
      const auto a = random_cepstra(n, 4, rng), b = random_cepstra(m, 4, rng);
      const DtwResult r = dtw_align(a, b);
      ASSERT_LE(rel_err(r.cost, brute_force_dtw(a, b)), 1e-12) << n << "x" << m;
      // Path is monotone, connected and its summed distance is the cost.
      ASSERT_EQ(r.path.front(), std::make_pair(0, 0));
      ASSERT_EQ(r.path.back(), std::make_pair(n - 1, m - 1));
      double sum = 0;
      for (std::size_t k = 0; k < r.path.size(); ++k) {
        sum += frame_distance(a, r.path[k].first, b, r.path[k].second);
        if (k == 0) continue;
        const int di = r.path[k].first - r.path[k - 1].first;
        const int dj = r.path[k].second - r.path[k - 1].second;
        ASSERT_TRUE((di == 1 || di == 0) && (dj == 1 || dj == 0) && di + dj > 0);
      }
      ASSERT_LE(rel_err(sum, r.cost), 1e-12);
      ASSERT_LE(rel_err(mcd(a, b), kMcdScale * r.cost / r.path.size()), 1e-12);
    }
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 120.0);
}

std::vector<std::vector<double>> gaussian_set(int n, int dim, double shift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> s(n, std::vector<double>(dim));
  for (auto& row : s) {
    for (auto& v : row) v = g(rng) + shift;
  }
  return s;
}

TEST(Fad, ShiftedGaussianMatchesClosedForm) {
  // Mean shift of 1/sqrt(2) per dimension over 8 dimensions: squared norm 4.
  const auto a = gaussian_set(10000, 8, 0.0, 1);
  const auto b = gaussian_set(10000, 8, std::sqrt(0.5), 2);
  const double v = fad(a, b);
  EXPECT_GE(v, 3.6);
  EXPECT_LE(v, 4.4);
  EXPECT_NEAR(fad(b, a), v, 1e-9);
}

TEST(Fad, IdenticalSetsGiveZero) {
  const auto a = gaussian_set(50, 6, 0.3, 3);
  EXPECT_NEAR(fad(a, a), 0.0, 1e-8);
  // Fewer samples than dimensions uses the shrunk covariance.
  const auto small = gaussian_set(3, 6, 0.0, 4);
  EXPECT_NEAR(fad(small, small), 0.0, 1e-8);
  EXPECT_THROW(fad(gaussian_set(1, 6, 0, 5), a), InvalidArgument);
}

TEST(WindowEmbeddings, OneSecondWindowsHalfOverlap) {
  audio::MelSpectrogram m = audio::make_mel(200, {});
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (float& v : m.values) v = n(rng);
  EXPECT_EQ(window_embeddings(m).size(), static_cast<std::size_t>(1 + (200 - 62) / 31));
  m.frames = 40;
  m.values.resize(40 * 80);
  EXPECT_EQ(window_embeddings(m).size(), 1u);
}

TEST(MetricKind, NamesAndPolarity) {
  EXPECT_EQ(kMetricKinds.size(), 5u);
  for (MetricKind k : kMetricKinds) EXPECT_EQ(parse_metric_kind(to_string(k)), k);
  EXPECT_EQ(parse_metric_kind("f0corr"), MetricKind::kF0Corr);
  EXPECT_EQ(parse_metric_kind("mcd"), MetricKind::kMcd);
  EXPECT_FALSE(parse_metric_kind("pesq").has_value());
  EXPECT_TRUE(higher_is_better(MetricKind::kDembed));
  EXPECT_TRUE(higher_is_better(MetricKind::kF0Corr));
  EXPECT_FALSE(higher_is_better(MetricKind::kFad));
  EXPECT_FALSE(higher_is_better(MetricKind::kF0Rmse));
  EXPECT_FALSE(higher_is_better(MetricKind::kMcd));
}

EvaluatedConversion conv(std::string id, std::optional<double> dembed, std::optional<double> mcd,
                         std::optional<double> fad = 1.0) {
  EvaluatedConversion e;
  e.id = std::move(id);
  e.final_values[static_cast<int>(MetricKind::kDembed)] = dembed;
  e.final_values[static_cast<int>(MetricKind::kMcd)] = mcd;
  e.final_values[static_cast<int>(MetricKind::kFad)] = fad;
  e.final_values[static_cast<int>(MetricKind::kF0Corr)] = 0.5;
  e.final_values[static_cast<int>(MetricKind::kF0Rmse)] = 10.0;
  return e;
}

const MetricSummaryEntry& entry(const MetricSummary& s, MetricKind k) {
  return s.entries[static_cast<int>(k)];
}

TEST(Summary, MeansAndDisplayTransform) {
  const MetricSummary one = summarize({conv("a", 0.8, 4.0, 100.0)});
  EXPECT_EQ(one.pool_size, 1);
  EXPECT_DOUBLE_EQ(*entry(one, MetricKind::kDembed).mean, 0.8);
  EXPECT_DOUBLE_EQ(*entry(one, MetricKind::kDembed).display, 0.8);
  EXPECT_DOUBLE_EQ(*entry(one, MetricKind::kFad).display, 2.0);
  EXPECT_DOUBLE_EQ(*entry(one, MetricKind::kMcd).mean, 4.0);

  const MetricSummary two = summarize({conv("a", 0.8, 4.0), conv("b", std::nullopt, 6.0)});
  EXPECT_DOUBLE_EQ(*entry(two, MetricKind::kMcd).mean, 5.0);
  EXPECT_DOUBLE_EQ(*entry(two, MetricKind::kMcd).display, std::log10(5.0));
  EXPECT_EQ(entry(two, MetricKind::kDembed).count, 1);
  EXPECT_DOUBLE_EQ(*entry(two, MetricKind::kDembed).mean, 0.8);

  const MetricSummary zero = summarize({conv("a", 0.8, 0.0)});
  EXPECT_TRUE(entry(zero, MetricKind::kMcd).clamped);
  EXPECT_DOUBLE_EQ(*entry(zero, MetricKind::kMcd).display, -6.0);
  EXPECT_FALSE(entry(zero, MetricKind::kFad).clamped);

  const MetricSummary none = summarize({conv("a", std::nullopt, 1.0)});
  EXPECT_FALSE(entry(none, MetricKind::kDembed).mean.has_value());
  EXPECT_THROW(summarize({}), InvalidArgument);
}

TEST(BestSample, ExtremaAndTies) {
  EXPECT_EQ(best_sample({conv("a", 0.3, 1), conv("b", 0.9, 1), conv("c", 0.5, 1)},
                        MetricKind::kDembed),
            "b");
  EXPECT_EQ(best_sample({conv("a", 0.3, 6.0), conv("b", 0.9, 4.0)}, MetricKind::kMcd), "b");
  EXPECT_EQ(best_sample({conv("z", 0.3, 1, 2.0), conv("m", 0.9, 1, 2.0), conv("q", 0.9, 1, 3.0)},
                        MetricKind::kFad),
            "m");
  EXPECT_EQ(best_sample({conv("a", std::nullopt, 1), conv("b", 0.1, 1)}, MetricKind::kDembed), "b");
  EXPECT_THROW(best_sample({conv("a", std::nullopt, 1)}, MetricKind::kDembed), NotFound);
  EXPECT_THROW(best_sample({}, MetricKind::kDembed), InvalidArgument);
}

TEST(BestSample, MatchesLinearScan) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> val(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EvaluatedConversion> pool;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      pool.push_back(conv("id" + std::to_string(rng() % 100), val(rng) / 5.0, val(rng)));
    }
    for (MetricKind k : {MetricKind::kDembed, MetricKind::kMcd}) {
      const std::string got = best_sample(pool, k);
      double best = higher_is_better(k) ? -1e300 : 1e300;
      for (const auto& e : pool) {
        best = higher_is_better(k) ? std::max(best, *e.value(k)) : std::min(best, *e.value(k));
      }
      std::string lowest;
      for (const auto& e : pool) {
        if (*e.value(k) == best && (lowest.empty() || e.id < lowest)) lowest = e.id;
      }
      EXPECT_EQ(got, lowest);
    }
  }
}

TEST(MetricCurve, OneValuePerVisitedStep) {
  svc::CorpusOptions o;
  o.n_songs = 2;
  o.song_ms = 1500.0;
  const svc::Corpus c = svc::make_catalog(o);
  diffusion::Checkpoint ck;
  ck.arch.channels = 8;
  ck.arch.layers = 2;
  ck.params = diffusion::Denoiser(ck.arch, 3, diffusion::OutputInit::kRandom).params();
  std::vector<audio::MelSpectrogram> mels;
  for (const auto& item : c.items) {
    mels.push_back(audio::mel_spectrogram(svc::render_item(c, item.singer_id, item.song_id)));
  }
  ck.normalizer = diffusion::MelNormalizer::fit(mels);
  const audio::Waveform src = svc::render_item(c, 1, 1);
  const audio::Waveform tgt = svc::render_item(c, 2, 1);
  const svc::DiffusionTrace t = svc::convert({1, 1, 2, 10, 0}, ck, c, src);
  const References refs = make_references(src, tgt);
  const std::vector<MetricCurve> curves = metric_curves(t, refs);
  ASSERT_EQ(curves.size(), 5u);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    EXPECT_EQ(curves[i].kind, kMetricKinds[i]);
    EXPECT_EQ(curves[i].steps, t.step_labels());
    EXPECT_EQ(curves[i].values.size(), t.steps.size());
    for (const auto& v : curves[i].values) {
      if (v) {
        EXPECT_TRUE(std::isfinite(*v));
      }
    }
  }
  // The single-kind entry point agrees with the batch one.
  const MetricCurve mcd_curve = metric_curve(t, refs, MetricKind::kMcd);
  EXPECT_EQ(mcd_curve.values, curves[4].values);
  // MCD on step 0 equals a direct computation from the stored x0 estimate.
  const double direct = mcd(audio::mel_cepstrum(t.x0_mel(static_cast<int>(t.steps.size()) - 1)),
                            refs.source_cepstrum);
  EXPECT_NEAR(*mcd_curve.at_step(0), direct, 1e-9);
  EXPECT_FALSE(mcd_curve.at_step(5).has_value());

  const EvaluatedConversion e = evaluate_final(t.trace_id, curves);
  EXPECT_EQ(e.value(MetricKind::kMcd), mcd_curve.at_step(0));
}

}  // namespace
}  // namespace singtrace::metrics
