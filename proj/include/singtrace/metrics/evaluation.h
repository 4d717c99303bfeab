#ifndef SINGTRACE_METRICS_EVALUATION_H_
#define SINGTRACE_METRICS_EVALUATION_H_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "singtrace/audio/dsp_config.h"
#include "singtrace/audio/waveform.h"
#include "singtrace/metrics/metrics.h"
#include "singtrace/svc/pipeline.h"

namespace singtrace::metrics {

// Precomputed reference features. F0 and MCD compare against the source
// take; Dembed and FAD against the target singer's take.
struct References {
  audio::MelSpectrogram source_mel;
  audio::CepstralSequence source_cepstrum;
  audio::PitchContour source_f0;
  TimbreEmbedding target_embedding;
  std::vector<TimbreEmbedding> target_windows;
};

References make_references(const audio::Waveform& source, const audio::Waveform& target,
                           const audio::DspConfig& dsp = {});

// One value per visited step, evaluated on the step's x0 estimate; nullopt
// marks a step where the metric is undefined.
struct MetricCurve {
  MetricKind kind = MetricKind::kMcd;
  std::vector<int> steps;
  std::vector<std::optional<double>> values;

  std::size_t gap_count() const;
  std::optional<double> at_step(int step) const;
};

MetricCurve metric_curve(const svc::DiffusionTrace& trace, const References& refs,
                         MetricKind kind);
// All five kinds in kMetricKinds order, sharing per-step feature work.
std::vector<MetricCurve> metric_curves(const svc::DiffusionTrace& trace, const References& refs);

struct EvaluatedConversion {
  std::string id;
  std::array<std::optional<double>, 5> final_values;  // indexed like kMetricKinds

  std::optional<double> value(MetricKind kind) const {
    return final_values[static_cast<int>(kind)];
  }
};

// Step-0 values of a trace's curves.
EvaluatedConversion evaluate_final(const std::string& id, const std::vector<MetricCurve>& curves);

struct MetricSummaryEntry {
  MetricKind kind = MetricKind::kMcd;
  std::optional<double> mean;  // over pool members where the metric is defined
  int count = 0;
  // Raw mean for higher-better kinds, log10 of the mean otherwise.
  std::optional<double> display;
  bool clamped = false;  // non-positive mean replaced by 1e-6 before log10
};

struct MetricSummary {
  int pool_size = 0;
  std::array<MetricSummaryEntry, 5> entries;
};

// Throws InvalidArgument for an empty pool.
MetricSummary summarize(const std::vector<EvaluatedConversion>& pool);

// Id of the best defined value (ties: lexicographically lowest id). Throws
// InvalidArgument for an empty pool and NotFound when no member defines the
// metric.
std::string best_sample(const std::vector<EvaluatedConversion>& pool, MetricKind kind);

}  // namespace singtrace::metrics

#endif  // SINGTRACE_METRICS_EVALUATION_H_
