#include "singtrace/metrics/evaluation.h"

#include <cmath>

#include "singtrace/error.h"

namespace singtrace::metrics {

References make_references(const audio::Waveform& source, const audio::Waveform& target,
                           const audio::DspConfig& dsp) {
  References r;
  r.source_mel = audio::mel_spectrogram(source, dsp);
  r.source_cepstrum = audio::mel_cepstrum(r.source_mel);
  r.source_f0 = audio::extract_f0(source, dsp);
  const audio::MelSpectrogram target_mel = audio::mel_spectrogram(target, dsp);
  r.target_embedding = timbre_embed(target_mel);
  r.target_windows = window_embeddings(target_mel);
  return r;
}

std::size_t MetricCurve::gap_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.has_value() ? 0 : 1;
  return n;
}

std::optional<double> MetricCurve::at_step(int step) const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] == step) return values[i];
  }
  return std::nullopt;
}

namespace {

template <typename Fn>
std::optional<double> guarded(Fn fn) {
  try {
    const double v = fn();
    if (std::isfinite(v)) return v;
  } catch (const NumericError&) {
  } catch (const InvalidArgument&) {
  }
  return std::nullopt;
}

}  // namespace

std::vector<MetricCurve> metric_curves(const svc::DiffusionTrace& trace, const References& refs) {
  std::vector<MetricCurve> curves;
  for (MetricKind k : kMetricKinds) curves.push_back({k, trace.step_labels(), {}});
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const audio::MelSpectrogram mel = trace.x0_mel(static_cast<int>(i));
    const audio::PitchContour& f0 = trace.steps[i].f0;
    curves[0].values.push_back(
        guarded([&] { return dembed(timbre_embed(mel), refs.target_embedding); }));
    curves[1].values.push_back(guarded([&] { return f0corr(f0, refs.source_f0); }));
    curves[2].values.push_back(
        guarded([&] { return fad(window_embeddings(mel), refs.target_windows); }));
    curves[3].values.push_back(guarded([&] { return f0rmse(f0, refs.source_f0); }));
    curves[4].values.push_back(
        guarded([&] { return mcd(audio::mel_cepstrum(mel), refs.source_cepstrum); }));
  }
  return curves;
}

MetricCurve metric_curve(const svc::DiffusionTrace& trace, const References& refs,
                         MetricKind kind) {
  return metric_curves(trace, refs)[static_cast<int>(kind)];
}

EvaluatedConversion evaluate_final(const std::string& id, const std::vector<MetricCurve>& curves) {
  EvaluatedConversion e;
  e.id = id;
  for (const MetricCurve& c : curves) e.final_values[static_cast<int>(c.kind)] = c.at_step(0);
  return e;
}

MetricSummary summarize(const std::vector<EvaluatedConversion>& pool) {
  if (pool.empty()) throw InvalidArgument("summarize: empty pool");
  MetricSummary s;
  s.pool_size = static_cast<int>(pool.size());
  for (MetricKind kind : kMetricKinds) {
    MetricSummaryEntry& e = s.entries[static_cast<int>(kind)];
    e.kind = kind;
    double sum = 0.0;
    for (const EvaluatedConversion& c : pool) {
      if (const auto v = c.value(kind)) {
        sum += *v;
        ++e.count;
      }
    }
    if (e.count == 0) continue;
    e.mean = sum / e.count;
    if (higher_is_better(kind)) {
      e.display = e.mean;
    } else {
      e.clamped = *e.mean <= 0.0;
      e.display = std::log10(e.clamped ? 1e-6 : *e.mean);
    }
  }
  return s;
}

std::string best_sample(const std::vector<EvaluatedConversion>& pool, MetricKind kind) {
  if (pool.empty()) throw InvalidArgument("best_sample: empty pool");
  const bool higher = higher_is_better(kind);
  const EvaluatedConversion* best = nullptr;
  for (const EvaluatedConversion& c : pool) {
    const auto v = c.value(kind);
    if (!v) continue;
    if (best == nullptr) {
      best = &c;
      continue;
    }
    const double b = *best->value(kind);
    const bool better = higher ? *v > b : *v < b;
    if (better || (*v == b && c.id < best->id)) best = &c;
  }
  if (best == nullptr) {
    throw NotFound("best_sample: no pool member defines " + std::string(to_string(kind)));
  }
  return best->id;
}

}  // namespace singtrace::metrics
