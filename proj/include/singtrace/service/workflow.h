#ifndef SINGTRACE_SERVICE_WORKFLOW_H_
#define SINGTRACE_SERVICE_WORKFLOW_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "singtrace/audio/mel.h"
#include "singtrace/metrics/evaluation.h"
#include "singtrace/projection/tsne.h"
#include "singtrace/service/store.h"
#include "singtrace/svc/pipeline.h"

namespace singtrace::service {

struct WorkflowConfig {
  svc::ConvertOptions convert;
  projection::TsneConfig tsne;
};

// Corpus and active checkpoint of a store.
struct ConversionContext {
  svc::Corpus corpus;
  diffusion::Checkpoint checkpoint;
  std::string fingerprint;
};

// Throws NotFound when the store has no corpus or no active checkpoint.
ConversionContext load_context(const TraceStore& store);

// Reference material for a job: the source take and the target singer's
// take of the same song.
metrics::References job_references(const TraceStore& store, const svc::Corpus& corpus,
                                   const svc::ConversionJob& job, const audio::DspConfig& dsp);

// The seven per-trace projections, or none when the trace visits fewer than
// kMinProjectionRows steps.
std::vector<ProjectionRecord> project_trace(const svc::DiffusionTrace& trace,
                                            const projection::TsneConfig& cfg);

struct ConversionResult {
  std::string trace_id;
  std::string content_hash;
  bool cached = false;  // the trace was already in the store
};

// Converts, evaluates, projects and stores one job. Returns the stored trace
// without recomputation when its id already exists.
ConversionResult run_conversion(TraceStore& store, const ConversionContext& ctx,
                                const svc::ConversionJob& job, const WorkflowConfig& cfg);

// Recomputes a stored trace's projections into the derived projection area,
// keyed "<id>/<kind>_<layer>". Returns the number written.
int reproject_trace(TraceStore& store, const std::string& id, const projection::TsneConfig& cfg);

// Denormalised (clamped) mel of a stored step; `x0` selects the x0 estimate
// rather than the state. Throws NotFound for an unknown trace or step.
audio::MelSpectrogram stored_mel(const TraceStore& store, const std::string& id, int step,
                                 bool x0 = true);

// PCM-16 WAV of the Griffin-Lim render of a step's x0 estimate, cached under
// cache/<id>/step_<t>.wav.
std::string step_audio(TraceStore& store, const std::string& id, int step);

// |mel_a - mel_b| over denormalised x0 estimates.
audio::MelDiffMap step_mel_diff(const TraceStore& store, const std::string& a, int step_a,
                                const std::string& b, int step_b);

// Joint projection of several traces (cached under a key built from the ids
// and tap), or the stored per-trace map for a single id.
projection::JointProjection trace_projection(TraceStore& store,
                                             const std::vector<std::string>& ids,
                                             diffusion::TapKind kind, diffusion::TapLayer layer,
                                             const projection::TsneConfig& cfg);

// Final-step metrics over `ids`, per-kind means with their display values and
// the best trace per kind; written to metrics/summary.json and returned.
nlohmann::json pool_summary(TraceStore& store, const std::vector<std::string>& ids);

}  // namespace singtrace::service

#endif  // SINGTRACE_SERVICE_WORKFLOW_H_
