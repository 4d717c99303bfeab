#ifndef SINGTRACE_SERVICE_STORE_H_
#define SINGTRACE_SERVICE_STORE_H_

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "singtrace/diffusion/checkpoint.h"
#include "singtrace/diffusion/embedding.h"
#include "singtrace/metrics/evaluation.h"
#include "singtrace/projection/tsne.h"
#include "singtrace/service/blob.h"
#include "singtrace/svc/corpus.h"
#include "singtrace/svc/pipeline.h"

namespace singtrace::service {

enum class DisplayMode {
  kStepComparison,
  kSourceSingerComparison,
  kSongComparison,
  kTargetSingerComparison,
  kMetricComparison,
};
inline constexpr DisplayMode kDisplayModes[] = {
    DisplayMode::kStepComparison, DisplayMode::kSourceSingerComparison,
    DisplayMode::kSongComparison, DisplayMode::kTargetSingerComparison,
    DisplayMode::kMetricComparison};
std::string_view to_string(DisplayMode mode);

struct ProjectionRecord {
  diffusion::TapKind kind = diffusion::TapKind::kStep;
  diffusion::TapLayer layer = diffusion::TapLayer::kFirst;
  projection::ProjectionMap map;
};

// Blob file names inside a trace directory.
std::string mel_blob_name(bool x0);  // "y.bin" / "x0.bin"
std::string tap_blob_name(diffusion::TapKind kind, diffusion::TapLayer layer);
std::string projection_blob_name(diffusion::TapKind kind, diffusion::TapLayer layer);
std::string kl_blob_name(diffusion::TapKind kind, diffusion::TapLayer layer);

// On-disk layout under `root`:
//   catalog.json                      singers, songs, checkpoints, traces
//   corpus/                           manifest.json + takes
//   checkpoints/<fingerprint>.ckpt
//   traces/<id>/                      meta.json, *.bin blobs, metrics.json
//   projections/<key>/                derived (joint) projections
//   cache/<id>/step_<t>.wav           rendered audio
//   metrics/summary.json
// Traces are written to a temporary directory and renamed into place, then
// the catalog is replaced atomically; a failed write leaves neither a trace
// directory nor a catalog entry behind.
class TraceStore {
 public:
  explicit TraceStore(std::string root);

  const std::string& root() const { return root_; }
  std::string corpus_dir() const;
  std::string trace_dir(const std::string& id) const;
  std::string cache_dir() const;

  nlohmann::json catalog() const;

  // Registers the corpus in the catalog (the takes live in corpus_dir()).
  void set_corpus(const svc::Corpus& corpus);
  std::optional<svc::Corpus> corpus() const;

  // Saves the checkpoint, marks it active and returns its fingerprint.
  std::string put_checkpoint(const diffusion::Checkpoint& ckpt);
  std::optional<std::string> active_checkpoint() const;
  diffusion::Checkpoint load_checkpoint(const std::string& fingerprint) const;

  bool has_trace(const std::string& id) const;
  std::vector<std::string> trace_ids() const;

  // Throws Conflict for an existing id, InvalidArgument for an incomplete or
  // non-finite trace; I/O failures propagate after the partial write is
  // removed.
  void write_trace(const svc::DiffusionTrace& trace,
                   const std::vector<ProjectionRecord>& projections,
                   const std::vector<metrics::MetricCurve>& curves);

  nlohmann::json read_meta(const std::string& id) const;
  Blob read_blob(const std::string& id, const std::string& name) const;
  std::string read_blob_bytes(const std::string& id, const std::string& name) const;
  svc::DiffusionTrace read_trace(const std::string& id) const;
  ProjectionRecord read_projection(const std::string& id, diffusion::TapKind kind,
                                   diffusion::TapLayer layer) const;
  std::vector<metrics::MetricCurve> read_curves(const std::string& id) const;

  // Derived data outside the immutable trace directories.
  void write_joint_projection(const std::string& key, const projection::JointProjection& p);
  std::optional<projection::JointProjection> read_joint_projection(const std::string& key) const;
  void write_summary(const nlohmann::json& summary);
  std::optional<nlohmann::json> read_summary() const;

  // Called with a stage name before each file of a trace write; throwing
  // from it simulates a failure at that point.
  void set_fault_hook(std::function<void(std::string_view)> hook) { fault_hook_ = std::move(hook); }

 private:
  void update_catalog(const std::function<void(nlohmann::json&)>& fn);
  nlohmann::json load_catalog_unlocked() const;

  std::string root_;
  mutable std::mutex catalog_mu_;
  std::function<void(std::string_view)> fault_hook_;
};

nlohmann::json dsp_to_json(const audio::DspConfig& dsp);
audio::DspConfig dsp_from_json(const nlohmann::json& j);

// Writes `bytes` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace singtrace::service

#endif  // SINGTRACE_SERVICE_STORE_H_
