#include "singtrace/service/workflow.h"

#include <algorithm>
#include <filesystem>

#include "singtrace/error.h"

namespace singtrace::service {

namespace fs = std::filesystem;
using nlohmann::json;

ConversionContext load_context(const TraceStore& store) {
  std::optional<svc::Corpus> corpus = store.corpus();
  if (!corpus) throw NotFound("store has no corpus; run the corpus command first");
  const std::optional<std::string> fp = store.active_checkpoint();
  if (!fp) throw NotFound("store has no checkpoint; run the train command first");
  return {std::move(*corpus), store.load_checkpoint(*fp), *fp};
}

metrics::References job_references(const TraceStore& store, const svc::Corpus& corpus,
                                   const svc::ConversionJob& job, const audio::DspConfig& dsp) {
  const audio::Waveform source =
      svc::load_source(corpus, store.corpus_dir(), job.source_singer, job.song);
  const audio::Waveform target =
      svc::load_source(corpus, store.corpus_dir(), job.target_singer, job.song);
  return metrics::make_references(source, target, dsp);
}

std::vector<ProjectionRecord> project_trace(const svc::DiffusionTrace& trace,
                                            const projection::TsneConfig& cfg) {
  std::vector<ProjectionRecord> out;
  if (static_cast<int>(trace.steps.size()) < projection::kMinProjectionRows) return out;
  std::vector<int> labels;
  std::vector<diffusion::EmbeddingTaps> taps;
  for (const auto& s : trace.steps) {
    labels.push_back(s.step);
    taps.push_back(s.taps);
  }
  for (const auto& [kind, layer] : diffusion::tap_combinations()) {
    const auto seq = diffusion::capture_embeddings(labels, taps, kind, layer);
    out.push_back({kind, layer, projection::tsne(seq, cfg)});
  }
  return out;
}

ConversionResult run_conversion(TraceStore& store, const ConversionContext& ctx,
                                const svc::ConversionJob& job, const WorkflowConfig& cfg) {
  job.validate(ctx.corpus, ctx.checkpoint.schedule.T);
  const std::string id = svc::make_trace_id(job, ctx.fingerprint);
  if (store.has_trace(id)) {
    return {id, store.read_meta(id).at("content_hash"), true};
  }
  const audio::Waveform source =
      svc::load_source(ctx.corpus, store.corpus_dir(), job.source_singer, job.song);
  const svc::DiffusionTrace trace =
      svc::convert(job, ctx.checkpoint, ctx.corpus, source, cfg.convert);
  const metrics::References refs = job_references(store, ctx.corpus, job, cfg.convert.dsp);
  const auto curves = metrics::metric_curves(trace, refs);
  const auto projections = project_trace(trace, cfg.tsne);
  store.write_trace(trace, projections, curves);
  return {trace.trace_id, trace.content_hash(), false};
}

namespace {

std::string derived_key(const std::vector<std::string>& ids, diffusion::TapKind kind,
                        diffusion::TapLayer layer) {
  std::string key;
  for (const auto& id : ids) key += (key.empty() ? "" : "+") + id;
  key += "__" + std::string(diffusion::to_string(kind));
  if (kind != diffusion::TapKind::kStep) key += "_" + std::string(diffusion::to_string(layer));
  return key;
}

diffusion::EmbeddingSequence stored_sequence(const TraceStore& store, const std::string& id,
                                             diffusion::TapKind kind, diffusion::TapLayer layer) {
  const json meta = store.read_meta(id);
  const Blob b = store.read_blob(id, tap_blob_name(kind, layer));
  diffusion::EmbeddingSequence seq;
  seq.kind = kind;
  seq.layer = layer;
  seq.steps = meta.at("steps").get<std::vector<int>>();
  seq.matrix = Eigen::Map<const diffusion::MatrixF>(b.data.data(), b.dims.at(0), b.dims.at(1))
                   .cast<double>();
  return seq;
}

}  // namespace

int reproject_trace(TraceStore& store, const std::string& id, const projection::TsneConfig& cfg) {
  const json meta = store.read_meta(id);
  if (static_cast<int>(meta.at("steps").size()) < projection::kMinProjectionRows) return 0;
  int n = 0;
  for (const auto& [kind, layer] : diffusion::tap_combinations()) {
    projection::JointProjection p;
    p.map = projection::tsne(stored_sequence(store, id, kind, layer), cfg);
    p.offsets = {0};
    store.write_joint_projection(derived_key({id}, kind, layer), p);
    ++n;
  }
  return n;
}

audio::MelSpectrogram stored_mel(const TraceStore& store, const std::string& id, int step,
                                 bool x0) {
  const json meta = store.read_meta(id);
  const auto steps = meta.at("steps").get<std::vector<int>>();
  const auto it = std::find(steps.begin(), steps.end(), step);
  if (it == steps.end()) {
    throw NotFound("trace " + id + " has no step " + std::to_string(step));
  }
  const Blob b = store.read_blob(id, mel_blob_name(x0));
  const int frames = meta.at("frames");
  const int n_mels = meta.at("n_mels");
  diffusion::MelNormalizer norm;
  norm.min = meta.at("normalizer").at("min").get<std::vector<float>>();
  norm.max = meta.at("normalizer").at("max").get<std::vector<float>>();
  const audio::DspConfig dsp = dsp_from_json(meta.at("dsp"));
  const auto slice = b.slice(static_cast<std::size_t>(it - steps.begin()));
  const diffusion::MatrixD m =
      Eigen::Map<const diffusion::MatrixF>(slice.data(), frames, n_mels).cast<double>();
  return norm.denormalize(m, audio::make_mel(frames, dsp));
}

std::string step_audio(TraceStore& store, const std::string& id, int step) {
  const fs::path dir = fs::path(store.cache_dir()) / id;
  const fs::path file = dir / ("step_" + std::to_string(step) + ".wav");
  if (!store.has_trace(id)) throw NotFound("unknown trace " + id);
  if (fs::exists(file)) return read_file(file.string());
  const audio::MelSpectrogram mel = stored_mel(store, id, step, true);
  const audio::DspConfig dsp = dsp_from_json(store.read_meta(id).at("dsp"));
  const std::string bytes = audio::encode_wav(svc::render_mel(mel, dsp));
  fs::create_directories(dir);
  write_file_atomic(file.string(), bytes);
  return bytes;
}

audio::MelDiffMap step_mel_diff(const TraceStore& store, const std::string& a, int step_a,
                                const std::string& b, int step_b) {
  return audio::mel_diff(stored_mel(store, a, step_a, true), stored_mel(store, b, step_b, true));
}

projection::JointProjection trace_projection(TraceStore& store,
                                             const std::vector<std::string>& ids,
                                             diffusion::TapKind kind, diffusion::TapLayer layer,
                                             const projection::TsneConfig& cfg) {
  if (ids.empty()) throw InvalidArgument("projection: no trace ids");
  if (kind == diffusion::TapKind::kStep) layer = diffusion::TapLayer::kFirst;
  const std::string key = derived_key(ids, kind, layer);
  if (auto cached = store.read_joint_projection(key)) return *cached;
  if (ids.size() == 1) {
    if (!store.has_trace(ids[0])) throw NotFound("unknown trace " + ids[0]);
    const json meta = store.read_meta(ids[0]);
    if (meta.at("projections").empty()) {
      throw NotFound("trace " + ids[0] + " has too few steps for a projection");
    }
    projection::JointProjection p;
    p.map = store.read_projection(ids[0], kind, layer).map;
    p.offsets = {0};
    return p;
  }
  std::vector<diffusion::EmbeddingSequence> seqs;
  for (const auto& id : ids) seqs.push_back(stored_sequence(store, id, kind, layer));
  std::vector<const diffusion::EmbeddingSequence*> ptrs;
  for (const auto& s : seqs) ptrs.push_back(&s);
  projection::JointProjection p = projection::joint_tsne(ptrs, cfg);
  // Serve the stored float-32 precision so cached and fresh responses agree.
  p.map.points = p.map.points.cast<float>().cast<double>();
  store.write_joint_projection(key, p);
  return p;
}

json pool_summary(TraceStore& store, const std::vector<std::string>& ids) {
  std::vector<metrics::EvaluatedConversion> pool;
  for (const auto& id : ids) pool.push_back(metrics::evaluate_final(id, store.read_curves(id)));
  const metrics::MetricSummary s = metrics::summarize(pool);
  json entries = json::array();
  for (const auto& e : s.entries) {
    json j = {{"kind", metrics::to_string(e.kind)},
              {"higher_is_better", metrics::higher_is_better(e.kind)},
              {"count", e.count},
              {"mean", e.mean ? json(*e.mean) : json(nullptr)},
              {"display", e.display ? json(*e.display) : json(nullptr)},
              {"display_scale", metrics::higher_is_better(e.kind) ? "linear" : "log10"},
              {"clamped", e.clamped},
              {"best", e.count > 0 ? json(metrics::best_sample(pool, e.kind)) : json(nullptr)}};
    entries.push_back(j);
  }
  json traces = json::array();
  for (const auto& c : pool) {
    json values = json::object();
    for (metrics::MetricKind k : metrics::kMetricKinds) {
      const auto v = c.value(k);
      values[std::string(metrics::to_string(k))] = v ? json(*v) : json(nullptr);
    }
    traces.push_back({{"id", c.id}, {"final", values}});
  }
  json out = {{"pool_size", s.pool_size}, {"entries", entries}, {"traces", traces}};
  store.write_summary(out);
  return out;
}

}  // namespace singtrace::service
