#include "singtrace/service/store.h"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "singtrace/error.h"

namespace singtrace::service {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(DisplayMode mode) {
  switch (mode) {
    case DisplayMode::kStepComparison: return "StepComparison";
    case DisplayMode::kSourceSingerComparison: return "SourceSingerComparison";
    case DisplayMode::kSongComparison: return "SongComparison";
    case DisplayMode::kTargetSingerComparison: return "TargetSingerComparison";
    case DisplayMode::kMetricComparison: return "MetricComparison";
  }
  return "?";
}

std::string mel_blob_name(bool x0) { return x0 ? "x0.bin" : "y.bin"; }

namespace {

std::string combo(diffusion::TapKind kind, diffusion::TapLayer layer) {
  std::string s(diffusion::to_string(kind));
  if (kind != diffusion::TapKind::kStep) s += "_" + std::string(diffusion::to_string(layer));
  return s;
}

}  // namespace

std::string tap_blob_name(diffusion::TapKind kind, diffusion::TapLayer layer) {
  return "taps_" + combo(kind, layer) + ".bin";
}
std::string projection_blob_name(diffusion::TapKind kind, diffusion::TapLayer layer) {
  return "proj_" + combo(kind, layer) + ".bin";
}
std::string kl_blob_name(diffusion::TapKind kind, diffusion::TapLayer layer) {
  return "kl_" + combo(kind, layer) + ".bin";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string unique_suffix() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  return std::to_string(rd()) + "-" + std::to_string(counter++);
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Blob matrix_blob(const std::vector<const diffusion::MatrixF*>& mats) {
  Blob b;
  const auto rows = static_cast<std::uint32_t>(mats.front()->rows());
  const auto cols = static_cast<std::uint32_t>(mats.front()->cols());
  b.dims = {static_cast<std::uint32_t>(mats.size()), rows, cols};
  b.data.reserve(static_cast<std::size_t>(mats.size()) * rows * cols);
  for (const auto* m : mats) {
    // MatrixF is row-major, so data() is already [frame][mel].
    b.data.insert(b.data.end(), m->data(), m->data() + m->size());
  }
  return b;
}

json job_json(const svc::ConversionJob& j) {
  return {{"source_singer", j.source_singer}, {"song", j.song},
          {"target_singer", j.target_singer}, {"num_steps", j.num_steps},
          {"seed", j.seed}};
}

svc::ConversionJob job_from_json(const json& j) {
  svc::ConversionJob job;
  job.source_singer = j.at("source_singer");
  job.song = j.at("song");
  job.target_singer = j.at("target_singer");
  job.num_steps = j.at("num_steps");
  job.seed = j.at("seed");
  return job;
}

json curves_json(const std::vector<metrics::MetricCurve>& curves) {
  json arr = json::array();
  for (const auto& c : curves) {
    json values = json::array();
    json gaps = json::array();
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      if (c.values[i]) {
        values.push_back(*c.values[i]);
      } else {
        values.push_back(nullptr);
        gaps.push_back(c.steps[i]);
      }
    }
    arr.push_back({{"kind", metrics::to_string(c.kind)},
                   {"higher_is_better", metrics::higher_is_better(c.kind)},
                   {"steps", c.steps},
                   {"values", values},
                   {"gaps", gaps}});
  }
  return {{"curves", arr}};
}

void check_trace(const svc::DiffusionTrace& t) {
  if (t.trace_id.empty()) throw InvalidArgument("trace: empty id");
  if (t.trace_id.find_first_of("/\\.") != std::string::npos) {
    throw InvalidArgument("trace: id must not contain path characters");
  }
  if (t.steps.empty() || t.steps.back().step != 0) {
    throw InvalidArgument("trace: incomplete (must end at step 0)");
  }
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const auto& s = t.steps[i];
    if (i > 0 && s.step >= t.steps[i - 1].step) {
      throw InvalidArgument("trace: steps must be strictly decreasing");
    }
    if (s.y.rows() != t.frames || s.y.cols() != t.n_mels || s.x0_hat.rows() != t.frames ||
        s.x0_hat.cols() != t.n_mels || static_cast<int>(s.f0.size()) != t.frames) {
      throw InvalidArgument("trace: step payload has the wrong shape");
    }
    if (!s.y.allFinite() || !s.x0_hat.allFinite()) {
      throw InvalidArgument("trace: non-finite mel at step " + std::to_string(s.step));
    }
    if (s.taps.empty()) throw InvalidArgument("trace: missing embedding taps");
  }
}

}  // namespace

json dsp_to_json(const audio::DspConfig& d) {
  return {{"sample_rate", d.sample_rate}, {"n_fft", d.n_fft},
          {"hop_length", d.hop_length}, {"win_length", d.win_length},
          {"n_mels", d.n_mels},        {"f_min", d.f_min},
          {"f_max", d.f_max},          {"log_floor", d.log_floor},
          {"f0_min", d.f0_min},        {"f0_max", d.f0_max},
          {"yin_threshold", d.yin_threshold},
          {"griffin_lim_iters", d.griffin_lim_iters},
          {"griffin_lim_momentum", d.griffin_lim_momentum},
          {"peak_level", d.peak_level}};
}

audio::DspConfig dsp_from_json(const json& j) {
  audio::DspConfig d;
  d.sample_rate = j.at("sample_rate");
  d.n_fft = j.at("n_fft");
  d.hop_length = j.at("hop_length");
  d.win_length = j.at("win_length");
  d.n_mels = j.at("n_mels");
  d.f_min = j.at("f_min");
  d.f_max = j.at("f_max");
  d.log_floor = j.at("log_floor");
  d.f0_min = j.at("f0_min");
  d.f0_max = j.at("f0_max");
  d.yin_threshold = j.at("yin_threshold");
  d.griffin_lim_iters = j.at("griffin_lim_iters");
  d.griffin_lim_momentum = j.at("griffin_lim_momentum");
  d.peak_level = j.at("peak_level");
  return d;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (".tmp-" + target.filename().string() + "-" + unique_suffix());
  try {
    write_file(tmp, bytes);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

TraceStore::TraceStore(std::string root) : root_(std::move(root)) {
  for (const char* sub : {"traces", "checkpoints", "cache", "projections", "metrics", "corpus"}) {
    fs::create_directories(fs::path(root_) / sub);
  }
}

std::string TraceStore::corpus_dir() const { return (fs::path(root_) / "corpus").string(); }
std::string TraceStore::cache_dir() const { return (fs::path(root_) / "cache").string(); }
std::string TraceStore::trace_dir(const std::string& id) const {
  return (fs::path(root_) / "traces" / id).string();
}

json TraceStore::load_catalog_unlocked() const {
  const fs::path p = fs::path(root_) / "catalog.json";
  if (!fs::exists(p)) {
    return {{"version", 1}, {"corpus", nullptr}, {"checkpoints", json::array()},
            {"active_checkpoint", nullptr}, {"traces", json::array()}};
  }
  return json::parse(read_file(p.string()));
}

json TraceStore::catalog() const {
  std::lock_guard lock(catalog_mu_);
  json c = load_catalog_unlocked();
  json modes = json::array();
  for (DisplayMode m : kDisplayModes) modes.push_back(to_string(m));
  c["display_modes"] = modes;
  return c;
}

void TraceStore::update_catalog(const std::function<void(json&)>& fn) {
  std::lock_guard lock(catalog_mu_);
  json c = load_catalog_unlocked();
  fn(c);
  write_file_atomic((fs::path(root_) / "catalog.json").string(), c.dump(2));
}

void TraceStore::set_corpus(const svc::Corpus& corpus) {
  json singers = json::array();
  for (const auto& s : corpus.singers) {
    singers.push_back({{"id", s.singer_id},
                       {"register_multiplier", s.register_multiplier},
                       {"register", s.register_multiplier < 1.0 ? "low" : "high"}});
  }
  json songs = json::array();
  for (const auto& s : corpus.songs) {
    songs.push_back({{"id", s.song_id}, {"duration_ms", s.duration_ms()},
                     {"notes", s.notes.size()}});
  }
  update_catalog([&](json& c) {
    c["corpus"] = {{"seed", corpus.seed}, {"sample_rate", corpus.sample_rate},
                   {"manifest", "corpus/manifest.json"},
                   {"singers", singers}, {"songs", songs}};
  });
}

std::optional<svc::Corpus> TraceStore::corpus() const {
  if (!fs::exists(fs::path(corpus_dir()) / "manifest.json")) return std::nullopt;
  return svc::load_corpus(corpus_dir());
}

std::string TraceStore::put_checkpoint(const diffusion::Checkpoint& ckpt) {
  const std::string fp = ckpt.fingerprint();
  const fs::path path = fs::path(root_) / "checkpoints" / (fp + ".ckpt");
  if (!fs::exists(path)) write_file_atomic(path.string(), diffusion::serialize_checkpoint(ckpt));
  update_catalog([&](json& c) {
    bool known = false;
    for (const auto& e : c["checkpoints"]) known = known || e["fingerprint"] == fp;
    if (!known) {
      c["checkpoints"].push_back({{"fingerprint", fp},
                                  {"path", "checkpoints/" + fp + ".ckpt"},
                                  {"train_steps", ckpt.train_steps},
                                  {"channels", ckpt.arch.channels},
                                  {"layers", ckpt.arch.layers},
                                  {"T", ckpt.schedule.T}});
    }
    c["active_checkpoint"] = fp;
  });
  return fp;
}

std::optional<std::string> TraceStore::active_checkpoint() const {
  const json c = catalog();
  if (c["active_checkpoint"].is_null()) return std::nullopt;
  return c["active_checkpoint"].get<std::string>();
}

diffusion::Checkpoint TraceStore::load_checkpoint(const std::string& fingerprint) const {
  const fs::path path = fs::path(root_) / "checkpoints" / (fingerprint + ".ckpt");
  if (!fs::exists(path)) throw NotFound("unknown checkpoint " + fingerprint);
  return diffusion::load_checkpoint(path.string());
}

bool TraceStore::has_trace(const std::string& id) const {
  const json c = catalog();
  for (const auto& t : c["traces"]) {
    if (t["id"] == id) return true;
  }
  return false;
}

std::vector<std::string> TraceStore::trace_ids() const {
  std::vector<std::string> ids;
  const json c = catalog();
  for (const auto& t : c.at("traces")) ids.push_back(t.at("id"));
  return ids;
}

void TraceStore::write_trace(const svc::DiffusionTrace& t,
                             const std::vector<ProjectionRecord>& projections,
                             const std::vector<metrics::MetricCurve>& curves) {
  check_trace(t);
  if (has_trace(t.trace_id) || fs::exists(trace_dir(t.trace_id))) {
    throw Conflict("trace " + t.trace_id + " already exists");
  }
  const fs::path tmp = fs::path(root_) / "traces" / (".tmp-" + t.trace_id + "-" + unique_suffix());
  auto stage = [&](std::string_view name) {
    if (fault_hook_) fault_hook_(name);
  };
  try {
    fs::create_directories(tmp);
    const std::size_t n = t.steps.size();

    std::vector<const diffusion::MatrixF*> ys, xs;
    Blob f0;
    f0.dims = {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(t.frames)};
    for (const auto& s : t.steps) {
      ys.push_back(&s.y);
      xs.push_back(&s.x0_hat);
      for (double v : s.f0.f0_hz) f0.data.push_back(static_cast<float>(v));
    }
    stage("y");
    write_file(tmp / mel_blob_name(false), encode_blob(matrix_blob(ys)));
    stage("x0");
    write_file(tmp / mel_blob_name(true), encode_blob(matrix_blob(xs)));
    stage("f0");
    write_file(tmp / "f0.bin", encode_blob(f0));

    json blobs = {{"y", {n, t.frames, t.n_mels}}, {"x0", {n, t.frames, t.n_mels}},
                  {"f0", {n, t.frames}}};
    for (const auto& [kind, layer] : diffusion::tap_combinations()) {
      std::vector<int> labels;
      std::vector<diffusion::EmbeddingTaps> taps;
      for (const auto& s : t.steps) {
        labels.push_back(s.step);
        taps.push_back(s.taps);
      }
      const diffusion::EmbeddingSequence seq =
          diffusion::capture_embeddings(labels, taps, kind, layer);
      Blob b;
      b.dims = {static_cast<std::uint32_t>(seq.matrix.rows()),
                static_cast<std::uint32_t>(seq.matrix.cols())};
      const diffusion::MatrixF m = seq.matrix.cast<float>();
      b.data.assign(m.data(), m.data() + m.size());
      stage(tap_blob_name(kind, layer));
      write_file(tmp / tap_blob_name(kind, layer), encode_blob(b));
    }

    json proj = json::array();
    for (const ProjectionRecord& p : projections) {
      Blob pts;
      pts.dims = {static_cast<std::uint32_t>(p.map.points.rows()), 2};
      const diffusion::MatrixF m = p.map.points.cast<float>();
      pts.data.assign(m.data(), m.data() + m.size());
      Blob kl;
      kl.dims = {static_cast<std::uint32_t>(p.map.kl.size())};
      for (double v : p.map.kl) kl.data.push_back(static_cast<float>(v));
      stage(projection_blob_name(p.kind, p.layer));
      write_file(tmp / projection_blob_name(p.kind, p.layer), encode_blob(pts));
      write_file(tmp / kl_blob_name(p.kind, p.layer), encode_blob(kl));
      proj.push_back({{"embedding", diffusion::to_string(p.kind)},
                      {"layer", diffusion::to_string(p.layer)},
                      {"perplexity", p.map.perplexity},
                      {"steps", p.map.steps},
                      // Same precision as the KL blob.
                      {"kl_initial", static_cast<float>(p.map.kl.front())},
                      {"kl_final", static_cast<float>(p.map.kl.back())}});
    }

    stage("metrics");
    write_file(tmp / "metrics.json", curves_json(curves).dump(2));

    json meta = {{"id", t.trace_id},
                 {"job", job_json(t.job)},
                 {"checkpoint", t.checkpoint},
                 {"T", t.T},
                 {"alpha_bar", t.alpha_bar},
                 {"normalizer", {{"min", t.normalizer.min}, {"max", t.normalizer.max}}},
                 {"dsp", dsp_to_json(t.dsp)},
                 {"frames", t.frames},
                 {"n_mels", t.n_mels},
                 {"steps", t.step_labels()},
                 {"content_hash", t.content_hash()},
                 {"blobs", blobs},
                 {"projections", proj}};
    json model_t = json::array();
    for (const auto& s : t.steps) model_t.push_back(s.model_t);
    meta["model_t"] = model_t;
    stage("meta");
    write_file(tmp / "meta.json", meta.dump(2));

    stage("rename");
    fs::rename(tmp, trace_dir(t.trace_id));
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  try {
    stage("catalog");
    update_catalog([&](json& c) {
      json entry = job_json(t.job);
      entry["id"] = t.trace_id;
      entry["checkpoint"] = t.checkpoint;
      entry["content_hash"] = t.content_hash();
      c["traces"].push_back(entry);
    });
  } catch (...) {
    std::error_code ec;
    fs::remove_all(trace_dir(t.trace_id), ec);
    throw;
  }
}

json TraceStore::read_meta(const std::string& id) const {
  if (!has_trace(id)) throw NotFound("unknown trace " + id);
  return json::parse(read_file((fs::path(trace_dir(id)) / "meta.json").string()));
}

std::string TraceStore::read_blob_bytes(const std::string& id, const std::string& name) const {
  if (!has_trace(id)) throw NotFound("unknown trace " + id);
  const fs::path p = fs::path(trace_dir(id)) / name;
  if (name.find('/') != std::string::npos || !fs::exists(p)) {
    throw NotFound("trace " + id + " has no blob " + name);
  }
  return read_file(p.string());
}

Blob TraceStore::read_blob(const std::string& id, const std::string& name) const {
  return decode_blob(read_blob_bytes(id, name));
}

svc::DiffusionTrace TraceStore::read_trace(const std::string& id) const {
  const json meta = read_meta(id);
  svc::DiffusionTrace t;
  t.trace_id = meta.at("id");
  t.job = job_from_json(meta.at("job"));
  t.checkpoint = meta.at("checkpoint");
  t.T = meta.at("T");
  t.alpha_bar = meta.at("alpha_bar").get<std::vector<double>>();
  t.normalizer.min = meta.at("normalizer").at("min").get<std::vector<float>>();
  t.normalizer.max = meta.at("normalizer").at("max").get<std::vector<float>>();
  t.dsp = dsp_from_json(meta.at("dsp"));
  t.frames = meta.at("frames");
  t.n_mels = meta.at("n_mels");
  const auto steps = meta.at("steps").get<std::vector<int>>();
  const auto model_t = meta.at("model_t").get<std::vector<int>>();
  const Blob y = read_blob(id, mel_blob_name(false));
  const Blob x0 = read_blob(id, mel_blob_name(true));
  const Blob f0 = read_blob(id, "f0.bin");
  std::vector<Blob> taps;
  const auto combos = diffusion::tap_combinations();
  for (const auto& [kind, layer] : combos) taps.push_back(read_blob(id, tap_blob_name(kind, layer)));
  for (std::size_t i = 0; i < steps.size(); ++i) {
    svc::TraceStep s;
    s.step = steps[i];
    s.model_t = model_t[i];
    s.y = Eigen::Map<const diffusion::MatrixF>(y.slice(i).data(), t.frames, t.n_mels);
    s.x0_hat = Eigen::Map<const diffusion::MatrixF>(x0.slice(i).data(), t.frames, t.n_mels);
    const auto f = f0.slice(i);
    s.f0.f0_hz.assign(f.begin(), f.end());
    for (std::size_t k = 0; k < combos.size(); ++k) {
      const auto row = taps[k].slice(i);
      std::vector<float> v(row.begin(), row.end());
      const auto [kind, layer] = combos[k];
      const int slot = static_cast<int>(layer);
      if (kind == diffusion::TapKind::kStep) {
        s.taps.step = std::move(v);
      } else if (kind == diffusion::TapKind::kStepNoise) {
        s.taps.step_noise[slot] = std::move(v);
      } else {
        s.taps.step_noise_cond[slot] = std::move(v);
      }
    }
    t.steps.push_back(std::move(s));
  }
  return t;
}

ProjectionRecord TraceStore::read_projection(const std::string& id, diffusion::TapKind kind,
                                             diffusion::TapLayer layer) const {
  if (kind == diffusion::TapKind::kStep) layer = diffusion::TapLayer::kFirst;
  const json meta = read_meta(id);
  ProjectionRecord r;
  r.kind = kind;
  r.layer = layer;
  for (const auto& p : meta.at("projections")) {
    if (p.at("embedding") == diffusion::to_string(kind) &&
        p.at("layer") == diffusion::to_string(layer)) {
      r.map.perplexity = p.at("perplexity");
      r.map.steps = p.at("steps").get<std::vector<int>>();
    }
  }
  const Blob pts = read_blob(id, projection_blob_name(kind, layer));
  const Blob kl = read_blob(id, kl_blob_name(kind, layer));
  r.map.points = Eigen::Map<const diffusion::MatrixF>(pts.data.data(), pts.dims[0], 2).cast<double>();
  r.map.kl.assign(kl.data.begin(), kl.data.end());
  return r;
}

std::vector<metrics::MetricCurve> TraceStore::read_curves(const std::string& id) const {
  const json j = json::parse(read_blob_bytes(id, "metrics.json"));
  std::vector<metrics::MetricCurve> out;
  for (const auto& c : j.at("curves")) {
    metrics::MetricCurve curve;
    curve.kind = *metrics::parse_metric_kind(c.at("kind").get<std::string>());
    curve.steps = c.at("steps").get<std::vector<int>>();
    for (const auto& v : c.at("values")) {
      curve.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
    out.push_back(std::move(curve));
  }
  return out;
}

void TraceStore::write_joint_projection(const std::string& key,
                                        const projection::JointProjection& p) {
  const fs::path dir = fs::path(root_) / "projections";
  Blob pts;
  pts.dims = {static_cast<std::uint32_t>(p.map.points.rows()), 2};
  const diffusion::MatrixF m = p.map.points.cast<float>();
  pts.data.assign(m.data(), m.data() + m.size());
  json meta = {{"steps", p.map.steps}, {"offsets", p.offsets},
               {"perplexity", p.map.perplexity}, {"kl", p.map.kl}};
  write_file_atomic((dir / (key + ".bin")).string(), encode_blob(pts));
  write_file_atomic((dir / (key + ".json")).string(), meta.dump());
}

std::optional<projection::JointProjection> TraceStore::read_joint_projection(
    const std::string& key) const {
  const fs::path dir = fs::path(root_) / "projections";
  if (!fs::exists(dir / (key + ".json")) || !fs::exists(dir / (key + ".bin"))) return std::nullopt;
  const json meta = json::parse(read_file((dir / (key + ".json")).string()));
  const Blob pts = decode_blob(read_file((dir / (key + ".bin")).string()));
  projection::JointProjection p;
  p.offsets = meta.at("offsets").get<std::vector<int>>();
  p.map.steps = meta.at("steps").get<std::vector<int>>();
  p.map.perplexity = meta.at("perplexity");
  p.map.kl = meta.at("kl").get<std::vector<double>>();
  p.map.points = Eigen::Map<const diffusion::MatrixF>(pts.data.data(), pts.dims[0], 2).cast<double>();
  return p;
}

void TraceStore::write_summary(const json& summary) {
  write_file_atomic((fs::path(root_) / "metrics" / "summary.json").string(), summary.dump(2));
}

std::optional<json> TraceStore::read_summary() const {
  const fs::path p = fs::path(root_) / "metrics" / "summary.json";
  if (!fs::exists(p)) return std::nullopt;
  return json::parse(read_file(p.string()));
}

}  // namespace singtrace::service
