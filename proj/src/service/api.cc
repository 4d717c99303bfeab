#include "singtrace/service/api.h"

#include <charconv>

#include "singtrace/error.h"
#include "singtrace/service/wire.h"

namespace singtrace::service {

using nlohmann::json;

namespace {

ApiResponse json_response(const json& j, int status = 200) {
  return {status, "application/json", j.dump()};
}

ApiResponse error_response(int status, const std::string& message) {
  return json_response({{"error", message}}, status);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = s.find(sep, start);
    const std::size_t stop = end == std::string::npos ? s.size() : end;
    if (stop > start) parts.push_back(s.substr(start, stop - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return parts;
}

int parse_int(const std::string& text, const std::string& what) {
  int v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw InvalidArgument(what + " must be an integer, got '" + text + "'");
  }
  return v;
}

const std::string& required(const ApiRequest& r, const std::string& key) {
  const auto it = r.query.find(key);
  if (it == r.query.end()) throw InvalidArgument("missing query parameter '" + key + "'");
  return it->second;
}

int step_param(const ApiRequest& r) { return parse_int(required(r, "step"), "step"); }

// Row index of `step` in a stored trace.
std::size_t step_index(const json& meta, int step) {
  const auto& steps = meta.at("steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].get<int>() == step) return i;
  }
  throw NotFound("trace " + meta.at("id").get<std::string>() + " has no step " +
                 std::to_string(step));
}

std::pair<std::string, int> trace_step(const std::string& text) {
  const std::size_t colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw InvalidArgument("expected {id}:{step}, got '" + text + "'");
  }
  return {text.substr(0, colon), parse_int(text.substr(colon + 1), "step")};
}

}  // namespace

Api::Api(TraceStore& store, WorkflowConfig cfg) : store_(store), cfg_(std::move(cfg)) {}

ApiResponse Api::handle(const ApiRequest& request) {
  try {
    return route(request);
  } catch (const InvalidArgument& e) {
    return error_response(400, e.what());
  } catch (const json::exception& e) {
    return error_response(400, std::string("malformed request: ") + e.what());
  } catch (const NotFound& e) {
    return error_response(404, e.what());
  } catch (const Conflict& e) {
    return error_response(409, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

std::shared_ptr<const ConversionContext> Api::context() {
  const std::optional<std::string> fp = store_.active_checkpoint();
  std::lock_guard lock(mu_);
  if (!context_ || !fp || context_->fingerprint != *fp) {
    context_ = std::make_shared<const ConversionContext>(load_context(store_));
  }
  return context_;
}

ApiResponse Api::route(const ApiRequest& r) {
  const std::vector<std::string> parts = split(r.path, '/');
  if (r.method == "POST") {
    if (parts == std::vector<std::string>{"convert"}) return convert(r);
    return error_response(404, "no such endpoint " + r.path);
  }
  if (r.method != "GET") return error_response(405, "method not allowed");

  if (parts == std::vector<std::string>{"catalog"}) {
    const json c = store_.catalog();
    json out = {{"display_modes", c.at("display_modes")},
                {"singers", json::array()},
                {"songs", json::array()},
                {"traces", c.at("traces")},
                {"checkpoints", c.at("checkpoints")},
                {"active_checkpoint", c.at("active_checkpoint")}};
    if (!c.at("corpus").is_null()) {
      out["singers"] = c["corpus"]["singers"];
      out["songs"] = c["corpus"]["songs"];
    }
    return json_response(out);
  }

  if (parts.size() == 3 && parts[0] == "trace") {
    const std::string& id = parts[1];
    const std::string& what = parts[2];
    if (!store_.has_trace(id)) throw NotFound("unknown trace " + id);
    if (what == "meta") {
      return {200, "application/json", store_.read_blob_bytes(id, "meta.json")};
    }
    if (what == "metrics") {
      return {200, "application/json", store_.read_blob_bytes(id, "metrics.json")};
    }
    if (what == "mel") {
      const int step = step_param(r);
      const auto src = r.query.find("source");
      const std::string source = src == r.query.end() ? "x0" : src->second;
      if (source != "x0" && source != "y") {
        throw InvalidArgument("source must be 'x0' or 'y'");
      }
      const json meta = store_.read_meta(id);
      const std::size_t i = step_index(meta, step);
      const Blob b = store_.read_blob(id, mel_blob_name(source == "x0"));
      json out = matrix_envelope({b.dims[1], b.dims[2]}, b.slice(i));
      out["trace"] = id;
      out["step"] = step;
      out["source"] = source;
      out["normalized"] = true;
      return json_response(out);
    }
    if (what == "f0") {
      const int step = step_param(r);
      const json meta = store_.read_meta(id);
      const std::size_t i = step_index(meta, step);
      const Blob b = store_.read_blob(id, "f0.bin");
      json out = matrix_envelope({b.dims[1]}, b.slice(i));
      out["trace"] = id;
      out["step"] = step;
      out["hop_seconds"] = meta.at("dsp").at("hop_length").get<double>() /
                           meta.at("dsp").at("sample_rate").get<double>();
      return json_response(out);
    }
    if (what == "audio") {
      return {200, "audio/wav", step_audio(store_, id, step_param(r))};
    }
    if (what == "projection") {
      const auto kind = diffusion::parse_tap_kind(required(r, "embedding"));
      if (!kind) throw InvalidArgument("unknown embedding '" + required(r, "embedding") + "'");
      diffusion::TapLayer layer = diffusion::TapLayer::kFirst;
      if (*kind != diffusion::TapKind::kStep) {
        const auto l = diffusion::parse_tap_layer(required(r, "layer"));
        if (!l) throw InvalidArgument("unknown layer '" + required(r, "layer") + "'");
        layer = *l;
      }
      std::vector<std::string> ids = {id};
      if (const auto w = r.query.find("with"); w != r.query.end()) {
        for (const std::string& other : split(w->second, ',')) {
          if (!store_.has_trace(other)) throw NotFound("unknown trace " + other);
          ids.push_back(other);
        }
      }
      const projection::JointProjection p =
          trace_projection(store_, ids, *kind, layer, cfg_.tsne);
      json points = json::array();
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const int begin = p.offsets[k];
        const int end = k + 1 < ids.size() ? p.offsets[k + 1] : static_cast<int>(p.map.steps.size());
        json traj = json::array();
        for (int row = begin; row < end; ++row) {
          traj.push_back({{"x", p.map.points(row, 0)}, {"y", p.map.points(row, 1)},
                          {"step", p.map.steps[row]}});
        }
        points.push_back({{"trace", ids[k]}, {"trajectory", traj}});
      }
      return json_response({{"embedding", diffusion::to_string(*kind)},
                            {"layer", diffusion::to_string(layer)},
                            {"perplexity", p.map.perplexity},
                            {"kl_initial", p.map.kl.front()},
                            {"kl_final", p.map.kl.back()},
                            {"traces", points}});
    }
    return error_response(404, "no such endpoint " + r.path);
  }

  if (parts == std::vector<std::string>{"meldiff"}) {
    const auto [a, sa] = trace_step(required(r, "a"));
    const auto [b, sb] = trace_step(required(r, "b"));
    if (!store_.has_trace(a)) throw NotFound("unknown trace " + a);
    if (!store_.has_trace(b)) throw NotFound("unknown trace " + b);
    const audio::MelDiffMap d = step_mel_diff(store_, a, sa, b, sb);
    json out = matrix_envelope({static_cast<std::uint32_t>(d.frames),
                                static_cast<std::uint32_t>(d.n_mels)},
                               d.values);
    out["max_value"] = d.max_value;
    return json_response(out);
  }

  if (parts.size() == 2 && parts[0] == "metrics") {
    const std::optional<json> summary = store_.read_summary();
    if (!summary) throw NotFound("no metric summary; run the metrics command first");
    if (parts[1] == "summary") return json_response(*summary);
    if (parts[1] == "best") {
      const std::string& text = required(r, "kind");
      const auto kind = metrics::parse_metric_kind(text);
      if (!kind) throw InvalidArgument("unknown metric kind '" + text + "'");
      for (const json& e : summary->at("entries")) {
        if (e.at("kind") != metrics::to_string(*kind)) continue;
        if (e.at("best").is_null()) {
          throw NotFound("no pool member defines " + std::string(metrics::to_string(*kind)));
        }
        const std::string best = e.at("best");
        json curve = nullptr;
        for (const auto& c : store_.read_curves(best)) {
          if (c.kind != *kind) continue;
          json values = json::array();
          for (const auto& v : c.values) values.push_back(v ? json(*v) : json(nullptr));
          curve = {{"steps", c.steps}, {"values", values}};
        }
        json value = nullptr;
        for (const json& t : summary->at("traces")) {
          if (t.at("id") == best) value = t.at("final").at(std::string(metrics::to_string(*kind)));
        }
        return json_response({{"kind", metrics::to_string(*kind)},
                              {"higher_is_better", metrics::higher_is_better(*kind)},
                              {"trace_id", best},
                              {"value", value},
                              {"curve", curve}});
      }
    }
  }
  return error_response(404, "no such endpoint " + r.path);
}

ApiResponse Api::convert(const ApiRequest& r) {
  const json body = json::parse(r.body);
  if (!body.is_object()) throw InvalidArgument("request body must be an object");
  svc::ConversionJob job;
  job.source_singer = body.at("source_singer").get<int>();
  job.song = body.at("song").get<int>();
  job.target_singer = body.at("target_singer").get<int>();
  job.num_steps = body.value("num_steps", job.num_steps);
  job.seed = body.value("seed", job.seed);

  const std::shared_ptr<const ConversionContext> ctx = context();
  job.validate(ctx->corpus, ctx->checkpoint.schedule.T);
  const std::string id = svc::make_trace_id(job, ctx->fingerprint);

  {
    std::lock_guard lock(mu_);
    if (in_flight_.count(id) != 0) throw Conflict("conversion " + id + " is already running");
    if (store_.has_trace(id)) {
      return json_response({{"trace_id", id},
                            {"content_hash", store_.read_meta(id).at("content_hash")},
                            {"cached", true}});
    }
    in_flight_.insert(id);
  }
  try {
    if (conversion_hook_) conversion_hook_(id);
    const ConversionResult result = run_conversion(store_, *ctx, job, cfg_);
    {
      std::lock_guard lock(mu_);
      in_flight_.erase(id);
    }
    return json_response(
        {{"trace_id", result.trace_id}, {"content_hash", result.content_hash}, {"cached", false}},
        201);
  } catch (...) {
    std::lock_guard lock(mu_);
    in_flight_.erase(id);
    throw;
  }
}

}  // namespace singtrace::service
