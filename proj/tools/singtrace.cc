#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "singtrace/error.h"
#include "singtrace/service/api.h"
#include "singtrace/service/store.h"
#include "singtrace/service/workflow.h"
#include "singtrace/svc/corpus.h"
#include "singtrace/svc/pipeline.h"

namespace {

using namespace singtrace;
using nlohmann::json;

constexpr int kUsageError = 2;

// Settings merged from --config (a JSON object) and the command line; flags
// win over the file.
struct Settings {
  std::string root;
  std::optional<std::uint64_t> seed;

  svc::CorpusOptions corpus;
  diffusion::TrainConfig train;
  service::WorkflowConfig workflow;
};

template <typename T>
void read_key(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void apply_config(const std::string& path, Settings& s) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path);
  const json j = json::parse(in);
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  read_key(j, "root", s.root);
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("corpus")) {
    const json& c = j.at("corpus");
    read_key(c, "singers", s.corpus.n_singers);
    read_key(c, "songs", s.corpus.n_songs);
    read_key(c, "song_ms", s.corpus.song_ms);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    read_key(t, "steps", s.train.steps);
    read_key(t, "batch_size", s.train.batch_size);
    read_key(t, "crop_frames", s.train.crop_frames);
    read_key(t, "learning_rate", s.train.learning_rate);
    read_key(t, "channels", s.train.arch.channels);
    read_key(t, "layers", s.train.arch.layers);
    read_key(t, "T", s.train.schedule.T);
    read_key(t, "beta_start", s.train.schedule.beta_start);
    read_key(t, "beta_end", s.train.schedule.beta_end);
  }
  if (j.contains("convert")) {
    const json& c = j.at("convert");
    read_key(c, "render_threads", s.workflow.convert.render_threads);
    read_key(c, "clip_x0", s.workflow.convert.clip_x0);
  }
  if (j.contains("tsne")) {
    const json& t = j.at("tsne");
    read_key(t, "perplexity", s.workflow.tsne.perplexity);
    read_key(t, "iterations", s.workflow.tsne.iterations);
  }
}

void print_summary(const json& summary) {
  std::printf("pool of %d traces\n", summary.at("pool_size").get<int>());
  std::printf("%-8s %-6s %12s %12s %6s  %s\n", "metric", "better", "mean", "display", "count",
              "best");
  for (const json& e : summary.at("entries")) {
    const auto num = [](const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
    std::printf("%-8s %-6s %12.4f %12.4f %6d  %s\n", e.at("kind").get<std::string>().c_str(),
                e.at("higher_is_better").get<bool>() ? "higher" : "lower", num(e.at("mean")),
                num(e.at("display")), e.at("count").get<int>(),
                e.at("best").is_null() ? "-" : e.at("best").get<std::string>().c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"singtrace: diffusion singing-voice-conversion tracer"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  Settings s;
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::string root_flag;
  app.add_option("--config", config_path, "JSON settings file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed_flag, "Seed for the command's random draws");
  app.add_option("--root", root_flag, "Store directory (default: $SINGTRACE_ROOT or ./singtrace_store)");

  auto* corpus_cmd = app.add_subcommand("corpus", "Build the synthetic singer corpus");
  std::optional<int> n_singers, n_songs;
  std::optional<double> song_ms;
  corpus_cmd->add_option("--singers", n_singers, "Number of singers")->check(CLI::Range(2, 64));
  corpus_cmd->add_option("--songs", n_songs, "Number of songs")->check(CLI::Range(2, 64));
  corpus_cmd->add_option("--song-ms", song_ms, "Song length in milliseconds");

  auto* train_cmd = app.add_subcommand("train", "Train a denoiser checkpoint on the corpus");
  std::optional<int> train_steps, channels, batch;
  std::optional<double> lr;
  train_cmd->add_option("--steps", train_steps, "Optimiser steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--channels", channels, "Residual channels")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", lr, "Peak learning rate")->check(CLI::PositiveNumber);

  auto* convert_cmd = app.add_subcommand("convert", "Run one conversion job into the store");
  svc::ConversionJob job;
  convert_cmd->add_option("--source", job.source_singer, "Source singer id")->required();
  convert_cmd->add_option("--song", job.song, "Song id")->required();
  convert_cmd->add_option("--target", job.target_singer, "Target singer id")->required();
  convert_cmd->add_option("--steps", job.num_steps, "Sampler steps")->check(CLI::PositiveNumber);

  auto* metrics_cmd = app.add_subcommand("metrics", "Summarise final-step metrics over a pool");
  std::string pool = "all";
  metrics_cmd->add_option("--pool", pool, "'all' or comma-separated trace ids");

  auto* project_cmd = app.add_subcommand("project", "Recompute t-SNE projections");
  std::string project_trace = "all";
  project_cmd->add_option("--trace", project_trace, "'all' or a trace id");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the viewer API over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--host", host, "Listen address");
  serve_cmd->add_option("--port", port, "Listen port")->check(CLI::Range(1, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help() << "\n";
    return kUsageError;
  }

  try {
    if (!config_path.empty()) apply_config(config_path, s);
    if (seed_flag) s.seed = seed_flag;
    if (!root_flag.empty()) {
      s.root = root_flag;
    } else if (s.root.empty()) {
      const char* env = std::getenv("SINGTRACE_ROOT");
      s.root = env != nullptr && *env != '\0' ? env : "singtrace_store";
    }
    service::TraceStore store(s.root);

    if (corpus_cmd->parsed()) {
      if (n_singers) s.corpus.n_singers = *n_singers;
      if (n_songs) s.corpus.n_songs = *n_songs;
      if (song_ms) s.corpus.song_ms = *song_ms;
      if (s.seed) s.corpus.seed = *s.seed;
      const svc::Corpus corpus = svc::build_corpus(s.corpus, store.corpus_dir());
      store.set_corpus(corpus);
      std::printf("corpus: %zu singers x %zu songs -> %s\n", corpus.singers.size(),
                  corpus.songs.size(), store.corpus_dir().c_str());
    } else if (train_cmd->parsed()) {
      if (train_steps) s.train.steps = *train_steps;
      if (channels) s.train.arch.channels = *channels;
      if (batch) s.train.batch_size = *batch;
      if (lr) s.train.learning_rate = *lr;
      const std::optional<svc::Corpus> corpus = store.corpus();
      if (!corpus) throw NotFound("store has no corpus; run the corpus command first");
      s.train.arch.n_speakers = static_cast<int>(corpus->singers.size());
      const diffusion::TrainingSet data =
          svc::prepare_training(*corpus, store.corpus_dir(), s.workflow.convert.dsp);
      const auto start = std::chrono::steady_clock::now();
      diffusion::TrainHooks hooks;
      const int every = std::max(1, s.train.steps / 20);
      hooks.on_stats = [&](const diffusion::TrainStats& st) {
        if (st.step % every != 0 && st.step != s.train.steps) return;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "step %6d  loss %.5f  smoothed %.5f  |g| %.4f  %.1fs\n", st.step,
                     st.loss, st.smoothed_loss, st.grad_norm, secs);
      };
      const diffusion::Checkpoint ckpt = diffusion::train(data, s.train, s.seed.value_or(42), hooks);
      std::printf("checkpoint %s\n", store.put_checkpoint(ckpt).c_str());
    } else if (convert_cmd->parsed()) {
      job.seed = s.seed.value_or(0);
      const service::ConversionContext ctx = service::load_context(store);
      const service::ConversionResult r = service::run_conversion(store, ctx, job, s.workflow);
      std::printf("trace %s\ncontent_hash %s%s\n", r.trace_id.c_str(), r.content_hash.c_str(),
                  r.cached ? "\n(already stored)" : "");
    } else if (metrics_cmd->parsed()) {
      std::vector<std::string> ids;
      if (pool == "all") {
        ids = store.trace_ids();
      } else {
        std::stringstream ss(pool);
        for (std::string id; std::getline(ss, id, ',');) {
          if (!id.empty()) ids.push_back(id);
        }
      }
      for (const auto& id : ids) {
        if (!store.has_trace(id)) throw NotFound("unknown trace " + id);
      }
      if (ids.empty()) throw InvalidArgument("metric pool is empty");
      print_summary(service::pool_summary(store, ids));
    } else if (project_cmd->parsed()) {
      if (s.seed) s.workflow.tsne.seed = *s.seed;
      std::vector<std::string> ids =
          project_trace == "all" ? store.trace_ids() : std::vector<std::string>{project_trace};
      for (const auto& id : ids) {
        const int n = service::reproject_trace(store, id, s.workflow.tsne);
        std::printf("%s: %d projections\n", id.c_str(), n);
      }
    } else if (serve_cmd->parsed()) {
      service::Api api(store, s.workflow);
      service::serve(api, host, port);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
