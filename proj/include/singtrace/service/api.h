#ifndef SINGTRACE_SERVICE_API_H_
#define SINGTRACE_SERVICE_API_H_

#include <functional>
#include <map>
#include <set>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "singtrace/service/store.h"
#include "singtrace/service/workflow.h"

namespace singtrace::service {

struct ApiRequest {
  std::string method = "GET";
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Transport-independent request handling for the viewer API:
//   GET  /catalog
//   GET  /trace/{id}/meta
//   GET  /trace/{id}/mel?step=&source=x0|y
//   GET  /trace/{id}/f0?step=
//   GET  /trace/{id}/audio?step=
//   GET  /trace/{id}/metrics
//   GET  /trace/{id}/projection?embedding=&layer=&with=
//   GET  /meldiff?a={id}:{step}&b={id}:{step}
//   GET  /metrics/summary
//   GET  /metrics/best?kind=
//   POST /convert  {"source_singer","song","target_singer","num_steps","seed"}
// Errors map to 400 (malformed), 404 (unknown id or step), 409 (identical
// conversion already running) with a {"error": message} body.
class Api {
 public:
  Api(TraceStore& store, WorkflowConfig cfg = {});

  ApiResponse handle(const ApiRequest& request);

  // Runs inside a conversion after its in-flight slot is claimed; tests use
  // it to hold a job open.
  void set_conversion_hook(std::function<void(const std::string& trace_id)> hook) {
    conversion_hook_ = std::move(hook);
  }

 private:
  ApiResponse route(const ApiRequest& request);
  ApiResponse convert(const ApiRequest& request);
  std::shared_ptr<const ConversionContext> context();

  TraceStore& store_;
  WorkflowConfig cfg_;
  std::mutex mu_;
  std::shared_ptr<const ConversionContext> context_;
  std::set<std::string> in_flight_;  // trace ids being computed
  std::function<void(const std::string&)> conversion_hook_;
};

// Blocks serving `api` over HTTP until the process is stopped.
void serve(Api& api, const std::string& host, int port);

}  // namespace singtrace::service

#endif  // SINGTRACE_SERVICE_API_H_
