#include "singtrace/service/api.h"

#include <iostream>

// After the Eigen headers: resolv.h (pulled in here) defines a _res macro.
#include "httplib.h"

namespace singtrace::service {

namespace {

ApiRequest to_request(const httplib::Request& req) {
  ApiRequest r;
  r.method = req.method;
  r.path = req.path;
  for (const auto& [key, value] : req.params) r.query[key] = value;
  r.body = req.body;
  return r;
}

}  // namespace

void serve(Api& api, const std::string& host, int port) {
  httplib::Server server;
  const auto handler = [&api](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse out = api.handle(to_request(req));
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  std::cerr << "serving on http://" << host << ":" << port << "\n";
  if (!server.listen(host, port)) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace singtrace::service
