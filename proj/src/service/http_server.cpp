#include "service/http_server.hpp"

#include <httplib.h>

#include <atomic>
#include <cctype>
#include <thread>

#include "common/error.hpp"

namespace modeladapt {

struct HttpServer::Impl {
  Engine& engine;
  httplib::Server server;
  std::atomic<bool> running{false};
  std::atomic<bool> stop_requested{false};
  explicit Impl(Engine& e) : engine(e) {}
};

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

HttpServer::HttpServer(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {
  impl_->server.set_payload_max_length(std::size_t{256} << 20);
  // Routing lives in the engine; httplib only moves bytes. Catch-all method
  // handlers rather than a pre-routing hook so request bodies are read.
  auto forward = [this](const httplib::Request& in, httplib::Response& out) {
    Request req;
    req.method = in.method;
    req.path = in.path;
    for (const auto& [k, v] : in.params) req.query.emplace(k, v);  // first value wins
    for (const auto& [k, v] : in.headers) req.headers.emplace(lower(k), v);
    req.body = in.body;
    Response res = impl_->engine.handle(req);
    out.status = res.status;
    for (const auto& [k, v] : res.headers) out.set_header(k, v);
    if (!res.body.empty()) out.set_content(res.body, res.content_type);
  };
  const std::string any = ".*";
  impl_->server.Get(any, forward);
  impl_->server.Post(any, forward);
  impl_->server.Put(any, forward);
  impl_->server.Delete(any, forward);
  impl_->server.Options(any, forward);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind a port", host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind port " + std::to_string(port), host);
  return port;
}

// httplib ignores stop() until the accept loop is up, so both sides publish
// their intent first and stop() waits for the loop when run() is underway.
void HttpServer::run() {
  impl_->running = true;
  if (!impl_->stop_requested) impl_->server.listen_after_bind();
  impl_->running = false;
}

void HttpServer::stop() {
  impl_->stop_requested = true;
  while (impl_->running && !impl_->server.is_running()) std::this_thread::yield();
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace modeladapt
