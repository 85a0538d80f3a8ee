#pragma once

#include <memory>
#include <string>

#include "service/engine.hpp"

namespace modeladapt {

/// HTTP/1.1 transport for an Engine. Every request goes to Engine::handle.
class HttpServer {
 public:
  explicit HttpServer(Engine& engine);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the port (0 picks a free one) and returns the bound port.
  /// Throws IoError when the port cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Requires a prior bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace modeladapt
