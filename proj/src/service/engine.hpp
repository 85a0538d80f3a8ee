#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "annotation/annotation.hpp"
#include "common/error.hpp"
#include "policy/policy.hpp"
#include "query/compile.hpp"
#include "storage/store.hpp"

namespace modeladapt {

/// A client's view of one catalog version: pruned model and validated
/// annotations. Immutable once built and shared between requests.
struct Session {
  std::shared_ptr<const Catalog> catalog;
  RoleBasedModel model;
  ValidatedAnnotations annotations;

  Session(std::shared_ptr<const Catalog> c, const ClientContext& client);
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  ModelView view() const { return ModelView{model, annotations}; }
};

/// Role-based model document: visible elements with per-element rights and
/// validated annotations. Acls, row policies and owners are never exposed.
json model_document(const Session& session, const ClientContext& client);

struct Request {
  std::string method;  // GET, POST, PUT, DELETE, OPTIONS
  std::string path;    // without query string
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;

  json json_body() const { return json::parse(body); }
};

struct EngineOptions {
  /// Authoritative catalog file. When set it is re-read whenever it changes
  /// on disk, and annotation writes are saved back to it.
  std::filesystem::path catalog_path;
  /// Content-addressed asset storage; empty disables the asset endpoints.
  std::filesystem::path asset_dir;
  /// JSON object mapping bearer tokens to {"id": ..., "roles": [...]}.
  std::filesystem::path token_file;
  std::string cors_origin = "*";
};

/// Transport-independent request handling. Thread-safe.
class Engine {
 public:
  explicit Engine(Store& store, EngineOptions options = {});

  Response handle(const Request& request);

  /// Reloads the catalog file if it changed. Returns true if the catalog was
  /// replaced. A file that fails to parse or validate leaves the store alone.
  bool refresh();

  /// Identity from X-Client-Id / X-Client-Roles or a bearer token.
  /// No credentials means anonymous. Throws Unauthorized.
  ClientContext identify(const Request& request) const;

  std::shared_ptr<const Session> session(const std::shared_ptr<const Catalog>& catalog, const ClientContext& client);

  /// Applies a model change to the store and, when file-backed, the catalog file.
  Catalog apply_change(const ModelChange& change);

  const EngineOptions& options() const { return options_; }

 private:
  struct FileStamp {
    std::filesystem::file_time_type mtime{};
    std::uintmax_t size = 0;
    std::uint64_t inode = 0;
    bool operator==(const FileStamp&) const = default;
  };
  std::optional<FileStamp> stamp() const;
  void write_catalog_file(const Catalog& catalog);

  Store& store_;
  EngineOptions options_;
  std::map<std::string, ClientContext> tokens_;

  std::mutex catalog_mu_;  // serializes refresh and model changes
  std::optional<FileStamp> seen_;

  std::mutex cache_mu_;
  std::int64_t cache_version_ = -1;
  const Catalog* cache_catalog_ = nullptr;
  std::map<std::string, std::shared_ptr<const Session>> cache_;
};

/// HTTP status for an engine error.
int http_status(const Error& error) noexcept;
json error_body(const Error& error);

}  // namespace modeladapt
