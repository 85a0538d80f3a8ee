#include "modeladapt/modeladapt.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "annotation/annotation.hpp"
#include "common/error.hpp"
#include "demo/demo.hpp"
#include "service/engine.hpp"
#include "service/http_server.hpp"
#include "storage/store.hpp"

namespace ma = modeladapt;

struct ma_catalog {
  ma::Catalog catalog;
};

struct ma_store {
  std::unique_ptr<ma::Store> store;
};

struct ma_engine {
  std::unique_ptr<ma::Engine> engine;
};

struct ma_server {
  std::unique_ptr<ma::HttpServer> server;
};

namespace {

thread_local std::string t_message;
thread_local std::string t_location;

ma_status status_of(ma::ErrorCode code) {
  switch (code) {
    case ma::ErrorCode::parse: return MA_ERR_PARSE;
    case ma::ErrorCode::model: return MA_ERR_MODEL;
    case ma::ErrorCode::resolution: return MA_ERR_RESOLUTION;
    case ma::ErrorCode::plan: return MA_ERR_PLAN;
    case ma::ErrorCode::constraint: return MA_ERR_CONSTRAINT;
    case ma::ErrorCode::rights: return MA_ERR_RIGHTS;
    case ma::ErrorCode::not_found: return MA_ERR_NOT_FOUND;
    case ma::ErrorCode::io: return MA_ERR_IO;
    case ma::ErrorCode::invalid_argument: return MA_ERR_INVALID_ARGUMENT;
    case ma::ErrorCode::unauthorized: return MA_ERR_UNAUTHORIZED;
  }
  return MA_ERR_INTERNAL;
}

ma_status fail(ma_status s, std::string message, std::string location = {}) {
  t_message = std::move(message);
  t_location = std::move(location);
  return s;
}

// Runs f, translating exceptions into status codes. Nothing escapes the C boundary.
template <class F>
ma_status guarded(F&& f) noexcept {
  try {
    t_message.clear();
    t_location.clear();
    f();
    return MA_OK;
  } catch (const ma::Error& e) {
    return fail(status_of(e.code()), e.what(), e.location());
  } catch (const ma::json::exception& e) {
    return fail(MA_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MA_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MA_ERR_INTERNAL, "unknown failure");
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* name) {
  if (!p) throw ma::InvalidArgument(std::string(name) + " must not be null", name);
}

std::string opt(const char* s) { return s ? s : ""; }

ma::json parse_json(const char* text, const char* what) {
  ma::json j = ma::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ma::ParseError(std::string(what) + " is not valid JSON", what);
  return j;
}

std::map<std::string, std::string> string_map(const char* text, const char* what, bool lower_keys) {
  std::map<std::string, std::string> out;
  if (!text || !*text) return out;
  ma::json j = parse_json(text, what);
  if (!j.is_object()) throw ma::InvalidArgument(std::string(what) + " must be a JSON object", what);
  for (auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ma::InvalidArgument(std::string(what) + " values must be strings", k);
    std::string key = k;
    if (lower_keys)
      for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out[key] = v.get<std::string>();
  }
  return out;
}

ma::ClientContext client_of(const char* id, const char* roles_csv) {
  std::vector<std::string> roles;
  std::stringstream in(opt(roles_csv));
  std::string r;
  while (std::getline(in, r, ',')) {
    r.erase(0, r.find_first_not_of(" \t"));
    r.erase(r.find_last_not_of(" \t") + 1);
    if (!r.empty() && r != "*") roles.push_back(r);
  }
  std::string ident = opt(id);
  if (ident.empty()) ident = roles.empty() ? "anonymous" : "cli";
  if (roles.empty() && ident == "anonymous") return ma::ClientContext::anonymous();
  return ma::ClientContext::make(ident, roles);
}

}  // namespace

extern "C" {

const char* ma_version(void) { return "0.1.0"; }

const char* ma_status_name(ma_status status) {
  switch (status) {
    case MA_OK: return "OK";
    case MA_ERR_PARSE: return "ParseError";
    case MA_ERR_MODEL: return "ModelError";
    case MA_ERR_RESOLUTION: return "ResolutionError";
    case MA_ERR_PLAN: return "PlanError";
    case MA_ERR_CONSTRAINT: return "ConstraintError";
    case MA_ERR_RIGHTS: return "RightsError";
    case MA_ERR_NOT_FOUND: return "NotFound";
    case MA_ERR_IO: return "IoError";
    case MA_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case MA_ERR_UNAUTHORIZED: return "Unauthorized";
    case MA_ERR_INTERNAL: return "InternalError";
  }
  return "Unknown";
}

const char* ma_last_error(void) { return t_message.c_str(); }
const char* ma_last_error_location(void) { return t_location.c_str(); }

void ma_string_free(char* s) { std::free(s); }

ma_status ma_catalog_parse(const char* json, ma_catalog** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = new ma_catalog{ma::parse_catalog(json)};
  });
}

ma_status ma_catalog_load(const char* path, ma_catalog** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::ifstream in(path);
    if (!in) throw ma::IoError("cannot read catalog file", path);
    std::stringstream buf;
    buf << in.rdbuf();
    *out = new ma_catalog{ma::parse_catalog(buf.str())};
  });
}

void ma_catalog_free(ma_catalog* catalog) { delete catalog; }

ma_status ma_catalog_to_json(const ma_catalog* catalog, char** out) {
  return guarded([&] {
    require(catalog, "catalog");
    require(out, "out");
    *out = dup(ma::serialize_catalog(catalog->catalog));
  });
}

int64_t ma_catalog_version(const ma_catalog* catalog) { return catalog ? catalog->catalog.version : -1; }

ma_status ma_catalog_save(const ma_catalog* catalog, const char* path) {
  return guarded([&] {
    require(catalog, "catalog");
    require(path, "path");
    std::filesystem::path dest(path), tmp(path);
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << ma::serialize_catalog(catalog->catalog) << '\n';
      if (!out) throw ma::IoError("cannot write catalog", tmp.string());
    }
    std::filesystem::rename(tmp, dest);
  });
}

ma_status ma_catalog_set_annotation(ma_catalog* catalog, const char* target_json, const char* tag,
                                    const char* value_json) {
  return guarded([&] {
    require(catalog, "catalog");
    require(tag, "tag");
    ma::ElementRef target =
        ma::element_ref_from_json(target_json && *target_json ? parse_json(target_json, "target") : ma::json());
    ma::ModelChange change;
    if (value_json)
      change = ma::change::SetAnnotation{target, tag, parse_json(value_json, "value")};
    else
      change = ma::change::DeleteAnnotation{target, tag};
    catalog->catalog = ma::apply_model_change(catalog->catalog, change);
  });
}

ma_status ma_catalog_validate(const ma_catalog* catalog, const char* client_id, const char* roles_csv,
                              char** diagnostics_json, size_t* error_count) {
  return guarded([&] {
    require(catalog, "catalog");
    ma::RoleBasedModel model = ma::prune_model(catalog->catalog, client_of(client_id, roles_csv));
    ma::ValidatedAnnotations v = ma::validate_annotations(model);
    ma::json diags = ma::json::array();
    std::size_t errors = 0;
    for (const auto& d : v.diagnostics) {
      diags.push_back(d.to_json());
      if (d.severity == ma::Diagnostic::Severity::Error) ++errors;
    }
    if (diagnostics_json) *diagnostics_json = dup(diags.dump());
    if (error_count) *error_count = errors;
  });
}

const char* ma_demo_catalog(void) { return ma::demo::catalog_text(); }

ma_status ma_store_open(const ma_catalog* catalog, const char* data_dir, ma_store** out) {
  return guarded([&] {
    require(catalog, "catalog");
    require(out, "out");
    ma::StoreOptions options;
    options.data_dir = opt(data_dir);
    *out = new ma_store{std::make_unique<ma::Store>(catalog->catalog, options)};
  });
}

void ma_store_free(ma_store* store) { delete store; }

ma_status ma_store_load_file(ma_store* store, const char* schema, const char* table, const char* path,
                             const char* identity, size_t* rows_loaded) {
  return guarded([&] {
    require(store, "store");
    require(schema, "schema");
    require(table, "table");
    require(path, "path");
    const ma::TableRef ref{schema, table};
    const ma::Table* t = store->store->catalog()->find_table(ref);
    if (!t) throw ma::NotFound("no such table", ref.str());
    std::ifstream in(path);
    if (!in) throw ma::IoError("cannot read data file", path);
    const std::string ext = std::filesystem::path(path).extension().string();
    std::vector<ma::json> rows;
    if (ext == ".csv")
      rows = ma::read_csv(in, *t);
    else if (ext == ".jsonl" || ext == ".ndjson")
      rows = ma::read_jsonl(in);
    else
      throw ma::InvalidArgument("data files must be .csv or .jsonl", path);
    std::string who = opt(identity);
    auto loaded = store->store->load(ref, rows, who.empty() ? "loader" : who);
    if (rows_loaded) *rows_loaded = loaded.size();
  });
}

ma_status ma_store_populate_demo(ma_store* store, uint32_t seed) {
  return guarded([&] {
    require(store, "store");
    ma::demo::populate(*store->store, seed);
  });
}

ma_status ma_store_row_count(const ma_store* store, const char* schema, const char* table, size_t* count) {
  return guarded([&] {
    require(store, "store");
    require(schema, "schema");
    require(table, "table");
    require(count, "count");
    auto snap = store->store->snapshot();
    const ma::TableRef ref{schema, table};
    if (!snap->catalog->find_table(ref)) throw ma::NotFound("no such table", ref.str());
    *count = snap->data(ref).rows.size();
  });
}

ma_status ma_store_checkpoint(ma_store* store) {
  return guarded([&] {
    require(store, "store");
    store->store->checkpoint();
  });
}

ma_status ma_engine_new(ma_store* store, const char* catalog_path, const char* asset_dir, const char* token_file,
                        ma_engine** out) {
  return guarded([&] {
    require(store, "store");
    require(out, "out");
    ma::EngineOptions options;
    options.catalog_path = opt(catalog_path);
    options.asset_dir = opt(asset_dir);
    options.token_file = opt(token_file);
    *out = new ma_engine{std::make_unique<ma::Engine>(*store->store, options)};
  });
}

void ma_engine_free(ma_engine* engine) { delete engine; }

ma_status ma_engine_handle(ma_engine* engine, const char* method, const char* path, const char* query_json,
                           const char* headers_json, const char* body, size_t body_len, int* http_status,
                           char** response_body) {
  return guarded([&] {
    require(engine, "engine");
    require(method, "method");
    require(path, "path");
    ma::Request req;
    req.method = method;
    req.path = path;
    req.query = string_map(query_json, "query", false);
    req.headers = string_map(headers_json, "headers", true);
    if (body) req.body.assign(body, body_len);
    ma::Response res = engine->engine->handle(req);
    if (http_status) *http_status = res.status;
    if (response_body) *response_body = dup(res.body);
  });
}

ma_status ma_server_new(ma_engine* engine, ma_server** out) {
  return guarded([&] {
    require(engine, "engine");
    require(out, "out");
    *out = new ma_server{std::make_unique<ma::HttpServer>(*engine->engine)};
  });
}

ma_status ma_server_bind(ma_server* server, const char* host, int port, int* bound_port) {
  return guarded([&] {
    require(server, "server");
    if (port < 0 || port > 65535) throw ma::InvalidArgument("port out of range", "port");
    int bound = server->server->bind(host && *host ? host : "127.0.0.1", port);
    if (bound_port) *bound_port = bound;
  });
}

ma_status ma_server_run(ma_server* server) {
  return guarded([&] {
    require(server, "server");
    server->server->run();
  });
}

void ma_server_stop(ma_server* server) {
  if (server) server->server->stop();
}

void ma_server_free(ma_server* server) { delete server; }

}  // extern "C"
