// modeladapt command line: validate, serve, load, demo, set-annotation.
// Talks to the core only through the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include "modeladapt/modeladapt.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Exit codes of `validate`; other commands use 0 and 1 only.
constexpr int kOk = 0;
constexpr int kModelError = 1;
constexpr int kAnnotationError = 2;

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (p) Free(p);
  }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Catalog = Handle<ma_catalog, ma_catalog_free>;
using Store = Handle<ma_store, ma_store_free>;
using Engine = Handle<ma_engine, ma_engine_free>;
using Server = Handle<ma_server, ma_server_free>;

struct CString {
  char* p = nullptr;
  ~CString() { ma_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Failure {
  ma_status status;
};

int report(ma_status s) {
  std::cerr << "modeladapt: " << ma_status_name(s) << ": " << ma_last_error();
  if (*ma_last_error_location()) std::cerr << " (at " << ma_last_error_location() << ")";
  std::cerr << '\n';
  return kModelError;
}

void check(ma_status s) {
  if (s != MA_OK) throw Failure{s};
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

std::string diagnostic_line(const json& d) {
  auto field = [&](const char* k) -> std::string {
    const json& v = d[k];
    if (v.is_null() || (v.is_string() && v.get<std::string>().empty())) return "-";
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  return std::string(d["severity"] == "error" ? "ERROR" : "WARNING") + " table=" + field("table") +
         " tag=" + field("tag") + " context=" + field("context") + " idx=" + field("index") +
         " msg=" + d["message"].get<std::string>();
}

// "*" alone means anonymous.
std::string roles_csv(const std::string& roles) { return roles == "*" ? "" : roles; }

int cmd_validate(const std::string& path, const std::string& roles, const std::string& id) {
  Catalog catalog;
  if (ma_status s = ma_catalog_load(path.c_str(), catalog.out()); s != MA_OK) return report(s);
  CString diags;
  std::size_t errors = 0;
  if (ma_status s = ma_catalog_validate(catalog.get(), opt(id), roles_csv(roles).c_str(), &diags.p, &errors);
      s != MA_OK)
    return report(s);
  for (const auto& d : json::parse(diags.str())) std::cout << diagnostic_line(d) << '\n';
  return errors ? kAnnotationError : kOk;
}

// Blocks SIGINT/SIGTERM in every thread and stops the server from a waiter thread.
std::thread stop_on_signal(ma_server* server) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return std::thread([server, set] {
    int sig = 0;
    sigwait(&set, &sig);
    ma_server_stop(server);
  });
}

int cmd_serve(const std::string& path, const std::string& data, const std::string& host, int port,
              const std::string& assets, const std::string& tokens) {
  Catalog catalog;
  if (ma_status s = ma_catalog_load(path.c_str(), catalog.out()); s != MA_OK) return report(s);
  Store store;
  check(ma_store_open(catalog.get(), data.c_str(), store.out()));
  Engine engine;
  check(ma_engine_new(store.get(), path.c_str(), opt(assets), opt(tokens), engine.out()));
  Server server;
  check(ma_server_new(engine.get(), server.out()));
  int bound = 0;
  check(ma_server_bind(server.get(), host.c_str(), port, &bound));
  std::thread waiter = stop_on_signal(server.get());
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  ma_status s = ma_server_run(server.get());
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  if (s != MA_OK) return report(s);
  check(ma_store_checkpoint(store.get()));
  return kOk;
}

int cmd_load(const std::string& path, const std::string& data, const std::string& table,
             const std::vector<std::string>& files, const std::string& identity) {
  auto colon = table.find(':');
  if (colon == std::string::npos) {
    std::cerr << "modeladapt: --table must be schema:table\n";
    return kModelError;
  }
  const std::string schema = table.substr(0, colon), name = table.substr(colon + 1);
  Catalog catalog;
  check(ma_catalog_load(path.c_str(), catalog.out()));
  Store store;
  check(ma_store_open(catalog.get(), data.c_str(), store.out()));
  std::size_t total = 0;
  for (const auto& f : files) {
    std::size_t n = 0;
    check(ma_store_load_file(store.get(), schema.c_str(), name.c_str(), f.c_str(), identity.c_str(), &n));
    total += n;
  }
  check(ma_store_checkpoint(store.get()));
  std::cout << total << '\n';
  return kOk;
}

int cmd_demo(const std::string& dir, std::uint32_t seed) {
  fs::create_directories(dir);
  const fs::path catalog_path = fs::path(dir) / "catalog.json";
  const fs::path data_dir = fs::path(dir) / "data";
  if (fs::exists(data_dir) && !fs::is_empty(data_dir)) {
    std::cerr << "modeladapt: " << data_dir.string() << " already holds data\n";
    return kModelError;
  }
  Catalog catalog;
  check(ma_catalog_parse(ma_demo_catalog(), catalog.out()));
  check(ma_catalog_save(catalog.get(), catalog_path.c_str()));
  Store store;
  check(ma_store_open(catalog.get(), data_dir.c_str(), store.out()));
  check(ma_store_populate_demo(store.get(), seed));
  check(ma_store_checkpoint(store.get()));
  std::size_t studies = 0;
  check(ma_store_row_count(store.get(), "RNASeq", "Study", &studies));
  std::cout << "catalog: " << catalog_path.string() << "\ndata: " << data_dir.string() << "\nstudies: " << studies
            << '\n';
  return kOk;
}

struct TargetArgs {
  std::string schema, table, column, fkey;
};

int cmd_set_annotation(const std::string& path, const TargetArgs& t, const std::string& tag,
                       const std::string& value, bool remove) {
  json target = nullptr;
  if (!t.fkey.empty()) {
    auto colon = t.fkey.find(':');
    if (colon == std::string::npos) {
      std::cerr << "modeladapt: --fkey must be schema:constraint\n";
      return kModelError;
    }
    target = {{"fkey", {t.fkey.substr(0, colon), t.fkey.substr(colon + 1)}}};
  } else if (!t.schema.empty()) {
    target = {{"schema", t.schema}};
    if (!t.table.empty()) target["table"] = t.table;
    if (!t.column.empty()) target["column"] = t.column;
  }
  if (remove == !value.empty()) {
    std::cerr << "modeladapt: give exactly one of --value and --delete\n";
    return kModelError;
  }
  Catalog catalog;
  check(ma_catalog_load(path.c_str(), catalog.out()));
  const std::string target_text = target.dump();
  check(ma_catalog_set_annotation(catalog.get(), target_text.c_str(), tag.c_str(), remove ? nullptr : value.c_str()));
  check(ma_catalog_save(catalog.get(), path.c_str()));
  std::cout << "version " << ma_catalog_version(catalog.get()) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-driven data service for relational catalogs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ma_version()));

  std::string catalog, data, roles = "*", id, host = "127.0.0.1", assets, tokens, table, identity = "loader", dir,
                        tag, value;
  int port = 8111;
  std::uint32_t seed = 1;
  bool remove = false;
  std::vector<std::string> files;
  TargetArgs target;

  auto* validate = app.add_subcommand("validate", "Check a catalog and its annotations for one client");
  validate->add_option("catalog", catalog, "Catalog JSON file")->required();
  validate->add_option("--roles", roles, "Comma-separated client roles; * is anonymous")->capture_default_str();
  validate->add_option("--id", id, "Client identity");

  auto* serve = app.add_subcommand("serve", "Serve a catalog over HTTP");
  serve->add_option("catalog", catalog, "Catalog JSON file, re-read when it changes")->required();
  serve->add_option("--data", data, "Data directory; omit for an in-memory store");
  serve->add_option("--host", host, "Listen address")->capture_default_str();
  serve->add_option("--port", port, "Listen port")->capture_default_str()->check(CLI::Range(0, 65535));
  serve->add_option("--assets", assets, "Asset storage directory");
  serve->add_option("--tokens", tokens, "Bearer token to identity map (JSON)");

  auto* load = app.add_subcommand("load", "Bulk load CSV or JSONL rows into a table");
  load->add_option("catalog", catalog, "Catalog JSON file")->required();
  load->add_option("--data", data, "Data directory")->required();
  load->add_option("--table", table, "Target table as schema:table")->required();
  load->add_option("--identity", identity, "Identity recorded in RCB/RMB")->capture_default_str();
  load->add_option("files", files, ".csv or .jsonl files")->required()->check(CLI::ExistingFile);

  auto* demo = app.add_subcommand("demo", "Write the demo catalog and a generated data set");
  demo->add_option("dir", dir, "Output directory")->required();
  demo->add_option("--seed", seed, "Data generator seed")->capture_default_str();

  auto* set_ann = app.add_subcommand("set-annotation", "Set or remove an annotation in a catalog file");
  set_ann->add_option("catalog", catalog, "Catalog JSON file")->required()->check(CLI::ExistingFile);
  set_ann->add_option("--schema", target.schema, "Target schema");
  set_ann->add_option("--table", target.table, "Target table (needs --schema)");
  set_ann->add_option("--column", target.column, "Target column (needs --table)");
  set_ann->add_option("--fkey", target.fkey, "Target foreign key as schema:constraint");
  set_ann->add_option("--tag", tag, "Annotation tag")->required();
  set_ann->add_option("--value", value, "Annotation value (JSON)");
  set_ann->add_flag("--delete", remove, "Remove the annotation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(catalog, roles, id);
    if (*serve) return cmd_serve(catalog, data, host, port, assets, tokens);
    if (*load) return cmd_load(catalog, data, table, files, identity);
    if (*demo) return cmd_demo(dir, seed);
    if (*set_ann) return cmd_set_annotation(catalog, target, tag, value, remove);
  } catch (const Failure& f) {
    return report(f.status);
  } catch (const std::exception& e) {
    std::cerr << "modeladapt: " << e.what() << '\n';
    return kModelError;
  }
  return kModelError;
}
