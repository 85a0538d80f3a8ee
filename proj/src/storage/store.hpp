#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "model/catalog.hpp"
#include "model/value.hpp"
#include "policy/policy.hpp"

namespace modeladapt {

/// Column name to value. Always carries the five system columns.
using Row = std::map<std::string, Value>;

/// Row as a JSON object in the table's column order.
json row_to_json(const Row& row, const Table& table);

/// Crockford base32 of n. From 1024 on, left-padded to at least five digits
/// and grouped in fours from the right with '-'.
std::string encode_rid(std::uint64_t n);
std::optional<std::uint64_t> decode_rid(std::string_view rid);

struct TableData {
  std::vector<Row> rows;  // insertion order
  std::unordered_map<std::string, std::size_t> by_rid;

  const Row* find(const std::string& rid) const;
  void reindex();
};

/// Immutable view of the whole store. Readers hold a shared_ptr for the
/// duration of a request.
struct Snapshot {
  std::shared_ptr<const Catalog> catalog;
  std::map<TableRef, std::shared_ptr<const TableData>> tables;
  std::uint64_t next_rid = 1;
  Timestamp clock{};

  const TableData& data(const TableRef& table) const;
};

struct StoreOptions {
  /// Wall clock source; the store makes it strictly monotone.
  std::function<Timestamp()> now;
  /// Empty for a purely in-memory store.
  std::filesystem::path data_dir;
};

/// Embedded single-writer store. Every successful write publishes a new
/// snapshot; failed writes leave the current snapshot untouched.
class Store {
 public:
  explicit Store(Catalog catalog, StoreOptions options = {});
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  std::shared_ptr<const Snapshot> snapshot() const;
  std::shared_ptr<const Catalog> catalog() const { return snapshot()->catalog; }

  /// Atomic multi-row insert. Values for system columns are rejected.
  std::vector<Row> insert(const TableRef& table, const std::vector<json>& rows, const ClientContext& client);
  /// Applies one patch to every listed row.
  std::vector<Row> update(const TableRef& table, const std::vector<std::string>& rids, const json& patch,
                          const ClientContext& client);
  /// Restrict semantics: fails if any row is still referenced.
  std::size_t remove(const TableRef& table, const std::vector<std::string>& rids, const ClientContext& client);

  /// Bulk load with loader privileges: no rights checks, generated columns
  /// allowed, and supplied RID/RCT/RMT/RCB/RMB values are kept.
  std::vector<Row> load(const TableRef& table, const std::vector<json>& rows, const std::string& identity);

  /// Replaces the catalog, reconciling stored rows: values of dropped
  /// columns and tables are discarded, new columns start null. Throws
  /// ConstraintError if existing rows violate the new constraints.
  void set_catalog(Catalog catalog);
  Catalog apply_model_change(const ModelChange& change);

  /// Writes snapshot.json and truncates the change log.
  void checkpoint();

 private:
  void commit(std::shared_ptr<const Snapshot> next, const json& log_record);
  void open_data_dir();
  Timestamp tick(Timestamp& clock) const;

  StoreOptions options_;
  mutable std::mutex read_mu_;
  std::mutex write_mu_;
  std::shared_ptr<const Snapshot> current_;
  std::unique_ptr<std::ofstream> log_;
};

/// Reads a CSV document whose header row names the columns. Cells are parsed
/// with the column types; empty cells are null.
std::vector<json> read_csv(std::istream& in, const Table& table);
/// One JSON object per line; blank lines are skipped.
std::vector<json> read_jsonl(std::istream& in);

}  // namespace modeladapt
