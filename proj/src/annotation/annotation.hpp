#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "model/catalog.hpp"
#include "policy/policy.hpp"

namespace modeladapt {

namespace tags {
inline constexpr const char* kSourceDefinitions = "tag:isrd.isi.edu,2019:source-definitions";
inline constexpr const char* kVisibleColumns = "tag:isrd.isi.edu,2016:visible-columns";
inline constexpr const char* kVisibleForeignKeys = "tag:isrd.isi.edu,2016:visible-foreign-keys";
inline constexpr const char* kTableDisplay = "tag:isrd.isi.edu,2016:table-display";
inline constexpr const char* kColumnDisplay = "tag:isrd.isi.edu,2016:column-display";
inline constexpr const char* kAsset = "tag:isrd.isi.edu,2017:asset";
inline constexpr const char* kRequired = "tag:isrd.isi.edu,2018:required";
inline constexpr const char* kForeignKey = "tag:isrd.isi.edu,2016:foreign-key";
inline constexpr const char* kDisplay = "tag:misd.isi.edu,2015:display";
inline constexpr const char* kGenerated = "tag:isrd.isi.edu,2016:generated";
inline constexpr const char* kImmutable = "tag:isrd.isi.edu,2016:immutable";
}  // namespace tags

bool is_known_tag(std::string_view tag);

// ---------------------------------------------------------------------------
// Contexts

/// `name(/subname)?` over [A-Za-z_], or "*".
bool is_valid_context(std::string_view context);
bool is_entry_context(std::string_view context);

/// exact key, then parent ("entry/create" -> "entry"), then "*".
std::optional<std::string> resolve_context_key(const std::vector<std::string>& keys, std::string_view requested);
const json* resolve_context(const json& map, std::string_view requested);

template <class T>
const T* resolve_context(const std::map<std::string, T>& map, std::string_view requested) {
  std::vector<std::string> keys;
  for (const auto& [k, v] : map) keys.push_back(k);
  auto key = resolve_context_key(keys, requested);
  return key ? &map.at(*key) : nullptr;
}

// ---------------------------------------------------------------------------
// Sources

enum class Direction { Inbound, Outbound };
enum class Aggregate { ArrayD, CntD, Cnt, Min, Max, Sum };

const char* aggregate_name(Aggregate a) noexcept;
std::optional<Aggregate> parse_aggregate(std::string_view name) noexcept;

struct FkHop {
  Direction direction = Direction::Outbound;
  FkeyName fkey;
  bool operator==(const FkHop&) const = default;
};

/// Unresolved source: a bare column, a path of hops ending in a column, or a
/// reference to a named source.
struct SourceSpec {
  std::vector<FkHop> path;
  std::string column;
  std::optional<std::string> sourcekey;
  std::optional<Aggregate> aggregate;
  std::optional<bool> entity;  // explicit override of entity mode
};

/// Parses the "source" value: "col" or [{"inbound"|"outbound": [s, c]}, ..., "col"].
SourceSpec parse_source_path(const json& source, const std::string& location);
/// Parses an entry object: {"source": ..., "aggregate": ..., "entity": ...} or {"sourcekey": ...}.
SourceSpec parse_source_entry(const json& entry, const std::string& location);
json source_path_to_json(const std::vector<FkHop>& path, const std::string& column);

struct ResolvedHop {
  Direction direction = Direction::Outbound;
  FkeyName fkey;
  TableRef from_table;
  TableRef to_table;
  /// (column of from_table, column of to_table) equality pairs.
  std::vector<std::pair<std::string, std::string>> join_columns;
  bool operator==(const ResolvedHop&) const = default;
};

struct ResolvedSource {
  TableRef base;
  std::vector<ResolvedHop> hops;
  std::string end_column;
  ScalarType end_type = ScalarType::Text;
  bool entity_mode = false;
  std::optional<Aggregate> aggregate;
  bool multivalued = false;
  std::optional<std::string> sourcekey;

  TableRef end_table() const { return hops.empty() ? base : hops.back().to_table; }
  /// Same join chain and end column.
  bool same_path(const ResolvedSource& other) const;
  json to_json() const;
  json source_json() const { return source_path_to_json(path(), end_column); }
  std::vector<FkHop> path() const;
};

/// Named sources of a table, keyed by sourcekey (raw entry objects).
using SourceDefinitions = std::map<std::string, json>;

/// Throws ResolutionError; policy_hidden() is set when the failing element
/// exists but is hidden from the client.
ResolvedSource resolve_source(const RoleBasedModel& model, const Table& base, const SourceSpec& spec,
                              const SourceDefinitions* defs = nullptr);

// ---------------------------------------------------------------------------
// Facet filters (wire format and selection_filter)

struct FacetFilter {
  json source;  // raw SourceSpec form: entry object with "source" or "sourcekey"
  std::optional<std::vector<json>> choices;
  std::optional<std::pair<json, json>> range;  // min, max; null = open
  std::optional<std::vector<std::string>> search;

  json to_json() const;
};

FacetFilter facet_filter_from_json(const json& j, const std::string& location);
std::vector<FacetFilter> facet_filters_from_json(const json& j);

// ---------------------------------------------------------------------------
// Validated annotations

struct Diagnostic {
  enum class Severity { Warning, Error };
  Severity severity = Severity::Error;
  std::string table;  // "schema:table", or "" for catalog level
  std::string tag;
  std::string context;
  int index = -1;
  std::string message;

  std::string line() const;
  json to_json() const;
};

struct ColumnEntry {
  enum class Kind { Column, Fkey, Source };
  Kind kind = Kind::Column;
  ResolvedSource source;
  std::optional<FkeyName> fkey;  // set for Fkey kind
  std::optional<std::string> markdown_name;
  std::optional<std::string> comment;
  std::optional<std::string> markdown_pattern;
  std::vector<std::string> wait_for;  // sourcekeys
  json raw;
};

struct FacetEntry {
  ResolvedSource source;
  std::optional<std::string> markdown_name;
  std::optional<std::string> ux_mode;  // choices | ranges | search
  std::vector<json> choices;           // preselected
  json raw;
};

struct SortKey {
  std::string column;
  bool descending = false;
  bool operator==(const SortKey&) const = default;
};

struct TableDisplay {
  std::optional<std::string> row_markdown_pattern;
  std::vector<SortKey> row_order;
  std::optional<int> page_size;
};

struct AssetSpec {
  std::string url_column;
  std::optional<std::string> filename_column;
  std::optional<std::string> byte_count_column;
  std::optional<std::string> md5_column;
  std::optional<std::string> sha256_column;
};

struct DisplaySpec {
  std::optional<std::string> name;
  std::optional<std::string> markdown_name;
  std::optional<bool> underline_space;
  std::optional<bool> title_case;
};

struct ColumnAnnotations {
  std::optional<DisplaySpec> display;
  std::map<std::string, std::string> column_display;  // context -> markdown_pattern
  std::optional<AssetSpec> asset;
  bool required = false;
  bool generated = false;
  bool immutable = false;
};

struct FkeyAnnotations {
  std::optional<std::string> to_name;
  std::optional<std::string> from_name;
  std::vector<FacetFilter> selection_filter;
};

struct TableAnnotations {
  SourceDefinitions sources;                       // valid named sources only
  std::map<std::string, ResolvedSource> resolved;  // sourcekey -> resolved
  std::map<std::string, std::vector<ColumnEntry>> visible_columns;  // excluding "filter"
  std::map<std::string, std::vector<FacetEntry>> facets;            // the "filter" context
  std::map<std::string, std::vector<ColumnEntry>> visible_fkeys;
  std::map<std::string, TableDisplay> table_display;
  std::optional<DisplaySpec> display;
  bool generated = false;
  bool immutable = false;
  std::map<std::string, ColumnAnnotations> columns;
  std::map<FkeyName, FkeyAnnotations> fkeys;  // outbound fkeys of this table
};

struct ValidatedAnnotations {
  std::int64_t version = 0;
  std::map<TableRef, TableAnnotations> tables;
  std::vector<Diagnostic> diagnostics;
  /// The role-based catalog with annotation maps reduced to their valid parts.
  Catalog pruned;

  const TableAnnotations* table(const TableRef& ref) const {
    auto it = tables.find(ref);
    return it == tables.end() ? nullptr : &it->second;
  }
  std::size_t error_count() const;
  std::size_t warning_count() const;
};

ValidatedAnnotations validate_annotations(const RoleBasedModel& model);

/// Resolves one visible-columns style entry (string, [s, c] fkey pair, or object).
ColumnEntry resolve_column_entry(const RoleBasedModel& model, const Table& table, const json& entry,
                                 const SourceDefinitions& defs, bool inbound_fkeys, const std::string& location);

}  // namespace modeladapt
