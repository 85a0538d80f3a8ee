#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "model/value.hpp"

namespace modeladapt {

/// Identifies a table by schema and table name.
struct TableRef {
  std::string schema;
  std::string table;

  auto operator<=>(const TableRef&) const = default;
  std::string str() const { return schema + ":" + table; }
};

/// [schema-name, constraint-name] pair naming a foreign key.
struct FkeyName {
  std::string schema;
  std::string name;

  auto operator<=>(const FkeyName&) const = default;
  std::string str() const { return schema + ":" + name; }
  json to_json() const { return json::array({schema, name}); }
};

using AnnotationMap = std::map<std::string, json>;

enum class Right { Enumerate, Select, Insert, Update, Delete };

const char* right_name(Right right) noexcept;
std::optional<Right> parse_right(std::string_view name) noexcept;
inline constexpr Right kAllRights[] = {Right::Enumerate, Right::Select, Right::Insert, Right::Update,
                                       Right::Delete};

/// Role lists per right. An absent right inherits from the enclosing scope.
struct Acl {
  std::map<Right, std::vector<std::string>> grants;

  const std::vector<std::string>* find(Right right) const {
    auto it = grants.find(right);
    return it == grants.end() ? nullptr : &it->second;
  }
  bool empty() const { return grants.empty(); }
  bool operator==(const Acl&) const = default;
};

/// Row visibility term: column value must be one of `values`.
struct RowFilter {
  std::string column;
  std::set<std::string> values;
  bool operator==(const RowFilter&) const = default;
};

struct RowPolicyRule {
  std::set<std::string> roles;
  std::optional<RowFilter> predicate;  // none: grants every row
  bool operator==(const RowPolicyRule&) const = default;
};

struct RowPolicy {
  std::vector<RowPolicyRule> rules;
  bool operator==(const RowPolicy&) const = default;
};

inline constexpr std::string_view kSystemColumns[] = {"RID", "RCT", "RMT", "RCB", "RMB"};
bool is_system_column_name(std::string_view name) noexcept;

struct Column {
  std::string name;
  ScalarType type = ScalarType::Text;
  bool nullable = true;
  bool is_system = false;
  std::optional<std::string> comment;
  AnnotationMap annotations;
  Acl acls;
};

struct Key {
  std::string name;
  std::vector<std::string> columns;
};

struct ForeignKey {
  FkeyName name;
  TableRef table;  // owning (referencing) table
  std::vector<std::string> from_columns;
  TableRef to_table;
  std::vector<std::string> to_columns;
  AnnotationMap annotations;
};

struct Table {
  std::string schema;
  std::string name;
  std::optional<std::string> comment;
  std::vector<Column> columns;  // creation order
  std::vector<Key> keys;
  std::vector<ForeignKey> foreign_keys;
  AnnotationMap annotations;
  Acl acls;
  std::optional<RowPolicy> row_policy;

  TableRef ref() const { return {schema, name}; }
  const Column* find_column(std::string_view column) const;
  Column* find_column(std::string_view column);
  const ForeignKey* find_fkey(const FkeyName& fkey) const;
  /// Whether `cols` equals the column set of some key.
  bool is_key(const std::vector<std::string>& cols) const;
  /// Whether column belongs to any key.
  bool is_key_column(std::string_view column) const;
};

struct Schema {
  std::string name;
  std::optional<std::string> comment;
  AnnotationMap annotations;
  std::map<std::string, Table> tables;
};

/// Immutable snapshot of the enriched model. Mutations go through
/// apply_model_change which returns a new snapshot with version + 1.
class Catalog {
 public:
  std::int64_t version = 1;
  std::vector<std::string> owners;
  Acl default_acl;
  AnnotationMap annotations;
  std::map<std::string, Schema> schemas;

  const Table* find_table(const TableRef& ref) const;
  Table* find_table(const TableRef& ref);
  /// The table owning the foreign key and the key itself, or nulls.
  std::pair<const Table*, const ForeignKey*> find_fkey(const FkeyName& name) const;
  /// Foreign keys referencing `ref`, in model order (schema, table, declaration).
  std::vector<const ForeignKey*> inbound_fkeys(const TableRef& ref) const;
  std::vector<const Table*> tables() const;

  /// Throws ModelError on any structural violation.
  void validate() const;
};

using CatalogPtr = std::shared_ptr<const Catalog>;

bool is_valid_identifier(std::string_view name) noexcept;

/// Parse the catalog document; injects system columns and the RID key.
Catalog parse_catalog(std::string_view document);
Catalog catalog_from_json(const json& doc);
json catalog_to_json(const Catalog& catalog);
std::string serialize_catalog(const Catalog& catalog);

Acl acl_from_json(const json& j, const std::string& location, bool column_level);
json acl_to_json(const Acl& acl);
RowPolicy row_policy_from_json(const json& j, const std::string& location);
json row_policy_to_json(const RowPolicy& policy);
Column column_from_json(const json& j, const std::string& location);
json column_to_json(const Column& column);
ForeignKey fkey_from_json(const json& j, const TableRef& owner, const std::string& location);
json fkey_to_json(const ForeignKey& fkey);

/// Addresses any annotatable / acl-bearing element.
struct ElementRef {
  enum class Kind { Catalog, Schema, Table, Column, ForeignKey };
  Kind kind = Kind::Catalog;
  std::string schema;
  std::string table;
  std::string column;
  FkeyName fkey;

  static ElementRef for_table(TableRef t) { return {Kind::Table, t.schema, t.table, {}, {}}; }
  static ElementRef for_column(TableRef t, std::string c) { return {Kind::Column, t.schema, t.table, std::move(c), {}}; }
  static ElementRef for_fkey(FkeyName f) { return {Kind::ForeignKey, {}, {}, {}, std::move(f)}; }
  std::string str() const;
};

ElementRef element_ref_from_json(const json& j);
json element_ref_to_json(const ElementRef& ref);

namespace change {
struct AddTable { Table table; };
struct AddColumn { TableRef table; Column column; };
struct DropColumn { TableRef table; std::string column; };
struct AddFkey { ForeignKey fkey; };
struct DropFkey { FkeyName fkey; };
struct SetAnnotation { ElementRef target; std::string tag; json value; };
struct DeleteAnnotation { ElementRef target; std::string tag; };
struct SetAcl { ElementRef target; Acl acl; };
struct SetRowPolicy { TableRef table; std::optional<RowPolicy> policy; };
}  // namespace change

using ModelChange = std::variant<change::AddTable, change::AddColumn, change::DropColumn, change::AddFkey,
                                 change::DropFkey, change::SetAnnotation, change::DeleteAnnotation,
                                 change::SetAcl, change::SetRowPolicy>;

/// Returns a new catalog with version + 1; `catalog` is untouched.
Catalog apply_model_change(const Catalog& catalog, const ModelChange& change);

/// JSON form: {"op": "set-annotation", "target": {...}, "tag": ..., "value": ...} etc.
ModelChange model_change_from_json(const json& j);
json model_change_to_json(const ModelChange& change);

}  // namespace modeladapt
