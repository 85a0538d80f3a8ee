#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "model/catalog.hpp"

namespace modeladapt {

/// Who is asking. `roles` always contains "*".
struct ClientContext {
  std::string id = "anonymous";
  std::set<std::string> roles{"*"};

  static ClientContext anonymous() { return {}; }
  static ClientContext make(std::string id, const std::vector<std::string>& roles);
  /// Stable key for caches: sorted roles joined with ",".
  std::string role_key() const;
};

struct AccessRights {
  bool visible = false;
  bool select = false;
  bool insert = false;
  bool update = false;
  bool del = false;

  bool operator==(const AccessRights&) const = default;
  json to_json() const;
};

/// Disjunction of (column in values) terms. No terms matches nothing.
struct RowPredicate {
  std::vector<RowFilter> terms;
  bool operator==(const RowPredicate&) const = default;
};

class RoleBasedModel {
 public:
  ClientContext client;
  bool is_owner = false;
  Catalog catalog;  // pruned copy
  std::map<TableRef, AccessRights> table_rights;
  std::map<std::pair<TableRef, std::string>, AccessRights> column_rights;
  // Elements present in the catalog but pruned for this client.
  std::set<TableRef> hidden_tables;
  std::set<std::pair<TableRef, std::string>> hidden_columns;
  std::set<FkeyName> hidden_fkeys;

  const Table* find_table(const TableRef& ref) const { return catalog.find_table(ref); }
  const AccessRights& rights(const TableRef& table) const;
  const AccessRights& rights(const TableRef& table, const std::string& column) const;
  /// Row predicate for a table of this model; nullopt means all rows.
  std::optional<RowPredicate> row_predicate(const TableRef& table) const;
  bool is_hidden_table(const TableRef& t) const { return hidden_tables.count(t) > 0; }
  bool is_hidden_column(const TableRef& t, const std::string& c) const {
    return hidden_tables.count(t) > 0 || hidden_columns.count({t, c}) > 0;
  }
  bool is_hidden_fkey(const FkeyName& f) const { return hidden_fkeys.count(f) > 0; }
};

bool is_owner(const Catalog& catalog, const ClientContext& client);

/// Table and column rights before visibility pruning.
AccessRights table_rights(const Catalog& catalog, const Table& table, const ClientContext& client);
AccessRights column_rights(const Catalog& catalog, const Table& table, const Column& column,
                           const ClientContext& client);

RoleBasedModel prune_model(const Catalog& catalog, const ClientContext& client);

/// Owners see every row. A policy with no applicable rule yields an empty
/// disjunction.
std::optional<RowPredicate> row_predicate(const Table& table, const ClientContext& client,
                                          const std::vector<std::string>& owners = {});

}  // namespace modeladapt
