#include "policy/policy.hpp"

#include <algorithm>

namespace modeladapt {

namespace {

const AccessRights kNoRights{};

bool intersects(const std::vector<std::string>& granted, const std::set<std::string>& roles) {
  return std::any_of(granted.begin(), granted.end(), [&](const std::string& r) { return roles.count(r) > 0; });
}

// Role list for `right` at one acl level; enumerate falls back to the
// level's select list.
const std::vector<std::string>* level_grant(const Acl& acl, Right right) {
  if (const auto* list = acl.find(right)) return list;
  if (right == Right::Enumerate) return acl.find(Right::Select);
  return nullptr;
}

bool granted(Right right, const std::vector<const Acl*>& chain, const Catalog& catalog, const ClientContext& client) {
  for (const Acl* acl : chain)
    if (const auto* list = level_grant(*acl, right)) return intersects(*list, client.roles);
  return intersects(catalog.owners, client.roles);
}

AccessRights rights_from_chain(const std::vector<const Acl*>& chain, const Catalog& catalog,
                               const ClientContext& client, bool owner) {
  AccessRights r;
  if (owner) return {true, true, true, true, true};
  r.select = granted(Right::Select, chain, catalog, client);
  r.visible = r.select || granted(Right::Enumerate, chain, catalog, client);
  r.insert = r.select && granted(Right::Insert, chain, catalog, client);
  r.update = r.select && granted(Right::Update, chain, catalog, client);
  r.del = r.select && granted(Right::Delete, chain, catalog, client);
  return r;
}

}  // namespace

ClientContext ClientContext::make(std::string id, const std::vector<std::string>& roles) {
  ClientContext c;
  c.id = std::move(id);
  for (const auto& r : roles)
    if (!r.empty()) c.roles.insert(r);
  return c;
}

std::string ClientContext::role_key() const {
  std::string out;
  for (const auto& r : roles) {
    if (!out.empty()) out += ",";
    out += r;
  }
  return out;
}

json AccessRights::to_json() const {
  return {{"visible", visible}, {"select", select}, {"insert", insert}, {"update", update}, {"delete", del}};
}

bool is_owner(const Catalog& catalog, const ClientContext& client) { return intersects(catalog.owners, client.roles); }

AccessRights table_rights(const Catalog& catalog, const Table& table, const ClientContext& client) {
  return rights_from_chain({&table.acls, &catalog.default_acl}, catalog, client, is_owner(catalog, client));
}

AccessRights column_rights(const Catalog& catalog, const Table& table, const Column& column,
                           const ClientContext& client) {
  const bool owner = is_owner(catalog, client);
  AccessRights t = rights_from_chain({&table.acls, &catalog.default_acl}, catalog, client, owner);
  // RID stays readable wherever the table is; downstream entity references depend on it.
  if (column.name == "RID") return {t.visible, t.select, t.insert, false, false};
  AccessRights c = rights_from_chain({&column.acls, &table.acls, &catalog.default_acl}, catalog, client, owner);
  AccessRights r;
  r.select = c.select && t.select;
  r.visible = c.visible && t.visible;
  r.insert = c.insert && t.insert;
  r.update = c.update && t.update && !column.is_system;
  r.del = false;
  if (column.is_system) r.insert = false;
  return r;
}

const AccessRights& RoleBasedModel::rights(const TableRef& table) const {
  auto it = table_rights.find(table);
  return it == table_rights.end() ? kNoRights : it->second;
}

const AccessRights& RoleBasedModel::rights(const TableRef& table, const std::string& column) const {
  auto it = column_rights.find({table, column});
  return it == column_rights.end() ? kNoRights : it->second;
}

std::optional<RowPredicate> RoleBasedModel::row_predicate(const TableRef& table) const {
  const Table* t = catalog.find_table(table);
  if (!t) return RowPredicate{};
  return modeladapt::row_predicate(*t, client, catalog.owners);
}

RoleBasedModel prune_model(const Catalog& catalog, const ClientContext& client) {
  RoleBasedModel m;
  m.client = client;
  m.is_owner = is_owner(catalog, client);
  m.catalog.version = catalog.version;
  m.catalog.owners = catalog.owners;
  m.catalog.default_acl = catalog.default_acl;
  m.catalog.annotations = catalog.annotations;

  for (const auto& [sname, schema] : catalog.schemas) {
    Schema s;
    s.name = schema.name;
    s.comment = schema.comment;
    s.annotations = schema.annotations;
    for (const auto& [tname, table] : schema.tables) {
      AccessRights tr = table_rights(catalog, table, client);
      if (!tr.visible) {
        m.hidden_tables.insert(table.ref());
        continue;
      }
      Table t = table;
      t.columns.clear();
      t.keys.clear();
      t.foreign_keys.clear();
      for (const auto& col : table.columns) {
        AccessRights cr = column_rights(catalog, table, col, client);
        if (!cr.visible) {
          m.hidden_columns.insert({table.ref(), col.name});
          continue;
        }
        m.column_rights[{table.ref(), col.name}] = cr;
        t.columns.push_back(col);
      }
      for (const auto& key : table.keys)
        if (std::all_of(key.columns.begin(), key.columns.end(), [&](const std::string& c) { return t.find_column(c); }))
          t.keys.push_back(key);
      m.table_rights[table.ref()] = tr;
      s.tables.emplace(tname, std::move(t));
    }
    m.catalog.schemas.emplace(sname, std::move(s));
  }
  // Fkeys survive only when both endpoint tables and every participating column survive.
  for (const auto& [sname, schema] : catalog.schemas)
    for (const auto& [tname, table] : schema.tables) {
      Table* owner = m.catalog.find_table(table.ref());
      for (const auto& fk : table.foreign_keys) {
        const Table* target = m.catalog.find_table(fk.to_table);
        if (!owner || !target) {
          m.hidden_fkeys.insert(fk.name);
          continue;
        }
        bool ok = std::all_of(fk.from_columns.begin(), fk.from_columns.end(),
                              [&](const std::string& c) { return owner->find_column(c); }) &&
                  std::all_of(fk.to_columns.begin(), fk.to_columns.end(),
                              [&](const std::string& c) { return target->find_column(c); });
        if (ok) owner->foreign_keys.push_back(fk);
        else m.hidden_fkeys.insert(fk.name);
      }
    }
  return m;
}

std::optional<RowPredicate> row_predicate(const Table& table, const ClientContext& client,
                                          const std::vector<std::string>& owners) {
  if (!table.row_policy) return std::nullopt;
  if (intersects(owners, client.roles)) return std::nullopt;
  RowPredicate pred;
  for (const auto& rule : table.row_policy->rules) {
    bool applies = std::any_of(rule.roles.begin(), rule.roles.end(), [&](const std::string& r) { return client.roles.count(r) > 0; });
    if (!applies) continue;
    if (!rule.predicate) return std::nullopt;
    pred.terms.push_back(*rule.predicate);
  }
  return pred;
}

}  // namespace modeladapt
