#include "model/catalog.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace modeladapt {

namespace {

const json kEmptyObject = json::object();

const json& member(const json& obj, const char* name) {
  auto it = obj.find(name);
  return it == obj.end() ? kEmptyObject : *it;
}

void expect_object(const json& j, const std::string& location) {
  if (!j.is_object()) throw ParseError("expected a JSON object", location);
}

void expect_array(const json& j, const std::string& location) {
  if (!j.is_array()) throw ParseError("expected a JSON array", location);
}

std::string expect_string(const json& j, const std::string& location) {
  if (!j.is_string()) throw ParseError("expected a string", location);
  return j.get<std::string>();
}

std::vector<std::string> string_list(const json& j, const std::string& location) {
  expect_array(j, location);
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(expect_string(e, location));
  return out;
}

AnnotationMap annotations_from_json(const json& j, const std::string& location) {
  AnnotationMap out;
  if (j.is_null()) return out;
  expect_object(j, location + "/annotations");
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace(it.key(), it.value());
  return out;
}

json annotations_to_json(const AnnotationMap& map) {
  json out = json::object();
  for (const auto& [tag, value] : map) out[tag] = value;
  return out;
}

ScalarType system_column_type(std::string_view name) {
  return (name == "RCT" || name == "RMT") ? ScalarType::Timestamp : ScalarType::Text;
}

std::optional<std::string> optional_string(const json& obj, const char* name, const std::string& location) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return expect_string(*it, location + "/" + name);
}

/// Injects missing system columns (in canonical order, ahead of user columns)
/// and the {RID} key.
void normalize_table(Table& table) {
  std::vector<Column> injected;
  for (auto name : kSystemColumns) {
    if (Column* existing = table.find_column(name)) {
      if (existing->type != system_column_type(name))
        throw ModelError("system column " + std::string(name) + " must have type " +
                             scalar_type_name(system_column_type(name)),
                         table.ref().str() + "/" + std::string(name));
      existing->is_system = true;
      existing->nullable = false;
      continue;
    }
    Column c;
    c.name = std::string(name);
    c.type = system_column_type(name);
    c.nullable = false;
    c.is_system = true;
    injected.push_back(std::move(c));
  }
  table.columns.insert(table.columns.begin(), injected.begin(), injected.end());
  if (!table.is_key({"RID"})) table.keys.push_back(Key{table.name + "_RIDkey1", {"RID"}});
  for (auto& fk : table.foreign_keys) fk.table = table.ref();
}

Table table_from_json(const json& j, const std::string& schema, const std::string& name) {
  const std::string loc = schema + ":" + name;
  expect_object(j, loc);
  Table t;
  t.schema = schema;
  t.name = name;
  t.comment = optional_string(j, "comment", loc);
  const json& cols = member(j, "columns");
  if (!cols.is_object()) {
    expect_array(cols, loc + "/columns");
    for (const auto& c : cols) t.columns.push_back(column_from_json(c, loc));
  }
  if (auto it = j.find("keys"); it != j.end()) {
    expect_array(*it, loc + "/keys");
    for (const auto& k : *it) {
      expect_object(k, loc + "/keys");
      Key key;
      key.columns = string_list(member(k, "columns"), loc + "/keys");
      key.name = k.contains("name") ? expect_string(k["name"], loc + "/keys/name")
                                    : name + "_" + (key.columns.empty() ? std::string("key") : key.columns.front()) + "_key";
      t.keys.push_back(std::move(key));
    }
  }
  if (auto it = j.find("foreign_keys"); it != j.end()) {
    expect_array(*it, loc + "/foreign_keys");
    for (const auto& f : *it) t.foreign_keys.push_back(fkey_from_json(f, t.ref(), loc));
  }
  t.annotations = annotations_from_json(member(j, "annotations"), loc);
  t.acls = acl_from_json(member(j, "acls"), loc + "/acls", false);
  if (auto it = j.find("row_policy"); it != j.end() && !it->is_null()) {
    expect_object(*it, loc + "/row_policy");
    if (it->contains("rules")) t.row_policy = row_policy_from_json(*it, loc + "/row_policy");
  }
  normalize_table(t);
  return t;
}

json table_to_json(const Table& t) {
  json out = json::object();
  json cols = json::array();
  for (const auto& c : t.columns) cols.push_back(column_to_json(c));
  out["columns"] = std::move(cols);
  json keys = json::array();
  for (const auto& k : t.keys) keys.push_back({{"name", k.name}, {"columns", k.columns}});
  out["keys"] = std::move(keys);
  json fks = json::array();
  for (const auto& f : t.foreign_keys) fks.push_back(fkey_to_json(f));
  out["foreign_keys"] = std::move(fks);
  out["annotations"] = annotations_to_json(t.annotations);
  out["acls"] = acl_to_json(t.acls);
  if (t.row_policy) out["row_policy"] = row_policy_to_json(*t.row_policy);
  if (t.comment) out["comment"] = *t.comment;
  return out;
}

TableRef table_ref_from_json(const json& j, const std::string& location) {
  expect_object(j, location);
  return TableRef{expect_string(member(j, "schema"), location + "/schema"),
                  expect_string(member(j, "table"), location + "/table")};
}

FkeyName fkey_name_from_json(const json& j, const std::string& location) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string())
    throw ParseError("foreign key name must be a [schema, constraint] pair", location);
  return FkeyName{j[0].get<std::string>(), j[1].get<std::string>()};
}

AnnotationMap& annotations_of(Catalog& c, const ElementRef& ref) {
  switch (ref.kind) {
    case ElementRef::Kind::Catalog: return c.annotations;
    case ElementRef::Kind::Schema: {
      auto it = c.schemas.find(ref.schema);
      if (it == c.schemas.end()) throw ModelError("no such schema", ref.str());
      return it->second.annotations;
    }
    case ElementRef::Kind::Table: {
      Table* t = c.find_table({ref.schema, ref.table});
      if (!t) throw ModelError("no such table", ref.str());
      return t->annotations;
    }
    case ElementRef::Kind::Column: {
      Table* t = c.find_table({ref.schema, ref.table});
      Column* col = t ? t->find_column(ref.column) : nullptr;
      if (!col) throw ModelError("no such column", ref.str());
      return col->annotations;
    }
    case ElementRef::Kind::ForeignKey: {
      for (auto& [sn, schema] : c.schemas)
        for (auto& [tn, table] : schema.tables)
          for (auto& fk : table.foreign_keys)
            if (fk.name == ref.fkey) return fk.annotations;
      throw ModelError("no such foreign key", ref.str());
    }
  }
  throw ModelError("bad element reference", ref.str());
}

}  // namespace

const char* right_name(Right right) noexcept {
  switch (right) {
    case Right::Enumerate: return "enumerate";
    case Right::Select: return "select";
    case Right::Insert: return "insert";
    case Right::Update: return "update";
    case Right::Delete: return "delete";
  }
  return "select";
}

std::optional<Right> parse_right(std::string_view name) noexcept {
  for (Right r : kAllRights)
    if (name == right_name(r)) return r;
  return std::nullopt;
}

bool is_system_column_name(std::string_view name) noexcept {
  return std::find(std::begin(kSystemColumns), std::end(kSystemColumns), name) != std::end(kSystemColumns);
}

bool is_valid_identifier(std::string_view name) noexcept {
  if (name.empty()) return false;
  auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
  if (!alpha(name.front())) return false;
  for (char c : name)
    if (!alpha(c) && !(c >= '0' && c <= '9') && c != ' ') return false;
  return true;
}

const Column* Table::find_column(std::string_view column) const {
  for (const auto& c : columns)
    if (c.name == column) return &c;
  return nullptr;
}

Column* Table::find_column(std::string_view column) {
  for (auto& c : columns)
    if (c.name == column) return &c;
  return nullptr;
}

const ForeignKey* Table::find_fkey(const FkeyName& fkey) const {
  for (const auto& f : foreign_keys)
    if (f.name == fkey) return &f;
  return nullptr;
}

bool Table::is_key(const std::vector<std::string>& cols) const {
  std::set<std::string> wanted(cols.begin(), cols.end());
  for (const auto& k : keys)
    if (std::set<std::string>(k.columns.begin(), k.columns.end()) == wanted && k.columns.size() == cols.size())
      return true;
  return false;
}

bool Table::is_key_column(std::string_view column) const {
  for (const auto& k : keys)
    if (std::find(k.columns.begin(), k.columns.end(), column) != k.columns.end()) return true;
  return false;
}

const Table* Catalog::find_table(const TableRef& ref) const {
  auto s = schemas.find(ref.schema);
  if (s == schemas.end()) return nullptr;
  auto t = s->second.tables.find(ref.table);
  return t == s->second.tables.end() ? nullptr : &t->second;
}

Table* Catalog::find_table(const TableRef& ref) {
  return const_cast<Table*>(static_cast<const Catalog*>(this)->find_table(ref));
}

std::pair<const Table*, const ForeignKey*> Catalog::find_fkey(const FkeyName& name) const {
  for (const auto& [sn, schema] : schemas)
    for (const auto& [tn, table] : schema.tables)
      if (const ForeignKey* fk = table.find_fkey(name)) return {&table, fk};
  return {nullptr, nullptr};
}

std::vector<const ForeignKey*> Catalog::inbound_fkeys(const TableRef& ref) const {
  std::vector<const ForeignKey*> out;
  for (const auto& [sn, schema] : schemas)
    for (const auto& [tn, table] : schema.tables)
      for (const auto& fk : table.foreign_keys)
        if (fk.to_table == ref) out.push_back(&fk);
  return out;
}

std::vector<const Table*> Catalog::tables() const {
  std::vector<const Table*> out;
  for (const auto& [sn, schema] : schemas)
    for (const auto& [tn, table] : schema.tables) out.push_back(&table);
  return out;
}

void Catalog::validate() const {
  std::set<FkeyName> fkey_names;
  auto check_acl_roles = [](const Acl& acl, const std::string& loc) {
    for (const auto& [right, roles] : acl.grants)
      for (const auto& r : roles)
        if (r.empty()) throw ModelError("empty role name in acl", loc);
  };
  check_acl_roles(default_acl, "catalog");
  for (const auto& [sname, schema] : schemas) {
    if (!is_valid_identifier(sname)) throw ModelError("invalid schema name '" + sname + "'", sname);
    for (const auto& [tname, table] : schema.tables) {
      const std::string loc = sname + ":" + tname;
      if (!is_valid_identifier(tname)) throw ModelError("invalid table name '" + tname + "'", loc);
      if (table.schema != sname || table.name != tname) throw ModelError("table name mismatch", loc);
      check_acl_roles(table.acls, loc);
      std::set<std::string> names;
      for (const auto& c : table.columns) {
        if (!is_valid_identifier(c.name)) throw ModelError("invalid column name '" + c.name + "'", loc);
        if (!names.insert(c.name).second) throw ModelError("duplicate column '" + c.name + "'", loc);
        if (c.acls.find(Right::Delete)) throw ModelError("column acls cannot carry delete", loc + "/" + c.name);
        check_acl_roles(c.acls, loc + "/" + c.name);
        if (is_system_column_name(c.name) && (c.type != system_column_type(c.name) || c.nullable))
          throw ModelError("malformed system column '" + c.name + "'", loc);
      }
      for (auto sys : kSystemColumns)
        if (!table.find_column(sys)) throw ModelError("missing system column " + std::string(sys), loc);
      std::set<std::string> key_names;
      for (const auto& k : table.keys) {
        if (k.columns.empty()) throw ModelError("empty key '" + k.name + "'", loc);
        if (!key_names.insert(k.name).second) throw ModelError("duplicate key name '" + k.name + "'", loc);
        std::set<std::string> seen;
        for (const auto& kc : k.columns) {
          if (!table.find_column(kc)) throw ModelError("key '" + k.name + "' names missing column '" + kc + "'", loc);
          if (!seen.insert(kc).second) throw ModelError("key '" + k.name + "' repeats column '" + kc + "'", loc);
        }
      }
      if (!table.is_key({"RID"})) throw ModelError("{RID} must be a key", loc);
      for (const auto& fk : table.foreign_keys) {
        const std::string floc = fk.name.str();
        if (!is_valid_identifier(fk.name.name) || fk.name.schema.empty())
          throw ModelError("invalid foreign key name", floc);
        if (!fkey_names.insert(fk.name).second) throw ModelError("duplicate foreign key name", floc);
        if (fk.table != table.ref()) throw ModelError("foreign key owner mismatch", floc);
        if (fk.from_columns.empty()) throw ModelError("foreign key has no columns", floc);
        if (fk.from_columns.size() != fk.to_columns.size()) throw ModelError("foreign key arity mismatch", floc);
        const Table* target = find_table(fk.to_table);
        if (!target) throw ModelError("foreign key target " + fk.to_table.str() + " does not exist", floc);
        for (std::size_t i = 0; i < fk.from_columns.size(); ++i) {
          const Column* from = table.find_column(fk.from_columns[i]);
          if (!from) throw ModelError("foreign key column '" + fk.from_columns[i] + "' does not exist", floc);
          const Column* to = target->find_column(fk.to_columns[i]);
          if (!to) throw ModelError("referenced column '" + fk.to_columns[i] + "' does not exist", floc);
          if (from->type != to->type) throw ModelError("foreign key column types differ", floc);
        }
        if (!target->is_key(fk.to_columns))
          throw ModelError("referenced columns do not form a key of " + fk.to_table.str(), floc);
      }
      if (table.row_policy) {
        for (const auto& rule : table.row_policy->rules) {
          if (!rule.predicate) continue;
          const Column* c = table.find_column(rule.predicate->column);
          if (!c) throw ModelError("row policy column '" + rule.predicate->column + "' does not exist", loc);
          if (c->type != ScalarType::Text) throw ModelError("row policy column must be text", loc);
        }
      }
    }
  }
}

Acl acl_from_json(const json& j, const std::string& location, bool column_level) {
  Acl acl;
  if (j.is_null()) return acl;
  expect_object(j, location);
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto right = parse_right(it.key());
    if (!right) throw ModelError("unknown right '" + it.key() + "'", location);
    if (column_level && *right == Right::Delete) throw ModelError("column acls cannot carry delete", location);
    if (it->is_null()) continue;
    acl.grants[*right] = string_list(*it, location + "/" + it.key());
  }
  return acl;
}

json acl_to_json(const Acl& acl) {
  json out = json::object();
  for (const auto& [right, roles] : acl.grants) out[right_name(right)] = roles;
  return out;
}

RowPolicy row_policy_from_json(const json& j, const std::string& location) {
  expect_object(j, location);
  RowPolicy policy;
  const json& rules = member(j, "rules");
  expect_array(rules, location + "/rules");
  for (const auto& r : rules) {
    expect_object(r, location + "/rules");
    RowPolicyRule rule;
    for (auto& role : string_list(member(r, "roles"), location + "/rules/roles")) rule.roles.insert(role);
    if (auto p = r.find("predicate"); p != r.end() && !p->is_null()) {
      expect_object(*p, location + "/rules/predicate");
      RowFilter f;
      f.column = expect_string(member(*p, "column"), location + "/rules/predicate/column");
      for (auto& v : string_list(member(*p, "in"), location + "/rules/predicate/in")) f.values.insert(v);
      rule.predicate = std::move(f);
    }
    policy.rules.push_back(std::move(rule));
  }
  return policy;
}

json row_policy_to_json(const RowPolicy& policy) {
  json rules = json::array();
  for (const auto& r : policy.rules) {
    json rule = {{"roles", r.roles}};
    if (r.predicate) rule["predicate"] = {{"column", r.predicate->column}, {"in", r.predicate->values}};
    rules.push_back(std::move(rule));
  }
  return {{"rules", rules}};
}

Column column_from_json(const json& j, const std::string& location) {
  expect_object(j, location + "/columns");
  Column c;
  c.name = expect_string(member(j, "name"), location + "/columns/name");
  const std::string loc = location + "/" + c.name;
  std::string type = j.contains("type") ? expect_string(j["type"], loc + "/type") : "text";
  auto st = parse_scalar_type(type);
  if (!st) throw ModelError("unknown column type '" + type + "'", loc);
  c.type = *st;
  if (auto it = j.find("nullable"); it != j.end()) {
    if (!it->is_boolean()) throw ParseError("nullable must be a boolean", loc);
    c.nullable = it->get<bool>();
  }
  c.comment = optional_string(j, "comment", loc);
  c.annotations = annotations_from_json(member(j, "annotations"), loc);
  c.acls = acl_from_json(member(j, "acls"), loc + "/acls", true);
  c.is_system = is_system_column_name(c.name);
  return c;
}

json column_to_json(const Column& c) {
  json out = {{"name", c.name}, {"type", scalar_type_name(c.type)}, {"nullable", c.nullable},
              {"annotations", annotations_to_json(c.annotations)}};
  if (c.comment) out["comment"] = *c.comment;
  if (!c.acls.empty()) out["acls"] = acl_to_json(c.acls);
  return out;
}

ForeignKey fkey_from_json(const json& j, const TableRef& owner, const std::string& location) {
  expect_object(j, location + "/foreign_keys");
  ForeignKey fk;
  fk.name = fkey_name_from_json(member(j, "name"), location + "/foreign_keys/name");
  fk.table = owner;
  fk.from_columns = string_list(member(j, "from_columns"), fk.name.str() + "/from_columns");
  const json& to = member(j, "to");
  expect_object(to, fk.name.str() + "/to");
  fk.to_table = TableRef{expect_string(member(to, "schema"), fk.name.str() + "/to/schema"),
                         expect_string(member(to, "table"), fk.name.str() + "/to/table")};
  fk.to_columns = string_list(member(to, "columns"), fk.name.str() + "/to/columns");
  fk.annotations = annotations_from_json(member(j, "annotations"), fk.name.str());
  return fk;
}

json fkey_to_json(const ForeignKey& fk) {
  return {{"name", fk.name.to_json()},
          {"from_columns", fk.from_columns},
          {"to", {{"schema", fk.to_table.schema}, {"table", fk.to_table.table}, {"columns", fk.to_columns}}},
          {"annotations", annotations_to_json(fk.annotations)}};
}

Catalog catalog_from_json(const json& doc) {
  expect_object(doc, "catalog");
  Catalog c;
  if (auto it = doc.find("version"); it != doc.end()) {
    if (!it->is_number_integer()) throw ParseError("version must be an integer", "catalog/version");
    c.version = it->get<std::int64_t>();
  }
  if (auto it = doc.find("owners"); it != doc.end()) c.owners = string_list(*it, "catalog/owners");
  c.default_acl = acl_from_json(member(doc, "acls"), "catalog/acls", false);
  c.annotations = annotations_from_json(member(doc, "annotations"), "catalog");
  const json& schemas = member(doc, "schemas");
  expect_object(schemas, "catalog/schemas");
  for (auto s = schemas.begin(); s != schemas.end(); ++s) {
    expect_object(s.value(), s.key());
    Schema schema;
    schema.name = s.key();
    schema.comment = optional_string(s.value(), "comment", s.key());
    schema.annotations = annotations_from_json(member(s.value(), "annotations"), s.key());
    const json& tables = member(s.value(), "tables");
    expect_object(tables, s.key() + "/tables");
    for (auto t = tables.begin(); t != tables.end(); ++t)
      schema.tables.emplace(t.key(), table_from_json(t.value(), s.key(), t.key()));
    c.schemas.emplace(s.key(), std::move(schema));
  }
  c.validate();
  return c;
}

Catalog parse_catalog(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed catalog document: ") + e.what(), "catalog");
  }
  return catalog_from_json(doc);
}

json catalog_to_json(const Catalog& c) {
  json out = json::object();
  out["version"] = c.version;
  out["owners"] = c.owners;
  out["acls"] = acl_to_json(c.default_acl);
  out["annotations"] = annotations_to_json(c.annotations);
  json schemas = json::object();
  for (const auto& [sname, schema] : c.schemas) {
    json s = json::object();
    s["annotations"] = annotations_to_json(schema.annotations);
    if (schema.comment) s["comment"] = *schema.comment;
    json tables = json::object();
    for (const auto& [tname, table] : schema.tables) tables[tname] = table_to_json(table);
    s["tables"] = std::move(tables);
    schemas[sname] = std::move(s);
  }
  out["schemas"] = std::move(schemas);
  return out;
}

std::string serialize_catalog(const Catalog& catalog) { return catalog_to_json(catalog).dump(2); }

std::string ElementRef::str() const {
  switch (kind) {
    case Kind::Catalog: return "catalog";
    case Kind::Schema: return schema;
    case Kind::Table: return schema + ":" + table;
    case Kind::Column: return schema + ":" + table + "/" + column;
    case Kind::ForeignKey: return fkey.str();
  }
  return {};
}

ElementRef element_ref_from_json(const json& j) {
  ElementRef ref;
  if (j.is_null()) return ref;
  expect_object(j, "target");
  if (j.contains("fkey")) {
    ref.kind = ElementRef::Kind::ForeignKey;
    ref.fkey = fkey_name_from_json(j["fkey"], "target/fkey");
    return ref;
  }
  if (j.contains("schema")) {
    ref.kind = ElementRef::Kind::Schema;
    ref.schema = expect_string(j["schema"], "target/schema");
  }
  if (j.contains("table")) {
    ref.kind = ElementRef::Kind::Table;
    ref.table = expect_string(j["table"], "target/table");
  }
  if (j.contains("column")) {
    ref.kind = ElementRef::Kind::Column;
    ref.column = expect_string(j["column"], "target/column");
  }
  if ((ref.kind == ElementRef::Kind::Table || ref.kind == ElementRef::Kind::Column) && ref.schema.empty())
    throw ParseError("target table requires a schema", "target");
  return ref;
}

json element_ref_to_json(const ElementRef& ref) {
  switch (ref.kind) {
    case ElementRef::Kind::Catalog: return json::object();
    case ElementRef::Kind::Schema: return {{"schema", ref.schema}};
    case ElementRef::Kind::Table: return {{"schema", ref.schema}, {"table", ref.table}};
    case ElementRef::Kind::Column: return {{"schema", ref.schema}, {"table", ref.table}, {"column", ref.column}};
    case ElementRef::Kind::ForeignKey: return {{"fkey", ref.fkey.to_json()}};
  }
  return json::object();
}

Catalog apply_model_change(const Catalog& catalog, const ModelChange& mc) {
  Catalog next = catalog;
  struct Visitor {
    Catalog& c;

    Table& table(const TableRef& ref) {
      Table* t = c.find_table(ref);
      if (!t) throw ModelError("no such table", ref.str());
      return *t;
    }
    void operator()(const change::AddTable& a) {
      Table t = a.table;
      if (!is_valid_identifier(t.schema)) throw ModelError("invalid schema name", t.schema);
      Schema& schema = c.schemas[t.schema];
      schema.name = t.schema;
      if (schema.tables.count(t.name)) throw ModelError("table already exists", t.ref().str());
      normalize_table(t);
      schema.tables.emplace(t.name, std::move(t));
    }
    void operator()(const change::AddColumn& a) {
      Table& t = table(a.table);
      if (t.find_column(a.column.name)) throw ModelError("column already exists", a.table.str() + "/" + a.column.name);
      if (is_system_column_name(a.column.name)) throw ModelError("system columns are engine-managed", a.column.name);
      t.columns.push_back(a.column);
    }
    void operator()(const change::DropColumn& d) {
      Table& t = table(d.table);
      if (is_system_column_name(d.column)) throw ModelError("cannot drop a system column", d.table.str() + "/" + d.column);
      auto it = std::find_if(t.columns.begin(), t.columns.end(), [&](const Column& col) { return col.name == d.column; });
      if (it == t.columns.end()) throw ModelError("no such column", d.table.str() + "/" + d.column);
      t.columns.erase(it);
    }
    void operator()(const change::AddFkey& a) {
      if (c.find_fkey(a.fkey.name).second) throw ModelError("foreign key already exists", a.fkey.name.str());
      table(a.fkey.table).foreign_keys.push_back(a.fkey);
    }
    void operator()(const change::DropFkey& d) {
      for (auto& [sn, schema] : c.schemas)
        for (auto& [tn, t] : schema.tables) {
          auto it = std::find_if(t.foreign_keys.begin(), t.foreign_keys.end(),
                                 [&](const ForeignKey& fk) { return fk.name == d.fkey; });
          if (it != t.foreign_keys.end()) {
            t.foreign_keys.erase(it);
            return;
          }
        }
      throw ModelError("no such foreign key", d.fkey.str());
    }
    void operator()(const change::SetAnnotation& s) { annotations_of(c, s.target)[s.tag] = s.value; }
    void operator()(const change::DeleteAnnotation& d) { annotations_of(c, d.target).erase(d.tag); }
    void operator()(const change::SetAcl& s) {
      switch (s.target.kind) {
        case ElementRef::Kind::Catalog: c.default_acl = s.acl; break;
        case ElementRef::Kind::Table: table({s.target.schema, s.target.table}).acls = s.acl; break;
        case ElementRef::Kind::Column: {
          Column* col = table({s.target.schema, s.target.table}).find_column(s.target.column);
          if (!col) throw ModelError("no such column", s.target.str());
          col->acls = s.acl;
          break;
        }
        default: throw ModelError("acls attach to the catalog, tables, or columns", s.target.str());
      }
    }
    void operator()(const change::SetRowPolicy& s) { table(s.table).row_policy = s.policy; }
  };
  std::visit(Visitor{next}, mc);
  next.validate();
  next.version = catalog.version + 1;
  return next;
}

ModelChange model_change_from_json(const json& j) {
  expect_object(j, "change");
  const std::string op = expect_string(member(j, "op"), "change/op");
  if (op == "add-table") {
    std::string schema = expect_string(member(j, "schema"), "change/schema");
    std::string name = expect_string(member(j, "name"), "change/name");
    return change::AddTable{table_from_json(member(j, "table"), schema, name)};
  }
  if (op == "add-column") {
    TableRef t = table_ref_from_json(member(j, "table"), "change/table");
    return change::AddColumn{t, column_from_json(member(j, "column"), t.str())};
  }
  if (op == "drop-column")
    return change::DropColumn{table_ref_from_json(member(j, "table"), "change/table"),
                              expect_string(member(j, "column"), "change/column")};
  if (op == "add-fkey") {
    TableRef t = table_ref_from_json(member(j, "table"), "change/table");
    return change::AddFkey{fkey_from_json(member(j, "fkey"), t, t.str())};
  }
  if (op == "drop-fkey") return change::DropFkey{fkey_name_from_json(member(j, "fkey"), "change/fkey")};
  if (op == "set-annotation")
    return change::SetAnnotation{element_ref_from_json(member(j, "target")),
                                 expect_string(member(j, "tag"), "change/tag"),
                                 j.contains("value") ? j["value"] : json(nullptr)};
  if (op == "delete-annotation")
    return change::DeleteAnnotation{element_ref_from_json(member(j, "target")),
                                    expect_string(member(j, "tag"), "change/tag")};
  if (op == "set-acl") {
    ElementRef target = element_ref_from_json(member(j, "target"));
    return change::SetAcl{target, acl_from_json(member(j, "acls"), "change/acls",
                                                target.kind == ElementRef::Kind::Column)};
  }
  if (op == "set-row-policy") {
    TableRef t = table_ref_from_json(member(j, "table"), "change/table");
    auto it = j.find("row_policy");
    if (it == j.end() || it->is_null()) return change::SetRowPolicy{t, std::nullopt};
    return change::SetRowPolicy{t, row_policy_from_json(*it, "change/row_policy")};
  }
  throw ParseError("unknown model change '" + op + "'", "change/op");
}

json model_change_to_json(const ModelChange& mc) {
  struct Visitor {
    json operator()(const change::AddTable& a) const {
      return {{"op", "add-table"}, {"schema", a.table.schema}, {"name", a.table.name}, {"table", table_to_json(a.table)}};
    }
    json operator()(const change::AddColumn& a) const {
      return {{"op", "add-column"}, {"table", {{"schema", a.table.schema}, {"table", a.table.table}}},
              {"column", column_to_json(a.column)}};
    }
    json operator()(const change::DropColumn& d) const {
      return {{"op", "drop-column"}, {"table", {{"schema", d.table.schema}, {"table", d.table.table}}},
              {"column", d.column}};
    }
    json operator()(const change::AddFkey& a) const {
      return {{"op", "add-fkey"}, {"table", {{"schema", a.fkey.table.schema}, {"table", a.fkey.table.table}}},
              {"fkey", fkey_to_json(a.fkey)}};
    }
    json operator()(const change::DropFkey& d) const { return {{"op", "drop-fkey"}, {"fkey", d.fkey.to_json()}}; }
    json operator()(const change::SetAnnotation& s) const {
      return {{"op", "set-annotation"}, {"target", element_ref_to_json(s.target)}, {"tag", s.tag}, {"value", s.value}};
    }
    json operator()(const change::DeleteAnnotation& d) const {
      return {{"op", "delete-annotation"}, {"target", element_ref_to_json(d.target)}, {"tag", d.tag}};
    }
    json operator()(const change::SetAcl& s) const {
      return {{"op", "set-acl"}, {"target", element_ref_to_json(s.target)}, {"acls", acl_to_json(s.acl)}};
    }
    json operator()(const change::SetRowPolicy& s) const {
      return {{"op", "set-row-policy"},
              {"table", {{"schema", s.table.schema}, {"table", s.table.table}}},
              {"row_policy", s.policy ? row_policy_to_json(*s.policy) : json(nullptr)}};
    }
  };
  return std::visit(Visitor{}, mc);
}

}  // namespace modeladapt
