#include "storage/store.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstring>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "annotation/annotation.hpp"
#include "common/error.hpp"

namespace modeladapt {

namespace {

constexpr char kCrockford[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";

Timestamp system_now() {
  auto d = std::chrono::system_clock::now().time_since_epoch();
  return Timestamp{std::chrono::duration_cast<std::chrono::microseconds>(d).count()};
}

bool flagged(const AnnotationMap& anns, const char* tag) { return anns.count(tag) > 0; }

bool is_generated(const Table& t, const Column& c) {
  return flagged(t.annotations, tags::kGenerated) || flagged(c.annotations, tags::kGenerated);
}

bool is_immutable(const Table& t, const Column& c) {
  return flagged(t.annotations, tags::kImmutable) || flagged(c.annotations, tags::kImmutable);
}

// Tuple key over `cols`; nullopt when any value is null (never matched or deduplicated).
std::optional<std::string> tuple_key(const Row& row, const std::vector<std::string>& cols) {
  std::string key;
  for (const auto& c : cols) {
    auto it = row.find(c);
    if (it == row.end() || it->second.is_null()) return std::nullopt;
    key += it->second.key();
    key += '\x1f';
  }
  return key;
}

std::unordered_set<std::string> key_set(const TableData& data, const std::vector<std::string>& cols) {
  std::unordered_set<std::string> out;
  for (const auto& row : data.rows)
    if (auto k = tuple_key(row, cols)) out.insert(std::move(*k));
  return out;
}

const std::string& rid_of(const Row& row) { return row.at("RID").text(); }

Row row_from_record(const json& j, const Table& table) {
  Row row;
  for (const auto& col : table.columns) {
    auto it = j.find(col.name);
    row[col.name] = it == j.end() ? Value{} : value_from_json(*it, col.type, table.ref().str() + "/" + col.name);
  }
  return row;
}

class ConstraintChecker {
 public:
  explicit ConstraintChecker(const Snapshot& s) : s_(s) {}

  void written(const Table& table, const std::vector<const Row*>& rows) const {
    const std::string loc = table.ref().str();
    for (const Row* row : rows)
      for (const auto& col : table.columns)
        if (!col.nullable && row->at(col.name).is_null())
          throw ConstraintError("not_null", "column " + col.name + " cannot be null", loc + "/" + col.name);
    const TableData& data = s_.data(table.ref());
    for (const auto& key : table.keys) {
      std::unordered_set<std::string> seen;
      for (const auto& row : data.rows) {
        auto k = tuple_key(row, key.columns);
        if (k && !seen.insert(*k).second)
          throw ConstraintError("unique", "duplicate value for key " + key.name, loc + "/" + key.name);
      }
    }
    for (const auto& fk : table.foreign_keys) {
      auto targets = key_set(s_.data(fk.to_table), fk.to_columns);
      for (const Row* row : rows) {
        auto k = tuple_key(*row, fk.from_columns);
        if (k && !targets.count(*k))
          throw ConstraintError("fkey", "no " + fk.to_table.str() + " row matches " + fk.name.str(), fk.name.str());
      }
    }
  }

  // Every row referencing `target` must still find its referenced row.
  void references(const TableRef& target, const char* kind) const {
    for (const Table* t : s_.catalog->tables())
      for (const auto& fk : t->foreign_keys) {
        if (fk.to_table != target) continue;
        auto targets = key_set(s_.data(target), fk.to_columns);
        for (const auto& row : s_.data(t->ref()).rows) {
          auto k = tuple_key(row, fk.from_columns);
          if (k && !targets.count(*k))
            throw ConstraintError(kind, "row " + rid_of(row) + " of " + t->ref().str() + " still references " +
                                            target.str() + " via " + fk.name.str(),
                                  fk.name.str());
        }
      }
  }

  void everything() const {
    std::unordered_set<std::string> rids;
    for (const Table* t : s_.catalog->tables()) {
      std::vector<const Row*> rows;
      for (const auto& row : s_.data(t->ref()).rows) {
        rows.push_back(&row);
        if (!rids.insert(rid_of(row)).second)
          throw ConstraintError("unique", "RID " + rid_of(row) + " is not unique in the catalog", t->ref().str());
      }
      written(*t, rows);
    }
  }

 private:
  const Snapshot& s_;
};

std::string escape_csv_error(std::size_t line) { return "csv line " + std::to_string(line); }

}  // namespace

json row_to_json(const Row& row, const Table& table) {
  json out = json::object();
  for (const auto& col : table.columns) {
    auto it = row.find(col.name);
    out[col.name] = it == row.end() ? json(nullptr) : value_to_json(it->second);
  }
  return out;
}

std::string encode_rid(std::uint64_t n) {
  std::string digits;
  do {
    digits.insert(digits.begin(), kCrockford[n % 32]);
    n /= 32;
  } while (n > 0);
  if (digits.size() < 3) return digits;
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  std::string out;
  std::size_t lead = digits.size() % 4;
  if (lead == 0) lead = 4;
  out = digits.substr(0, lead);
  for (std::size_t i = lead; i < digits.size(); i += 4) out += "-" + digits.substr(i, 4);
  return out;
}

std::optional<std::uint64_t> decode_rid(std::string_view rid) {
  if (rid.empty()) return std::nullopt;
  std::uint64_t n = 0;
  std::size_t digits = 0;
  for (char c : rid) {
    if (c == '-') continue;
    const char* p = std::strchr(kCrockford, std::toupper(static_cast<unsigned char>(c)));
    if (!p || *p == '\0') return std::nullopt;
    if (n > (UINT64_MAX >> 5)) return std::nullopt;
    n = n * 32 + static_cast<std::uint64_t>(p - kCrockford);
    ++digits;
  }
  if (digits == 0 || encode_rid(n) != rid) return std::nullopt;
  return n;
}

const Row* TableData::find(const std::string& rid) const {
  auto it = by_rid.find(rid);
  return it == by_rid.end() ? nullptr : &rows[it->second];
}

void TableData::reindex() {
  by_rid.clear();
  for (std::size_t i = 0; i < rows.size(); ++i) by_rid[rid_of(rows[i])] = i;
}

const TableData& Snapshot::data(const TableRef& table) const {
  static const TableData empty;
  auto it = tables.find(table);
  return it == tables.end() ? empty : *it->second;
}

Store::Store(Catalog catalog, StoreOptions options) : options_(std::move(options)) {
  auto s = std::make_shared<Snapshot>();
  s->catalog = std::make_shared<const Catalog>(std::move(catalog));
  for (const Table* t : s->catalog->tables()) s->tables[t->ref()] = std::make_shared<TableData>();
  current_ = std::move(s);
  if (!options_.data_dir.empty()) open_data_dir();
}

Store::~Store() {
  if (options_.data_dir.empty()) return;
  try {
    checkpoint();
  } catch (...) {
    // The change log still holds every committed write.
  }
}

std::shared_ptr<const Snapshot> Store::snapshot() const {
  std::lock_guard lock(read_mu_);
  return current_;
}

Timestamp Store::tick(Timestamp& clock) const {
  Timestamp now = options_.now ? options_.now() : system_now();
  if (now.micros <= clock.micros) now.micros = clock.micros + 1;
  clock = now;
  return now;
}

void Store::commit(std::shared_ptr<const Snapshot> next, const json& log_record) {
  if (log_) {
    *log_ << log_record.dump() << '\n';
    log_->flush();
    if (!*log_) throw IoError("cannot append to change log", (options_.data_dir / "changes.jsonl").string());
  }
  std::lock_guard lock(read_mu_);
  current_ = std::move(next);
}

std::vector<Row> Store::insert(const TableRef& ref, const std::vector<json>& records, const ClientContext& client) {
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  const Catalog& cat = *snap->catalog;
  const Table* table = cat.find_table(ref);
  if (!table) throw NotFound("no such table", ref.str());
  AccessRights tr = table_rights(cat, *table, client);
  if (!tr.visible) throw NotFound("no such table", ref.str());
  if (!tr.insert) throw RightsError("insert not permitted on " + ref.str(), ref.str());
  const bool owner = is_owner(cat, client);

  auto next = std::make_shared<Snapshot>(*snap);
  auto data = std::make_shared<TableData>(snap->data(ref));
  std::vector<Row> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const json& rec = records[i];
    const std::string loc = ref.str() + "[" + std::to_string(i) + "]";
    if (!rec.is_object()) throw InvalidArgument("row must be an object", loc);
    for (auto it = rec.begin(); it != rec.end(); ++it) {
      const Column* col = table->find_column(it.key());
      if (!col || !column_rights(cat, *table, *col, client).visible)
        throw InvalidArgument("unknown column " + it.key(), loc);
      if (col->is_system) throw InvalidArgument("system column " + col->name + " is assigned by the store", loc);
      if (!column_rights(cat, *table, *col, client).insert)
        throw RightsError("insert not permitted on column " + col->name, ref.str() + "/" + col->name);
      if (is_generated(*table, *col) && !owner && !it.value().is_null())
        throw RightsError("column " + col->name + " is generated", ref.str() + "/" + col->name);
    }
    Row row = row_from_record(rec, *table);
    Timestamp now = tick(next->clock);
    row["RID"] = Value{encode_rid(next->next_rid++)};
    row["RCT"] = Value{now};
    row["RMT"] = Value{now};
    row["RCB"] = Value{client.id};
    row["RMB"] = Value{client.id};
    data->by_rid[rid_of(row)] = data->rows.size();
    data->rows.push_back(row);
    out.push_back(std::move(row));
  }
  next->tables[ref] = data;
  std::vector<const Row*> written;
  for (std::size_t i = data->rows.size() - out.size(); i < data->rows.size(); ++i) written.push_back(&data->rows[i]);
  ConstraintChecker(*next).written(*table, written);

  json log_rows = json::array();
  for (const auto& r : out) log_rows.push_back(row_to_json(r, *table));
  commit(next, {{"op", "insert"}, {"table", {ref.schema, ref.table}}, {"rows", log_rows}});
  return out;
}

std::vector<Row> Store::update(const TableRef& ref, const std::vector<std::string>& rids, const json& patch,
                               const ClientContext& client) {
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  const Catalog& cat = *snap->catalog;
  const Table* table = cat.find_table(ref);
  if (!table) throw NotFound("no such table", ref.str());
  AccessRights tr = table_rights(cat, *table, client);
  if (!tr.visible) throw NotFound("no such table", ref.str());
  if (!tr.update) throw RightsError("update not permitted on " + ref.str(), ref.str());
  if (!patch.is_object()) throw InvalidArgument("patch must be an object", ref.str());
  const bool owner = is_owner(cat, client);

  std::map<std::string, Value> values;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const Column* col = table->find_column(it.key());
    if (!col || !column_rights(cat, *table, *col, client).visible)
      throw InvalidArgument("unknown column " + it.key(), ref.str());
    const std::string loc = ref.str() + "/" + col->name;
    if (col->is_system) throw RightsError("system column " + col->name + " cannot be updated", loc);
    if (!column_rights(cat, *table, *col, client).update)
      throw RightsError("update not permitted on column " + col->name, loc);
    if (!owner && is_generated(*table, *col)) throw RightsError("column " + col->name + " is generated", loc);
    if (!owner && is_immutable(*table, *col)) throw RightsError("column " + col->name + " is immutable", loc);
    values[col->name] = value_from_json(it.value(), col->type, loc);
  }

  auto pred = row_predicate(*table, client, cat.owners);
  auto visible = [&](const Row& row) {
    if (!pred) return true;
    for (const auto& term : pred->terms) {
      const Value& v = row.at(term.column);
      if (v.is_text() && term.values.count(v.text())) return true;
    }
    return false;
  };

  auto next = std::make_shared<Snapshot>(*snap);
  auto data = std::make_shared<TableData>(snap->data(ref));
  std::vector<std::string> unique_rids;
  for (const auto& rid : rids)
    if (std::find(unique_rids.begin(), unique_rids.end(), rid) == unique_rids.end()) unique_rids.push_back(rid);
  std::vector<Row> out;
  std::vector<const Row*> written;
  for (const auto& rid : unique_rids) {
    auto it = data->by_rid.find(rid);
    if (it == data->by_rid.end() || !visible(data->rows[it->second]))
      throw NotFound("no row " + rid + " in " + ref.str(), ref.str());
    Row& row = data->rows[it->second];
    for (const auto& [k, v] : values) row[k] = v;
    row["RMT"] = Value{tick(next->clock)};
    row["RMB"] = Value{client.id};
    out.push_back(row);
    written.push_back(&row);
  }
  next->tables[ref] = data;
  ConstraintChecker checker(*next);
  checker.written(*table, written);
  checker.references(ref, "fkey_restrict");

  json log_rows = json::array();
  for (const auto& r : out) log_rows.push_back(row_to_json(r, *table));
  commit(next, {{"op", "update"}, {"table", {ref.schema, ref.table}}, {"rows", log_rows}});
  return out;
}

std::size_t Store::remove(const TableRef& ref, const std::vector<std::string>& rids, const ClientContext& client) {
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  const Catalog& cat = *snap->catalog;
  const Table* table = cat.find_table(ref);
  if (!table) throw NotFound("no such table", ref.str());
  AccessRights tr = table_rights(cat, *table, client);
  if (!tr.visible) throw NotFound("no such table", ref.str());
  if (!tr.del) throw RightsError("delete not permitted on " + ref.str(), ref.str());
  if (rids.empty()) return 0;

  auto pred = row_predicate(*table, client, cat.owners);
  const TableData& old = snap->data(ref);
  std::set<std::string> doomed;
  for (const auto& rid : rids) {
    const Row* row = old.find(rid);
    bool visible = row != nullptr;
    if (row && pred) {
      visible = false;
      for (const auto& term : pred->terms) {
        const Value& v = row->at(term.column);
        visible = visible || (v.is_text() && term.values.count(v.text()));
      }
    }
    if (!visible) throw NotFound("no row " + rid + " in " + ref.str(), ref.str());
    doomed.insert(rid);
  }
  auto next = std::make_shared<Snapshot>(*snap);
  auto data = std::make_shared<TableData>();
  for (const auto& row : old.rows)
    if (!doomed.count(rid_of(row))) data->rows.push_back(row);
  data->reindex();
  next->tables[ref] = data;
  ConstraintChecker(*next).references(ref, "fkey_restrict");
  commit(next, {{"op", "delete"}, {"table", {ref.schema, ref.table}}, {"rids", doomed}});
  return doomed.size();
}

std::vector<Row> Store::load(const TableRef& ref, const std::vector<json>& records, const std::string& identity) {
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  const Table* table = snap->catalog->find_table(ref);
  if (!table) throw NotFound("no such table", ref.str());

  std::unordered_set<std::string> rids;
  for (const auto& [t, d] : snap->tables)
    for (const auto& [rid, idx] : d->by_rid) rids.insert(rid);

  auto next = std::make_shared<Snapshot>(*snap);
  auto data = std::make_shared<TableData>(snap->data(ref));
  std::vector<Row> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const json& rec = records[i];
    const std::string loc = ref.str() + "[" + std::to_string(i) + "]";
    if (!rec.is_object()) throw InvalidArgument("row must be an object", loc);
    for (auto it = rec.begin(); it != rec.end(); ++it)
      if (!table->find_column(it.key())) throw InvalidArgument("unknown column " + it.key(), loc);
    Row row = row_from_record(rec, *table);
    Timestamp now = tick(next->clock);
    if (row["RID"].is_null()) {
      row["RID"] = Value{encode_rid(next->next_rid++)};
    } else if (auto n = decode_rid(row["RID"].text())) {
      next->next_rid = std::max(next->next_rid, *n + 1);
    }
    if (!rids.insert(rid_of(row)).second)
      throw ConstraintError("unique", "RID " + rid_of(row) + " is already in use", loc);
    if (row["RCT"].is_null()) row["RCT"] = Value{now};
    if (row["RMT"].is_null()) row["RMT"] = row["RCT"];
    if (row["RCB"].is_null()) row["RCB"] = Value{identity};
    if (row["RMB"].is_null()) row["RMB"] = row["RCB"];
    next->clock.micros = std::max(next->clock.micros, row["RMT"].timestamp().micros);
    data->by_rid[rid_of(row)] = data->rows.size();
    data->rows.push_back(row);
    out.push_back(std::move(row));
  }
  next->tables[ref] = data;
  std::vector<const Row*> written;
  for (std::size_t i = data->rows.size() - out.size(); i < data->rows.size(); ++i) written.push_back(&data->rows[i]);
  ConstraintChecker(*next).written(*table, written);

  json log_rows = json::array();
  for (const auto& r : out) log_rows.push_back(row_to_json(r, *table));
  commit(next, {{"op", "insert"}, {"table", {ref.schema, ref.table}}, {"rows", log_rows}});
  return out;
}

namespace {

// Rebuilds every table's rows under `catalog`, keeping values of surviving
// columns and filling new columns with null.
std::shared_ptr<Snapshot> reconcile(const Snapshot& old, std::shared_ptr<const Catalog> catalog) {
  auto next = std::make_shared<Snapshot>();
  next->catalog = std::move(catalog);
  next->next_rid = old.next_rid;
  next->clock = old.clock;
  for (const Table* t : next->catalog->tables()) {
    auto data = std::make_shared<TableData>();
    for (const auto& oldrow : old.data(t->ref()).rows) {
      Row row;
      for (const auto& col : t->columns) {
        auto it = oldrow.find(col.name);
        Value v = it == oldrow.end() ? Value{} : it->second;
        if (!value_matches(v, col.type))
          throw ConstraintError("type", "stored value does not match type of " + col.name, t->ref().str() + "/" + col.name);
        row[col.name] = std::move(v);
      }
      data->rows.push_back(std::move(row));
    }
    data->reindex();
    next->tables[t->ref()] = data;
  }
  return next;
}

void replay(Snapshot& s, const json& record) {
  const std::string op = record.at("op").get<std::string>();
  TableRef ref{record.at("table").at(0).get<std::string>(), record.at("table").at(1).get<std::string>()};
  const Table* table = s.catalog->find_table(ref);
  if (!table) return;
  auto data = std::make_shared<TableData>(s.data(ref));
  if (op == "insert" || op == "update") {
    for (const auto& rec : record.at("rows")) {
      json known = json::object();
      for (auto it = rec.begin(); it != rec.end(); ++it)
        if (table->find_column(it.key())) known[it.key()] = it.value();
      Row row = row_from_record(known, *table);
      const std::string& rid = rid_of(row);
      if (auto n = decode_rid(rid)) s.next_rid = std::max(s.next_rid, *n + 1);
      s.clock.micros = std::max(s.clock.micros, row.at("RMT").timestamp().micros);
      auto it = data->by_rid.find(rid);
      if (it != data->by_rid.end()) {
        data->rows[it->second] = std::move(row);
      } else {
        data->by_rid[rid] = data->rows.size();
        data->rows.push_back(std::move(row));
      }
    }
  } else if (op == "delete") {
    std::set<std::string> doomed = record.at("rids").get<std::set<std::string>>();
    std::vector<Row> kept;
    for (auto& row : data->rows)
      if (!doomed.count(rid_of(row))) kept.push_back(std::move(row));
    data->rows = std::move(kept);
    data->reindex();
  } else {
    throw ParseError("unknown change log op " + op);
  }
  s.tables[ref] = data;
}

}  // namespace

void Store::set_catalog(Catalog catalog) {
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  auto next = reconcile(*snap, std::make_shared<const Catalog>(std::move(catalog)));
  ConstraintChecker(*next).everything();
  std::lock_guard rlock(read_mu_);
  current_ = std::move(next);
}

Catalog Store::apply_model_change(const ModelChange& change) {
  Catalog next = modeladapt::apply_model_change(*catalog(), change);
  set_catalog(next);
  return next;
}

void Store::open_data_dir() {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(options_.data_dir, ec);
  if (ec) throw IoError("cannot create data directory: " + ec.message(), options_.data_dir.string());

  auto loaded = std::make_shared<Snapshot>(*current_);
  const fs::path snap_path = options_.data_dir / "snapshot.json";
  if (fs::exists(snap_path)) {
    std::ifstream in(snap_path);
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ParseError(std::string("corrupt snapshot: ") + e.what(), snap_path.string());
    }
    loaded->next_rid = doc.value("next_rid", std::uint64_t{1});
    if (auto c = doc.find("clock"); c != doc.end() && c->is_string())
      if (auto ts = parse_timestamp(c->get<std::string>())) loaded->clock = *ts;
    const json tables = doc.value("tables", json::object());
    for (auto& [key, rows] : tables.items()) {
      auto colon = key.find(':');
      if (colon == std::string::npos) continue;
      json rec = {{"op", "insert"}, {"table", {key.substr(0, colon), key.substr(colon + 1)}}, {"rows", rows}};
      replay(*loaded, rec);
    }
  }
  const fs::path log_path = options_.data_dir / "changes.jsonl";
  if (fs::exists(log_path)) {
    std::ifstream in(log_path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      json rec = json::parse(line, nullptr, false);
      // A torn final line from an interrupted append is dropped.
      if (rec.is_discarded()) {
        if (in.peek() == EOF) break;
        throw ParseError("corrupt change log", log_path.string() + ":" + std::to_string(n));
      }
      replay(*loaded, rec);
    }
  }
  auto checked = reconcile(*loaded, loaded->catalog);
  ConstraintChecker(*checked).everything();
  current_ = std::move(checked);
  log_ = std::make_unique<std::ofstream>(log_path, std::ios::app);
  if (!*log_) throw IoError("cannot open change log", log_path.string());
}

void Store::checkpoint() {
  if (options_.data_dir.empty()) return;
  std::lock_guard lock(write_mu_);
  auto snap = snapshot();
  json tables = json::object();
  for (const Table* t : snap->catalog->tables()) {
    json rows = json::array();
    for (const auto& row : snap->data(t->ref()).rows) rows.push_back(row_to_json(row, *t));
    tables[t->ref().str()] = std::move(rows);
  }
  json doc = {{"next_rid", snap->next_rid}, {"clock", format_timestamp(snap->clock)}, {"tables", tables}};
  namespace fs = std::filesystem;
  const fs::path tmp = options_.data_dir / "snapshot.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << doc.dump() << '\n';
    if (!out) throw IoError("cannot write snapshot", tmp.string());
  }
  fs::rename(tmp, options_.data_dir / "snapshot.json");
  log_ = std::make_unique<std::ofstream>(options_.data_dir / "changes.jsonl", std::ios::trunc);
}

std::vector<json> read_csv(std::istream& in, const Table& table) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
    } else if (c == '"') {
      if (!field.empty()) throw ParseError("unexpected quote", escape_csv_error(line));
      quoted = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && in.peek() == '\n') in.get(c);
      record.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(record));
      record.clear();
      ++line;
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", escape_csv_error(line));
  if (any) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  std::vector<json> out;
  if (records.empty()) return out;
  const auto& header = records.front();
  std::vector<const Column*> cols;
  for (const auto& h : header) {
    const Column* col = table.find_column(h);
    if (!col) throw InvalidArgument("unknown column " + h, table.ref().str());
    cols.push_back(col);
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields", escape_csv_error(r + 1));
    json row = json::object();
    for (std::size_t i = 0; i < rec.size(); ++i)
      row[cols[i]->name] = value_to_json(value_from_text(rec[i], cols[i]->type, escape_csv_error(r + 1)));
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<json> read_jsonl(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), "jsonl line " + std::to_string(n));
    }
  }
  return out;
}

}  // namespace modeladapt
