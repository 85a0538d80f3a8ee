#include "service/engine.hpp"

#include <sys/stat.h>

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "common/error.hpp"
#include "er/er.hpp"
#include "render/render.hpp"

namespace modeladapt {

namespace fs = std::filesystem;

Session::Session(std::shared_ptr<const Catalog> c, const ClientContext& client)
    : catalog(std::move(c)), model(prune_model(*catalog, client)), annotations(validate_annotations(model)) {}

json model_document(const Session& session, const ClientContext& client) {
  const RoleBasedModel& m = session.model;
  const Catalog& pruned = session.annotations.pruned;
  json schemas = json::object();
  for (const auto& [sname, schema] : pruned.schemas) {
    json tables = json::object();
    for (const auto& [tname, table] : schema.tables) {
      json t = json::object();
      if (table.comment) t["comment"] = *table.comment;
      t["rights"] = m.rights(table.ref()).to_json();
      json cols = json::array();
      for (const auto& c : table.columns) {
        json col = {{"name", c.name}, {"type", scalar_type_name(c.type)}, {"nullable", c.nullable}};
        if (c.comment) col["comment"] = *c.comment;
        col["annotations"] = c.annotations;
        col["rights"] = m.rights(table.ref(), c.name).to_json();
        cols.push_back(std::move(col));
      }
      t["columns"] = std::move(cols);
      json keys = json::array();
      for (const auto& k : table.keys) keys.push_back({{"name", k.name}, {"columns", k.columns}});
      t["keys"] = std::move(keys);
      json fks = json::array();
      for (const auto& f : table.foreign_keys) fks.push_back(fkey_to_json(f));
      t["foreign_keys"] = std::move(fks);
      t["annotations"] = table.annotations;
      tables[tname] = std::move(t);
    }
    json s = {{"annotations", schema.annotations}, {"tables", std::move(tables)}};
    if (schema.comment) s["comment"] = *schema.comment;
    schemas[sname] = std::move(s);
  }
  return {{"version", pruned.version},
          {"client", {{"id", client.id}, {"roles", client.roles}}},
          {"owner", m.is_owner},
          {"annotations", pruned.annotations},
          {"schemas", std::move(schemas)}};
}

int http_status(const Error& e) noexcept {
  switch (e.code()) {
    case ErrorCode::parse:
    case ErrorCode::model:
    case ErrorCode::resolution:
    case ErrorCode::plan:
    case ErrorCode::invalid_argument: return 400;
    case ErrorCode::unauthorized: return 401;
    case ErrorCode::rights: return 403;
    case ErrorCode::not_found: return 404;
    case ErrorCode::constraint: return 409;
    case ErrorCode::io: return 500;
  }
  return 500;
}

json error_body(const Error& e) {
  json body = {{"code", error_code_name(e.code())}, {"message", e.what()}, {"location", e.location()}};
  if (const auto* c = dynamic_cast<const ConstraintError*>(&e)) body["kind"] = c->kind();
  return body;
}

namespace {

bool valid_role(std::string_view r) {
  if (r.empty() || r.size() > 128) return false;
  return std::all_of(r.begin(), r.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.' || ch == ':' ||
           ch == '@' || ch == '*';
  });
}

bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 256) return false;
  return std::all_of(id.begin(), id.end(), [](char ch) {
    auto u = static_cast<unsigned char>(ch);
    return u > 0x20 && u != 0x7f && ch != ',';
  });
}

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

Response json_response(int status, const json& body) {
  Response r;
  r.status = status;
  r.body = body.dump();
  return r;
}

const std::string* param(const Request& req, const std::string& name) {
  auto it = req.query.find(name);
  return it == req.query.end() ? nullptr : &it->second;
}

std::size_t size_param(const Request& req, const std::string& name, std::size_t fallback) {
  const std::string* v = param(req, name);
  if (!v) return fallback;
  std::size_t n = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
  if (ec != std::errc() || p != v->data() + v->size()) throw InvalidArgument(name + " must be a non-negative integer", name);
  return n;
}

json json_param(const Request& req, const std::string& name) {
  const std::string* v = param(req, name);
  if (!v || v->empty()) return nullptr;
  json j = json::parse(*v, nullptr, false);
  if (j.is_discarded()) throw InvalidArgument(name + " is not valid JSON", name);
  return j;
}

json json_body(const Request& req) {
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw InvalidArgument("request body is not valid JSON", "body");
  return j;
}

std::vector<FacetFilter> filters_param(const Request& req) {
  json j = json_param(req, "filters");
  if (j.is_null()) return {};
  return facet_filters_from_json(j);
}

std::vector<SortKey> sort_param(const Request& req) {
  std::vector<SortKey> out;
  const std::string* v = param(req, "sort");
  if (!v || v->empty()) return out;
  for (auto part : split(*v, ',')) {
    part = trim(part);
    if (part.empty()) throw InvalidArgument("empty sort key", "sort");
    bool desc = part[0] == '-';
    out.push_back(SortKey{desc ? part.substr(1) : part, desc});
  }
  return out;
}

std::string context_param(const Request& req, const std::string& fallback) {
  const std::string* v = param(req, "context");
  std::string c = v ? *v : fallback;
  if (!is_valid_context(c) || c == "*") throw InvalidArgument("invalid context '" + c + "'", "context");
  return c;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

// Per-request rendering against one session and one snapshot.
class Presenter {
 public:
  Presenter(const Session& s, const Snapshot& snap) : s_(s), snap_(snap) {}

  const Table& table(const TableRef& ref) const {
    const Table* t = s_.model.find_table(ref);
    if (!t) throw NotFound("no such table", ref.str());
    return *t;
  }

  // {{{col}}} binds formatted values, {{{_col}}} raw values.
  json bindings(const Table& t, const json& values) const {
    json b = json::object();
    for (const auto& c : t.columns) {
      auto it = values.find(c.name);
      if (it == values.end()) continue;
      b[c.name] = formatted(c, *it);
      b["_" + c.name] = *it;
    }
    return b;
  }

  std::string formatted(const Column& c, const json& raw) const {
    if (raw.is_null()) return "";
    try {
      return format_value(value_from_json(raw, c.type), c.type);
    } catch (const Error&) {
      return raw.is_string() ? raw.get<std::string>() : raw.dump();
    }
  }

  std::string row_name(const Table& t, const json& values) const {
    std::string tmpl = row_name_template(t, s_.annotations);
    std::string text = tmpl.empty() ? "" : render_template(tmpl, bindings(t, values));
    if (trim(text).empty() && values.contains("RID")) text = values["RID"].get<std::string>();
    return markdown_to_html(text);
  }

  json entity(const Table& t, const json& values) const {
    json fmt = json::object();
    for (const auto& c : t.columns)
      if (auto it = values.find(c.name); it != values.end()) fmt[c.name] = formatted(c, *it);
    return {{"RID", values.value("RID", json(nullptr))},
            {"values", values},
            {"formatted", std::move(fmt)},
            {"row_name", row_name(t, values)}};
  }

  json page(const Table& t, const ResultSet& rs, const QueryPlan& q) const {
    json rows = json::array();
    for (const auto& r : rs.rows) rows.push_back(entity(t, r));
    return {{"table", t.ref().str()},
            {"total", rs.total},
            {"limit", q.limit ? json(*q.limit) : json(nullptr)},
            {"offset", q.offset},
            {"rows", std::move(rows)}};
  }

  // Readable columns of a stored row.
  json visible_row(const Table& t, const Row& row) const {
    json out = json::object();
    for (const auto& c : t.columns)
      if (s_.model.rights(t.ref(), c.name).select)
        if (auto it = row.find(c.name); it != row.end()) out[c.name] = value_to_json(it->second);
    return out;
  }

  // The row an outbound fkey points at, if the client may see it.
  std::optional<json> referenced(const ForeignKey& fk, const json& values) const {
    QueryPlan q;
    q.add_instance(fk.to_table, s_.model.row_predicate(fk.to_table));
    const Table& target = table(fk.to_table);
    const Table* owner = s_.model.find_table(fk.table);
    for (std::size_t i = 0; i < fk.from_columns.size(); ++i) {
      const json& v = values.value(fk.from_columns[i], json(nullptr));
      if (v.is_null()) return std::nullopt;
      const Column* col = owner ? owner->find_column(fk.from_columns[i]) : nullptr;
      q.conditions.push_back(
          Condition{{Predicate{0, fk.to_columns[i], PredicateOp::Eq, {value_from_json(v, col ? col->type : ScalarType::Text)}}}});
    }
    for (const auto& c : target.columns)
      if (s_.model.rights(target.ref(), c.name).select) q.columns.push_back(ColumnRef{0, c.name});
    q.limit = 1;
    ResultSet rs = execute(q, snap_);
    if (rs.rows.empty()) return std::nullopt;
    return rs.rows[0];
  }

  std::string link(const Table& t, const json& values) const {
    std::string name = row_name_text(t, values);
    return "[" + escape_markdown(name) + "](/record/" + t.schema + "/" + t.name + "/" +
           values.value("RID", std::string()) + ")";
  }

  std::string row_name_text(const Table& t, const json& values) const {
    std::string tmpl = row_name_template(t, s_.annotations);
    std::string text = tmpl.empty() ? "" : render_template(tmpl, bindings(t, values));
    if (trim(text).empty()) text = values.value("RID", std::string());
    return text;
  }

  const Session& session() const { return s_; }
  const Snapshot& snapshot() const { return snap_; }

 private:
  const Session& s_;
  const Snapshot& snap_;
};

struct PropertyValue {
  json value;
  std::vector<std::string> items;  // display text per element for lists
  std::string text;                // display text of the whole value
  bool list = false;
};

PropertyValue value_of_source(const Presenter& p, const ResolvedSource& src, const ResultSet& rs,
                              const QueryPlan& q) {
  PropertyValue out;
  const Table& end = p.table(src.end_table());
  const Column* col = end.find_column(src.end_column);
  auto text_of = [&](const json& v) { return col ? p.formatted(*col, v) : v.dump(); };
  if (q.projection == Projection::Aggregate) {
    out.value = rs.rows.empty() ? json(nullptr) : rs.rows[0]["value"];
    if (out.value.is_array()) {
      out.list = true;
      for (const auto& v : out.value) out.items.push_back(v.is_object() ? p.row_name_text(end, v) : text_of(v));
    } else if (out.value.is_number_integer() && (src.aggregate == Aggregate::Cnt || src.aggregate == Aggregate::CntD)) {
      out.text = format_value(Value{out.value.get<std::int64_t>()}, ScalarType::Int);
    } else {
      out.text = text_of(out.value);
    }
  } else {
    out.list = src.multivalued;
    out.value = json::array();
    for (const auto& r : rs.rows) {
      out.value.push_back(r);
      out.items.push_back(src.entity_mode ? p.row_name_text(end, r) : text_of(r.value(src.end_column, json(nullptr))));
    }
    if (!out.list) {
      out.value = out.value.empty() ? json(nullptr) : out.value[0];
      out.text = out.items.empty() ? "" : out.items[0];
    }
  }
  if (out.list) {
    for (std::size_t i = 0; i < out.items.size(); ++i) out.text += (i ? ", " : "") + out.items[i];
  }
  return out;
}

std::string bullet_list(const std::vector<std::string>& items) {
  std::string md;
  for (const auto& i : items) md += "- " + escape_markdown(i) + "\n";
  return md;
}

}  // namespace

Engine::Engine(Store& store, EngineOptions options) : store_(store), options_(std::move(options)) {
  if (!options_.token_file.empty()) {
    std::ifstream in(options_.token_file);
    if (!in) throw IoError("cannot read token file", options_.token_file.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ParseError("token file must be a JSON object", options_.token_file.string());
    for (auto& [token, ident] : doc.items()) {
      if (!ident.is_object() || !ident.contains("id")) throw ParseError("token entry needs an id", token);
      tokens_[token] = ClientContext::make(ident["id"].get<std::string>(),
                                           ident.value("roles", std::vector<std::string>{}));
    }
  }
  if (!options_.asset_dir.empty()) fs::create_directories(options_.asset_dir);
  refresh();
}

std::optional<Engine::FileStamp> Engine::stamp() const {
  if (options_.catalog_path.empty()) return std::nullopt;
  struct stat st {};
  if (::stat(options_.catalog_path.c_str(), &st) != 0) return std::nullopt;
  std::error_code ec;
  FileStamp s;
  s.mtime = fs::last_write_time(options_.catalog_path, ec);
  s.size = static_cast<std::uintmax_t>(st.st_size);
  s.inode = static_cast<std::uint64_t>(st.st_ino);
  return s;
}

bool Engine::refresh() {
  if (options_.catalog_path.empty()) return false;
  std::lock_guard lock(catalog_mu_);
  auto st = stamp();
  if (!st || (seen_ && *st == *seen_)) return false;
  seen_ = st;
  std::ifstream in(options_.catalog_path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    Catalog next = parse_catalog(buf.str());
    if (catalog_to_json(next) == catalog_to_json(*store_.catalog())) return false;
    store_.set_catalog(std::move(next));
    return true;
  } catch (const Error& e) {
    std::cerr << "modeladapt: keeping current catalog; " << options_.catalog_path.string() << ": " << e.what()
              << '\n';
    return false;
  }
}

void Engine::write_catalog_file(const Catalog& catalog) {
  fs::path tmp = options_.catalog_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << serialize_catalog(catalog) << '\n';
    if (!out) throw IoError("cannot write catalog", tmp.string());
  }
  fs::rename(tmp, options_.catalog_path);
  seen_ = stamp();
}

Catalog Engine::apply_change(const ModelChange& change) {
  refresh();
  std::lock_guard lock(catalog_mu_);
  Catalog next = store_.apply_model_change(change);
  if (!options_.catalog_path.empty()) write_catalog_file(next);
  return next;
}

ClientContext Engine::identify(const Request& req) const {
  auto header = [&](const char* name) -> const std::string* {
    auto it = req.headers.find(name);
    return it == req.headers.end() ? nullptr : &it->second;
  };
  if (const std::string* auth = header("authorization")) {
    const std::string prefix = "Bearer ";
    if (auth->rfind(prefix, 0) != 0) throw Unauthorized("unsupported authorization scheme", "Authorization");
    auto it = tokens_.find(trim(auth->substr(prefix.size())));
    if (it == tokens_.end()) throw Unauthorized("unknown token", "Authorization");
    return it->second;
  }
  const std::string* id = header("x-client-id");
  const std::string* roles = header("x-client-roles");
  if (!id && !roles) return ClientContext::anonymous();
  if (!id) throw Unauthorized("X-Client-Roles requires X-Client-Id", "X-Client-Id");
  std::string ident = trim(*id);
  if (!valid_id(ident)) throw Unauthorized("malformed X-Client-Id", "X-Client-Id");
  std::vector<std::string> list;
  if (roles && !trim(*roles).empty()) {
    for (auto r : split(*roles, ',')) {
      r = trim(r);
      if (!valid_role(r)) throw Unauthorized("malformed role '" + r + "'", "X-Client-Roles");
      list.push_back(r);
    }
  }
  return ClientContext::make(ident, list);
}

std::shared_ptr<const Session> Engine::session(const std::shared_ptr<const Catalog>& catalog,
                                               const ClientContext& client) {
  std::lock_guard lock(cache_mu_);
  if (catalog.get() != cache_catalog_ || catalog->version != cache_version_) {
    cache_.clear();
    cache_catalog_ = catalog.get();
    cache_version_ = catalog->version;
  }
  auto& slot = cache_[client.role_key()];
  if (!slot) slot = std::make_shared<const Session>(catalog, client);
  return slot;
}

namespace {

struct Route {
  const Request& req;
  std::vector<std::string> parts;

  explicit Route(const Request& r) : req(r) {
    for (auto& p : split(r.path, '/'))
      if (!p.empty()) parts.push_back(p);
  }
  bool is(const std::string& method, std::initializer_list<const char*> prefix, std::size_t size) const {
    if (req.method != method || parts.size() != size) return false;
    std::size_t i = 0;
    for (const char* p : prefix)
      if (parts[i++] != p) return false;
    return true;
  }
  TableRef table(std::size_t at) const { return TableRef{parts[at], parts[at + 1]}; }
};

}  // namespace

Response Engine::handle(const Request& req) {
  Response res;
  try {
    if (req.method == "OPTIONS") {
      res.status = 204;
      res.body.clear();
    } else {
      refresh();
      const ClientContext client = identify(req);
      const auto snap = store_.snapshot();
      const auto sess = session(snap->catalog, client);
      Presenter p(*sess, *snap);
      const ModelView view = sess->view();
      Route r(req);

      if (r.is("GET", {}, 0)) {
        res = json_response(200, {{"service", "modeladapt"}, {"catalog_version", snap->catalog->version}});
      } else if (r.is("GET", {"model"}, 1)) {
        res = json_response(200, model_document(*sess, client));
      } else if (r.is("GET", {"diagnostics"}, 1)) {
        json d = json::array();
        for (const auto& diag : sess->annotations.diagnostics) d.push_back(diag.to_json());
        res = json_response(200, {{"version", snap->catalog->version}, {"diagnostics", d}});
      } else if (r.is("GET", {"plan"}, 3)) {
        TablePlan tp = plan(r.table(1), context_param(req, "compact"), sess->model, sess->annotations);
        res = json_response(200, tp.to_json());
      } else if (r.is("GET", {"entity"}, 3)) {
        const Table& t = p.table(r.table(1));
        EntitySetRequest er{t.ref(), filters_param(req), param(req, "q") ? *param(req, "q") : "", sort_param(req),
                            size_param(req, "limit", kEntityPageSize), size_param(req, "offset", 0)};
        QueryPlan q = compile_entity_set(view, er);
        res = json_response(200, p.page(t, execute(q, *snap), q));
      } else if (r.is("GET", {"record"}, 4)) {
        const Table& t = p.table(r.table(1));
        const std::string context = context_param(req, "detailed");
        auto plans = compile_record(view, t.ref(), r.parts[3], context);
        ResultSet core = execute(plans[0].plan, *snap);
        if (core.rows.empty()) throw NotFound("no such row", t.ref().str() + "/" + r.parts[3]);
        const json& values = core.rows[0];
        TablePlan tp = plan(t.ref(), context, sess->model, sess->annotations);

        std::map<std::string, PropertyValue> computed;
        json relationships = json::array(), plan_list = json::array();
        const TableAnnotations* ta = sess->annotations.table(t.ref());
        for (const auto& rp : plans) {
          plan_list.push_back({{"role", record_role_name(rp.role)},
                               {"name", rp.name},
                               {"lazy", rp.role == RecordPlan::Role::Relationship}});
          if (rp.role == RecordPlan::Role::Property || rp.role == RecordPlan::Role::Dependency) {
            const ResolvedSource* src = nullptr;
            for (const auto& prop : tp.properties)
              if (prop.name == rp.name) src = &prop.source;
            if (!src && ta)
              if (auto it = ta->resolved.find(rp.name); it != ta->resolved.end()) src = &it->second;
            if (!src) continue;
            if (src->hops.empty()) {
              PropertyValue pv;
              pv.value = execute(rp.plan, *snap).rows.at(0).value(src->end_column, json(nullptr));
              const Column* c = t.find_column(src->end_column);
              pv.text = c ? p.formatted(*c, pv.value) : pv.value.dump();
              computed[rp.name] = pv;
            } else {
              computed[rp.name] = value_of_source(p, *src, execute(rp.plan, *snap), rp.plan);
            }
          } else if (rp.role == RecordPlan::Role::Relationship) {
            const Table& related = p.table(rp.plan.instances[rp.plan.entity_instance].table);
            json page = p.page(related, execute(rp.plan, *snap), rp.plan);
            page["name"] = rp.name;
            relationships.push_back(std::move(page));
          }
        }

        json base_bindings = p.bindings(t, values);
        json props = json::array();
        for (const auto& prop : tp.properties) {
          PropertyValue pv;
          if (prop.kind == PropertyKind::EntityRef && prop.fkey) {
            auto [owner, fk] = sess->model.catalog.find_fkey(*prop.fkey);
            json v = json::object();
            if (fk)
              for (const auto& c : fk->from_columns) v[c] = values.value(c, json(nullptr));
            pv.value = v;
            if (fk)
              if (auto ref = p.referenced(*fk, values)) pv.text = p.link(p.table(fk->to_table), *ref);
          } else if (auto it = computed.find(prop.name); it != computed.end()) {
            pv = it->second;
          } else {
            pv.value = values.value(prop.source.end_column, json(nullptr));
            const Column* c = t.find_column(prop.source.end_column);
            pv.text = c ? p.formatted(*c, pv.value) : "";
          }
          std::string html;
          if (prop.display) {
            json b = base_bindings;
            b["$self"] = pv.text;
            for (const auto& w : prop.wait_for)
              if (auto it = computed.find(w); it != computed.end()) b[w] = it->second.text;
            html = markdown_to_html(render_template(*prop.display, b));
          } else if (pv.list) {
            html = markdown_to_html(bullet_list(pv.items));
          } else if (prop.kind == PropertyKind::EntityRef) {
            html = markdown_to_html(pv.text);
          } else if (prop.kind == PropertyKind::Asset && pv.value.is_string()) {
            std::string label = pv.text;
            if (prop.asset_map && prop.asset_map->filename_column)
              if (auto fn = values.find(*prop.asset_map->filename_column); fn != values.end() && fn->is_string())
                label = fn->get<std::string>();
            html = markdown_to_html("[" + escape_markdown(label) + "](" + pv.value.get<std::string>() + ")");
          } else if (prop.source.end_type == ScalarType::Markdown && prop.source.hops.empty() && pv.value.is_string()) {
            html = markdown_to_html(pv.value.get<std::string>());
          } else {
            html = escape_html(pv.text);
          }
          props.push_back({{"name", prop.name},
                           {"display_name", prop.display_name},
                           {"kind", property_kind_name(prop.kind)},
                           {"value", pv.value},
                           {"rendered", html}});
        }
        json doc = p.entity(t, values);
        doc["table"] = t.ref().str();
        doc["context"] = context;
        doc["rights"] = sess->model.rights(t.ref()).to_json();
        doc["properties"] = std::move(props);
        doc["relationships"] = std::move(relationships);
        doc["plans"] = std::move(plan_list);
        res = json_response(200, doc);
      } else if (r.is("GET", {"facet"}, 4) && r.parts[3] == "values") {
        const Table& t = p.table(r.table(1));
        json facet = json_param(req, "facet");
        if (facet.is_null()) throw InvalidArgument("facet parameter is required", "facet");
        if (!facet.is_object()) facet = {{"source", facet}};
        FacetValuesRequest fr{t.ref(), facet, filters_param(req), param(req, "q") ? *param(req, "q") : "",
                              size_param(req, "limit", kFacetPageSize), size_param(req, "offset", 0)};
        QueryPlan q = compile_facet_values(view, fr);
        ResultSet rs = execute(q, *snap);
        const Table& end = p.table(q.instances[q.columns[0].instance].table);
        const Column* col = end.find_column(q.columns[0].column);
        json values = json::array();
        for (const auto& row : rs.rows)
          values.push_back({{"value", row["value"]},
                            {"formatted", row["value"].is_null() ? "No value" : p.formatted(*col, row["value"])},
                            {"count", row["count"]}});
        res = json_response(200, {{"table", t.ref().str()},
                                  {"facet", facet},
                                  {"total", rs.total},
                                  {"limit", q.limit ? json(*q.limit) : json(nullptr)},
                                  {"offset", q.offset},
                                  {"values", values}});
      } else if (r.is("GET", {"picker"}, 3)) {
        FkeyName fk{r.parts[1], r.parts[2]};
        json form = json_param(req, "form");
        PickerPlan pp = compile_picker(view, fk, form.is_null() ? json::object() : form,
                                       size_param(req, "limit", kEntityPageSize), size_param(req, "offset", 0));
        const Table& target = p.table(pp.plan.instances[0].table);
        json page = p.page(target, execute(pp.plan, *snap), pp.plan);
        json diags = json::array();
        for (const auto& d : pp.diagnostics) diags.push_back(d.to_json());
        page["fkey"] = fk.to_json();
        page["diagnostics"] = diags;
        res = json_response(200, page);
      } else if (r.is("POST", {"entity"}, 3)) {
        const Table& t = p.table(r.table(1));
        json body = json_body(req);
        std::vector<json> rows = body.is_array() ? body.get<std::vector<json>>() : std::vector<json>{body};
        for (const auto& row : rows)
          if (!row.is_object()) throw InvalidArgument("rows must be JSON objects", "body");
        json out = json::array();
        for (const auto& row : store_.insert(t.ref(), rows, client)) out.push_back(p.visible_row(t, row));
        res = json_response(201, {{"table", t.ref().str()}, {"rows", out}});
      } else if (r.is("PUT", {"entity"}, 3)) {
        const Table& t = p.table(r.table(1));
        json body = json_body(req);
        if (!body.is_object() || !body.contains("rids") || !body["rids"].is_array() || !body.contains("values") ||
            !body["values"].is_object())
          throw InvalidArgument("body must be {\"rids\": [...], \"values\": {...}}", "body");
        std::vector<std::string> rids;
        for (const auto& rid : body["rids"]) {
          if (!rid.is_string()) throw InvalidArgument("rids must be strings", "body/rids");
          rids.push_back(rid.get<std::string>());
        }
        json out = json::array();
        for (const auto& row : store_.update(t.ref(), rids, body["values"], client)) out.push_back(p.visible_row(t, row));
        res = json_response(200, {{"table", t.ref().str()}, {"rows", out}});
      } else if (r.is("DELETE", {"entity"}, 3)) {
        const Table& t = p.table(r.table(1));
        std::vector<std::string> rids;
        if (const std::string* v = param(req, "rids"))
          for (auto& rid : split(*v, ','))
            if (!trim(rid).empty()) rids.push_back(trim(rid));
        std::size_t n = store_.remove(t.ref(), rids, client);
        res = json_response(200, {{"table", t.ref().str()}, {"deleted", n}});
      } else if (r.is("DELETE", {"attribute"}, 3)) {
        const Table& t = p.table(r.table(1));
        EntitySetRequest er{t.ref(), filters_param(req), param(req, "q") ? *param(req, "q") : "", {}, SIZE_MAX, 0};
        QueryPlan q = compile_entity_set(view, er);
        q.columns = {ColumnRef{0, "RID"}};
        std::vector<std::string> rids;
        for (const auto& row : execute(q, *snap).rows) rids.push_back(row["RID"].get<std::string>());
        std::size_t n = store_.remove(t.ref(), rids, client);
        res = json_response(200, {{"table", t.ref().str()}, {"deleted", n}});
      } else if ((r.is("PUT", {"annotation"}, 1) || r.is("DELETE", {"annotation"}, 1) ||
                  r.is("POST", {"model", "change"}, 2))) {
        if (!sess->model.is_owner) throw RightsError("only catalog owners may change the model", req.path);
        json body = json_body(req);
        ModelChange change;
        if (r.parts[0] == "model") {
          change = model_change_from_json(body);
        } else {
          if (!body.is_object() || !body.contains("tag") || !body["tag"].is_string())
            throw InvalidArgument("body needs a target and a tag", "body");
          ElementRef target = element_ref_from_json(body.value("target", json(nullptr)));
          if (req.method == "PUT") {
            if (!body.contains("value")) throw InvalidArgument("body needs a value", "body");
            change = change::SetAnnotation{target, body["tag"].get<std::string>(), body["value"]};
          } else {
            change = change::DeleteAnnotation{target, body["tag"].get<std::string>()};
          }
        }
        Catalog next = apply_change(change);
        auto fresh = session(store_.catalog(), client);
        json d = json::array();
        for (const auto& diag : fresh->annotations.diagnostics) d.push_back(diag.to_json());
        res = json_response(200, {{"version", next.version}, {"diagnostics", d}});
      } else if (r.is("POST", {"assets"}, 1)) {
        if (options_.asset_dir.empty()) throw NotFound("asset storage is disabled", "/assets");
        if (client.id == "anonymous") throw RightsError("anonymous clients cannot upload", "/assets");
        std::string digest = sha256_hex(req.body);
        fs::path dest = options_.asset_dir / digest;
        if (!fs::exists(dest)) {
          fs::path tmp = dest;
          tmp += ".tmp";
          std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
          out << req.body;
          out.close();
          if (!out) throw IoError("cannot store asset", dest.string());
          fs::rename(tmp, dest);
        }
        res = json_response(201, {{"url", "/assets/" + digest}, {"sha256", digest}, {"bytes", req.body.size()}});
      } else if (r.is("GET", {"assets"}, 2)) {
        const std::string& digest = r.parts[1];
        bool hex = digest.size() == 64 && std::all_of(digest.begin(), digest.end(), [](char c) {
                     return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
                   });
        fs::path file = options_.asset_dir / digest;
        if (options_.asset_dir.empty() || !hex || !fs::exists(file)) throw NotFound("no such asset", req.path);
        std::ifstream in(file, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        res.status = 200;
        res.content_type = "application/octet-stream";
        res.body = buf.str();
      } else {
        throw NotFound("no route for " + req.method + " " + req.path, req.path);
      }
    }
  } catch (const Error& e) {
    res = json_response(http_status(e), error_body(e));
  } catch (const json::exception& e) {
    res = json_response(400, {{"code", "ParseError"}, {"message", e.what()}, {"location", ""}});
  } catch (const std::exception& e) {
    res = json_response(500, {{"code", "InternalError"}, {"message", e.what()}, {"location", ""}});
  }
  res.headers["Access-Control-Allow-Origin"] = options_.cors_origin;
  res.headers["Access-Control-Allow-Methods"] = "GET, POST, PUT, DELETE, OPTIONS";
  res.headers["Access-Control-Allow-Headers"] = "Content-Type, Authorization, X-Client-Id, X-Client-Roles";
  return res;
}

}  // namespace modeladapt
