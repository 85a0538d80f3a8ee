#include "annotation/annotation.hpp"

#include <algorithm>

#include "common/error.hpp"
#include "render/render.hpp"

namespace modeladapt {

bool is_known_tag(std::string_view tag) {
  for (const char* t : {tags::kSourceDefinitions, tags::kVisibleColumns, tags::kVisibleForeignKeys, tags::kTableDisplay,
                        tags::kColumnDisplay, tags::kAsset, tags::kRequired, tags::kForeignKey, tags::kDisplay,
                        tags::kGenerated, tags::kImmutable})
    if (tag == t) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Contexts

bool is_valid_context(std::string_view context) {
  if (context == "*") return true;
  auto valid_part = [](std::string_view p) {
    if (p.empty()) return false;
    return std::all_of(p.begin(), p.end(), [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; });
  };
  std::size_t slash = context.find('/');
  if (slash == std::string_view::npos) return valid_part(context);
  return valid_part(context.substr(0, slash)) && valid_part(context.substr(slash + 1));
}

bool is_entry_context(std::string_view context) {
  return context == "entry" || context.substr(0, 6) == "entry/";
}

std::optional<std::string> resolve_context_key(const std::vector<std::string>& keys, std::string_view requested) {
  auto has = [&](std::string_view k) { return std::find(keys.begin(), keys.end(), k) != keys.end(); };
  if (has(requested)) return std::string(requested);
  std::size_t slash = requested.find('/');
  if (slash != std::string_view::npos && has(requested.substr(0, slash))) return std::string(requested.substr(0, slash));
  if (has("*")) return std::string("*");
  return std::nullopt;
}

const json* resolve_context(const json& map, std::string_view requested) {
  if (!map.is_object()) return nullptr;
  std::vector<std::string> keys;
  for (auto it = map.begin(); it != map.end(); ++it) keys.push_back(it.key());
  auto key = resolve_context_key(keys, requested);
  return key ? &map.at(*key) : nullptr;
}

// ---------------------------------------------------------------------------
// Sources

const char* aggregate_name(Aggregate a) noexcept {
  switch (a) {
    case Aggregate::ArrayD: return "array_d";
    case Aggregate::CntD: return "cnt_d";
    case Aggregate::Cnt: return "cnt";
    case Aggregate::Min: return "min";
    case Aggregate::Max: return "max";
    case Aggregate::Sum: return "sum";
  }
  return "array_d";
}

std::optional<Aggregate> parse_aggregate(std::string_view name) noexcept {
  for (Aggregate a : {Aggregate::ArrayD, Aggregate::CntD, Aggregate::Cnt, Aggregate::Min, Aggregate::Max, Aggregate::Sum})
    if (name == aggregate_name(a)) return a;
  return std::nullopt;
}

namespace {

std::optional<FkeyName> fkey_pair(const json& j) {
  if (j.is_array() && j.size() == 2 && j[0].is_string() && j[1].is_string())
    return FkeyName{j[0].get<std::string>(), j[1].get<std::string>()};
  return std::nullopt;
}

}  // namespace

SourceSpec parse_source_path(const json& source, const std::string& location) {
  SourceSpec spec;
  if (source.is_string()) {
    spec.column = source.get<std::string>();
    return spec;
  }
  if (!source.is_array() || source.empty() || !source.back().is_string())
    throw ResolutionError("source must be a column name or a path ending in a column name", location);
  for (std::size_t i = 0; i + 1 < source.size(); ++i) {
    const json& hop = source[i];
    if (!hop.is_object() || hop.size() != 1) throw ResolutionError("malformed foreign key hop", location);
    auto it = hop.begin();
    Direction dir;
    if (it.key() == "inbound") dir = Direction::Inbound;
    else if (it.key() == "outbound") dir = Direction::Outbound;
    else throw ResolutionError("hop direction must be inbound or outbound", location);
    auto name = fkey_pair(it.value());
    if (!name) throw ResolutionError("hop must name a [schema, constraint] pair", location);
    spec.path.push_back(FkHop{dir, *name});
  }
  spec.column = source.back().get<std::string>();
  return spec;
}

SourceSpec parse_source_entry(const json& entry, const std::string& location) {
  if (!entry.is_object()) throw ResolutionError("source entry must be an object", location);
  bool has_source = entry.contains("source");
  bool has_key = entry.contains("sourcekey");
  if (has_source == has_key) throw ResolutionError("entry needs exactly one of source or sourcekey", location);
  SourceSpec spec;
  if (has_key) {
    if (!entry["sourcekey"].is_string()) throw ResolutionError("sourcekey must be a string", location);
    spec.sourcekey = entry["sourcekey"].get<std::string>();
  } else {
    spec = parse_source_path(entry["source"], location);
  }
  if (auto it = entry.find("aggregate"); it != entry.end()) {
    auto agg = it->is_string() ? parse_aggregate(it->get<std::string>()) : std::nullopt;
    if (!agg) throw ResolutionError("unknown aggregate " + it->dump(), location);
    spec.aggregate = agg;
  }
  if (auto it = entry.find("entity"); it != entry.end()) {
    if (!it->is_boolean()) throw ResolutionError("entity must be a boolean", location);
    spec.entity = it->get<bool>();
  }
  return spec;
}

json source_path_to_json(const std::vector<FkHop>& path, const std::string& column) {
  if (path.empty()) return column;
  json out = json::array();
  for (const auto& h : path)
    out.push_back({{h.direction == Direction::Inbound ? "inbound" : "outbound", h.fkey.to_json()}});
  out.push_back(column);
  return out;
}

bool ResolvedSource::same_path(const ResolvedSource& other) const {
  return base == other.base && hops == other.hops && end_column == other.end_column;
}

std::vector<FkHop> ResolvedSource::path() const {
  std::vector<FkHop> out;
  for (const auto& h : hops) out.push_back(FkHop{h.direction, h.fkey});
  return out;
}

json ResolvedSource::to_json() const {
  json hops_json = json::array();
  for (const auto& h : hops) {
    json cols = json::array();
    for (const auto& [f, t] : h.join_columns) cols.push_back({f, t});
    hops_json.push_back({{"direction", h.direction == Direction::Inbound ? "inbound" : "outbound"},
                         {"fkey_name", h.fkey.to_json()},
                         {"from_table", h.from_table.str()},
                         {"to_table", h.to_table.str()},
                         {"join_columns", cols}});
  }
  json out = {{"base_table", base.str()},
              {"hops", hops_json},
              {"end_column", end_column},
              {"end_type", scalar_type_name(end_type)},
              {"entity_mode", entity_mode},
              {"aggregate", aggregate ? json(aggregate_name(*aggregate)) : json(nullptr)},
              {"multivalued", multivalued},
              {"source", source_json()}};
  if (sourcekey) out["sourcekey"] = *sourcekey;
  return out;
}

ResolvedSource resolve_source(const RoleBasedModel& model, const Table& base, const SourceSpec& spec,
                              const SourceDefinitions* defs) {
  if (spec.sourcekey) {
    const std::string& key = *spec.sourcekey;
    if (!defs || !defs->count(key)) throw ResolutionError("unknown sourcekey '" + key + "'", key);
    const json& def = defs->at(key);
    if (def.is_object() && def.contains("sourcekey"))
      throw ResolutionError("sourcekey '" + key + "' refers to another sourcekey", key);
    SourceSpec inner = parse_source_entry(def, key);
    ResolvedSource r = resolve_source(model, base, inner, nullptr);
    r.sourcekey = key;
    return r;
  }

  ResolvedSource r;
  r.base = base.ref();
  const Table* current = &base;
  for (const auto& hop : spec.path) {
    auto [owner, fk] = model.catalog.find_fkey(hop.fkey);
    if (!fk) {
      bool hidden = model.is_hidden_fkey(hop.fkey);
      throw ResolutionError(std::string(hidden ? "foreign key hidden by policy: " : "unknown foreign key: ") + hop.fkey.str(),
                            hop.fkey.str(), hidden);
    }
    ResolvedHop rh;
    rh.direction = hop.direction;
    rh.fkey = hop.fkey;
    rh.from_table = current->ref();
    if (hop.direction == Direction::Outbound) {
      if (fk->table != current->ref())
        throw ResolutionError("outbound hop " + hop.fkey.str() + " does not leave " + current->ref().str(), hop.fkey.str());
      rh.to_table = fk->to_table;
      for (std::size_t i = 0; i < fk->from_columns.size(); ++i) rh.join_columns.emplace_back(fk->from_columns[i], fk->to_columns[i]);
    } else {
      if (fk->to_table != current->ref())
        throw ResolutionError("inbound hop " + hop.fkey.str() + " does not reference " + current->ref().str(), hop.fkey.str());
      rh.to_table = fk->table;
      for (std::size_t i = 0; i < fk->from_columns.size(); ++i) rh.join_columns.emplace_back(fk->to_columns[i], fk->from_columns[i]);
      r.multivalued = true;
    }
    current = model.catalog.find_table(rh.to_table);
    r.hops.push_back(std::move(rh));
  }
  const Column* end = current->find_column(spec.column);
  if (!end) {
    bool hidden = model.is_hidden_column(current->ref(), spec.column);
    throw ResolutionError(std::string(hidden ? "column hidden by policy: " : "unknown column: ") + current->ref().str() +
                              "/" + spec.column,
                          current->ref().str() + "/" + spec.column, hidden);
  }
  if (spec.aggregate && spec.path.empty()) throw ResolutionError("aggregate requires a foreign key path", spec.column);
  if (spec.aggregate == Aggregate::Sum && !is_numeric(end->type))
    throw ResolutionError("sum requires a numeric column", current->ref().str() + "/" + spec.column);
  r.end_column = end->name;
  r.end_type = end->type;
  r.aggregate = spec.aggregate;
  r.entity_mode = current->is_key({end->name});
  if (spec.entity == false) r.entity_mode = false;
  if (r.aggregate && *r.aggregate != Aggregate::ArrayD) r.entity_mode = false;
  return r;
}

// ---------------------------------------------------------------------------
// Facet filters

json FacetFilter::to_json() const {
  json out = source;
  if (choices) out["choices"] = *choices;
  if (range) out["range"] = {{"min", range->first}, {"max", range->second}};
  if (search) out["search"] = *search;
  return out;
}

FacetFilter facet_filter_from_json(const json& j, const std::string& location) {
  if (!j.is_object()) throw ParseError("facet filter must be an object", location);
  FacetFilter f;
  f.source = json::object();
  for (const char* k : {"source", "sourcekey", "aggregate", "entity"})
    if (j.contains(k)) f.source[k] = j[k];
  if (!f.source.contains("source") && !f.source.contains("sourcekey"))
    throw ParseError("facet filter needs a source or sourcekey", location);
  if (auto it = j.find("choices"); it != j.end()) {
    if (!it->is_array()) throw ParseError("choices must be an array", location);
    f.choices = it->get<std::vector<json>>();
  }
  if (auto it = j.find("range"); it != j.end()) {
    if (!it->is_object()) throw ParseError("range must be an object", location);
    json mn = it->value("min", json(nullptr)), mx = it->value("max", json(nullptr));
    if (mn.is_null() && mx.is_null()) throw ParseError("range needs min or max", location);
    f.range = std::make_pair(mn, mx);
  }
  if (auto it = j.find("search"); it != j.end()) {
    if (!it->is_array()) throw ParseError("search must be an array of strings", location);
    std::vector<std::string> words;
    for (const auto& w : *it) {
      if (!w.is_string()) throw ParseError("search must be an array of strings", location);
      words.push_back(w.get<std::string>());
    }
    f.search = std::move(words);
  }
  if (!f.choices && !f.range && !f.search) throw ParseError("facet filter needs choices, range or search", location);
  return f;
}

std::vector<FacetFilter> facet_filters_from_json(const json& j) {
  const json* list = &j;
  if (j.is_object() && j.contains("and")) list = &j["and"];
  if (!list->is_array()) throw ParseError("filters must be a JSON array", "filters");
  std::vector<FacetFilter> out;
  for (std::size_t i = 0; i < list->size(); ++i)
    out.push_back(facet_filter_from_json((*list)[i], "filters[" + std::to_string(i) + "]"));
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

std::string Diagnostic::line() const {
  return std::string(severity == Severity::Error ? "ERROR" : "WARNING") + " table=" + (table.empty() ? "-" : table) +
         " tag=" + (tag.empty() ? "-" : tag) + " context=" + (context.empty() ? "-" : context) +
         " idx=" + (index < 0 ? std::string("-") : std::to_string(index)) + " msg=" + message;
}

json Diagnostic::to_json() const {
  return {{"severity", severity == Severity::Error ? "error" : "warning"},
          {"table", table},
          {"tag", tag},
          {"context", context.empty() ? json(nullptr) : json(context)},
          {"index", index < 0 ? json(nullptr) : json(index)},
          {"message", message}};
}

std::size_t ValidatedAnnotations::error_count() const {
  return static_cast<std::size_t>(std::count_if(diagnostics.begin(), diagnostics.end(),
                                                [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::Error; }));
}

std::size_t ValidatedAnnotations::warning_count() const { return diagnostics.size() - error_count(); }

// ---------------------------------------------------------------------------
// Entries

namespace {

std::optional<std::string> opt_string(const json& obj, const char* key, const std::string& location) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ResolutionError(std::string(key) + " must be a string", location);
  return it->get<std::string>();
}

void check_template(const std::string& pattern, const std::string& location) {
  try {
    Template::parse(pattern);
  } catch (const ParseError& e) {
    throw ResolutionError(std::string("invalid template: ") + e.what(), location);
  }
}

ResolvedSource fkey_source(const RoleBasedModel& model, const Table& table, const FkeyName& name, bool allow_outbound,
                           bool allow_inbound, const std::string& location) {
  auto [owner, fk] = model.catalog.find_fkey(name);
  if (!fk) {
    bool hidden = model.is_hidden_fkey(name);
    throw ResolutionError(std::string(hidden ? "foreign key hidden by policy: " : "unknown foreign key: ") + name.str(),
                          location, hidden);
  }
  SourceSpec spec;
  spec.column = "RID";
  if (allow_outbound && fk->table == table.ref()) {
    spec.path.push_back({Direction::Outbound, name});
  } else if (allow_inbound && fk->to_table == table.ref()) {
    spec.path.push_back({Direction::Inbound, name});
  } else {
    throw ResolutionError("foreign key " + name.str() + " is not adjacent to " + table.ref().str() + " in the required direction",
                          location);
  }
  return resolve_source(model, table, spec, nullptr);
}

}  // namespace

ColumnEntry resolve_column_entry(const RoleBasedModel& model, const Table& table, const json& entry,
                                 const SourceDefinitions& defs, bool inbound_fkeys, const std::string& location) {
  ColumnEntry e;
  e.raw = entry;
  if (entry.is_string()) {
    if (inbound_fkeys) throw ResolutionError("relationship entries must name a foreign key or a path", location);
    SourceSpec spec;
    spec.column = entry.get<std::string>();
    e.kind = ColumnEntry::Kind::Column;
    e.source = resolve_source(model, table, spec, nullptr);
    return e;
  }
  if (auto name = fkey_pair(entry)) {
    e.kind = ColumnEntry::Kind::Fkey;
    e.fkey = *name;
    e.source = fkey_source(model, table, *name, !inbound_fkeys, true, location);
    return e;
  }
  if (!entry.is_object()) throw ResolutionError("entry must be a column name, a foreign key pair or an object", location);
  e.kind = ColumnEntry::Kind::Source;
  e.source = resolve_source(model, table, parse_source_entry(entry, location), &defs);
  // Presentation fields come from the definition, then the referencing entry.
  auto apply = [&](const json& obj) {
    if (auto v = opt_string(obj, "markdown_name", location)) e.markdown_name = v;
    if (auto v = opt_string(obj, "comment", location)) e.comment = v;
    auto it = obj.find("display");
    if (it == obj.end()) return;
    if (!it->is_object()) throw ResolutionError("display must be an object", location);
    if (auto p = opt_string(*it, "markdown_pattern", location)) {
      check_template(*p, location);
      e.markdown_pattern = p;
    }
    if (auto w = it->find("wait_for"); w != it->end()) {
      if (!w->is_array()) throw ResolutionError("wait_for must be an array", location);
      e.wait_for.clear();
      for (const auto& k : *w) {
        if (!k.is_string()) throw ResolutionError("wait_for entries must be sourcekeys", location);
        SourceSpec ws;
        ws.sourcekey = k.get<std::string>();
        resolve_source(model, table, ws, &defs);
        e.wait_for.push_back(k.get<std::string>());
      }
    }
  };
  if (e.source.sourcekey) {
    auto def = defs.find(*e.source.sourcekey);
    if (def != defs.end() && def->second.is_object()) apply(def->second);
  }
  apply(entry);
  if (inbound_fkeys && (!e.source.entity_mode || !e.source.multivalued))
    throw ResolutionError("relationship entries must be entity-mode paths with an inbound hop", location);
  return e;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

using Severity = Diagnostic::Severity;

struct Validator {
  const RoleBasedModel& model;
  ValidatedAnnotations& out;

  void diag(Severity sev, const std::string& element, const std::string& tag, const std::string& context, int index,
            const std::string& message) {
    out.diagnostics.push_back(Diagnostic{sev, element, tag, context, index, message});
  }
  void diag(const ResolutionError& e, const std::string& element, const std::string& tag, const std::string& context,
            int index) {
    diag(e.policy_hidden() ? Severity::Warning : Severity::Error, element, tag, context, index, e.what());
  }

  DisplaySpec display_spec(const json& v, const std::string& loc) {
    if (!v.is_object()) throw ResolutionError("display annotation must be an object", loc);
    DisplaySpec d;
    d.name = opt_string(v, "name", loc);
    d.markdown_name = opt_string(v, "markdown_name", loc);
    if (auto it = v.find("name_style"); it != v.end()) {
      if (!it->is_object()) throw ResolutionError("name_style must be an object", loc);
      if (auto u = it->find("underline_space"); u != it->end() && u->is_boolean()) d.underline_space = u->get<bool>();
      if (auto t = it->find("title_case"); t != it->end() && t->is_boolean()) d.title_case = t->get<bool>();
    }
    return d;
  }

  // Source definitions first: later tags resolve sourcekeys against the raw map.
  json source_definitions(const Table& table, const json& v, TableAnnotations& ta, SourceDefinitions& raw_defs) {
    const std::string el = table.ref().str();
    const char* tag = tags::kSourceDefinitions;
    json pruned = json::object();
    if (!v.is_object()) {
      diag(Severity::Error, el, tag, "", -1, "source-definitions must be an object");
      return nullptr;
    }
    for (const char* field : {"columns", "fkeys"}) {
      auto it = v.find(field);
      if (it == v.end()) continue;
      if (it->is_boolean()) {
        pruned[field] = *it;
        continue;
      }
      if (!it->is_array()) {
        diag(Severity::Error, el, tag, field, -1, std::string(field) + " must be a list or true");
        continue;
      }
      json kept = json::array();
      for (std::size_t i = 0; i < it->size(); ++i) {
        const json& item = (*it)[i];
        try {
          if (std::string(field) == "columns") {
            if (!item.is_string()) throw ResolutionError("column entries must be names", el);
            SourceSpec s;
            s.column = item.get<std::string>();
            resolve_source(model, table, s, nullptr);
          } else {
            auto name = fkey_pair(item);
            if (!name) throw ResolutionError("fkey entries must be [schema, constraint] pairs", el);
            fkey_source(model, table, *name, true, false, el);
          }
          kept.push_back(item);
        } catch (const ResolutionError& e) {
          diag(e, el, tag, field, static_cast<int>(i));
        }
      }
      pruned[field] = kept;
    }
    if (auto it = v.find("sources"); it != v.end()) {
      if (!it->is_object()) {
        diag(Severity::Error, el, tag, "sources", -1, "sources must be an object");
      } else {
        for (auto s = it->begin(); s != it->end(); ++s) raw_defs[s.key()] = s.value();
        json kept = json::object();
        for (auto s = it->begin(); s != it->end(); ++s) {
          try {
            if (s.value().is_object() && s.value().contains("sourcekey"))
              throw ResolutionError("source definitions cannot refer to other sourcekeys", s.key());
            SourceSpec spec;
            spec.sourcekey = s.key();
            ResolvedSource r = resolve_source(model, table, spec, &raw_defs);
            if (s.value().contains("display")) {
              ColumnEntry probe = resolve_column_entry(model, table, s.value(), raw_defs, false, s.key());
              (void)probe;
            }
            ta.sources[s.key()] = s.value();
            ta.resolved[s.key()] = r;
            kept[s.key()] = s.value();
          } catch (const ResolutionError& e) {
            diag(e.policy_hidden() ? Severity::Warning : Severity::Error, el, tag, "sources", -1,
                 std::string(e.what()) + " (sourcekey " + s.key() + ")");
          }
        }
        pruned["sources"] = kept;
      }
    }
    return pruned;
  }

  std::optional<FacetEntry> facet_entry(const Table& table, const json& item, const SourceDefinitions& defs,
                                        const std::string& loc) {
    ColumnEntry ce = resolve_column_entry(model, table, item, defs, false, loc);
    if (ce.source.aggregate) throw ResolutionError("facets cannot aggregate", loc);
    FacetEntry f;
    f.source = ce.source;
    f.markdown_name = ce.markdown_name;
    f.raw = item;
    if (item.is_object()) {
      f.ux_mode = opt_string(item, "ux_mode", loc);
      if (f.ux_mode && *f.ux_mode != "choices" && *f.ux_mode != "ranges" && *f.ux_mode != "search")
        throw ResolutionError("ux_mode must be choices, ranges or search", loc);
      if (auto c = item.find("choices"); c != item.end()) {
        if (!c->is_array()) throw ResolutionError("choices must be an array", loc);
        f.choices = c->get<std::vector<json>>();
      }
    }
    return f;
  }

  json visible_columns(const Table& table, const json& v, TableAnnotations& ta, const SourceDefinitions& defs,
                       bool fkeys_tag) {
    const std::string el = table.ref().str();
    const char* tag = fkeys_tag ? tags::kVisibleForeignKeys : tags::kVisibleColumns;
    if (!v.is_object()) {
      diag(Severity::Error, el, tag, "", -1, "annotation must be an object keyed by context");
      return nullptr;
    }
    json pruned = json::object();
    for (auto c = v.begin(); c != v.end(); ++c) {
      const std::string& ctx = c.key();
      if (!is_valid_context(ctx)) {
        diag(Severity::Error, el, tag, ctx, -1, "invalid context name");
        continue;
      }
      const json* list = &c.value();
      bool and_form = false;
      if (!fkeys_tag && ctx == "filter" && list->is_object() && list->contains("and")) {
        list = &(*list)["and"];
        and_form = true;
      }
      if (!list->is_array()) {
        diag(Severity::Error, el, tag, ctx, -1, "context value must be a list");
        continue;
      }
      json kept = json::array();
      for (std::size_t i = 0; i < list->size(); ++i) {
        const json& item = (*list)[i];
        const std::string loc = el + "/" + ctx + "[" + std::to_string(i) + "]";
        try {
          if (!fkeys_tag && ctx == "filter") {
            ta.facets[ctx].push_back(*facet_entry(table, item, defs, loc));
          } else if (fkeys_tag) {
            ta.visible_fkeys[ctx].push_back(resolve_column_entry(model, table, item, defs, true, loc));
          } else {
            ta.visible_columns[ctx].push_back(resolve_column_entry(model, table, item, defs, false, loc));
          }
          kept.push_back(item);
        } catch (const ResolutionError& e) {
          diag(e, el, tag, ctx, static_cast<int>(i));
        }
      }
      // A keyed context with every entry pruned is still keyed (an empty list).
      if (!fkeys_tag && ctx == "filter") ta.facets.try_emplace(ctx);
      else if (fkeys_tag) ta.visible_fkeys.try_emplace(ctx);
      else ta.visible_columns.try_emplace(ctx);
      pruned[ctx] = and_form ? json{{"and", kept}} : kept;
    }
    return pruned;
  }

  json table_display(const Table& table, const json& v, TableAnnotations& ta) {
    const std::string el = table.ref().str();
    const char* tag = tags::kTableDisplay;
    if (!v.is_object()) {
      diag(Severity::Error, el, tag, "", -1, "annotation must be an object keyed by context");
      return nullptr;
    }
    json pruned = json::object();
    for (auto c = v.begin(); c != v.end(); ++c) {
      const std::string& ctx = c.key();
      if (!is_valid_context(ctx)) {
        diag(Severity::Error, el, tag, ctx, -1, "invalid context name");
        continue;
      }
      if (!c.value().is_object()) {
        diag(Severity::Error, el, tag, ctx, -1, "context value must be an object");
        continue;
      }
      TableDisplay td;
      json kept = json::object();
      const json& body = c.value();
      if (auto p = body.find("row_markdown_pattern"); p != body.end()) {
        try {
          if (!p->is_string()) throw ResolutionError("row_markdown_pattern must be a string", el);
          check_template(p->get<std::string>(), el);
          td.row_markdown_pattern = p->get<std::string>();
          kept["row_markdown_pattern"] = *p;
        } catch (const ResolutionError& e) {
          diag(e, el, tag, ctx, -1);
        }
      }
      if (auto o = body.find("row_order"); o != body.end()) {
        if (!o->is_array()) {
          diag(Severity::Error, el, tag, ctx, -1, "row_order must be a list");
        } else {
          json order = json::array();
          for (std::size_t i = 0; i < o->size(); ++i) {
            const json& k = (*o)[i];
            SortKey sk;
            if (k.is_string()) {
              sk.column = k.get<std::string>();
            } else if (k.is_object() && k.contains("column") && k["column"].is_string()) {
              sk.column = k["column"].get<std::string>();
              sk.descending = k.value("descending", false);
            } else {
              diag(Severity::Error, el, tag, ctx, static_cast<int>(i), "sort key must be a column name or {column, descending}");
              continue;
            }
            if (!table.find_column(sk.column)) {
              bool hidden = model.is_hidden_column(table.ref(), sk.column);
              diag(hidden ? Severity::Warning : Severity::Error, el, tag, ctx, static_cast<int>(i),
                   std::string(hidden ? "sort column hidden by policy: " : "unknown sort column: ") + sk.column);
              continue;
            }
            td.row_order.push_back(sk);
            order.push_back(k);
          }
          kept["row_order"] = order;
        }
      }
      if (auto ps = body.find("page_size"); ps != body.end()) {
        if (ps->is_number_integer() && ps->get<int>() > 0) {
          td.page_size = ps->get<int>();
          kept["page_size"] = *ps;
        } else {
          diag(Severity::Error, el, tag, ctx, -1, "page_size must be a positive integer");
        }
      }
      for (auto f = body.begin(); f != body.end(); ++f)
        if (!kept.contains(f.key()) && f.key() != "row_markdown_pattern" && f.key() != "row_order" && f.key() != "page_size")
          kept[f.key()] = f.value();
      ta.table_display[ctx] = td;
      pruned[ctx] = kept;
    }
    return pruned;
  }

  void table(const Table& table) {
    const std::string el = table.ref().str();
    TableAnnotations ta;
    AnnotationMap pruned;
    SourceDefinitions raw_defs;
    const auto& anns = table.annotations;

    if (auto it = anns.find(tags::kSourceDefinitions); it != anns.end()) {
      json p = source_definitions(table, it->second, ta, raw_defs);
      if (!p.is_null()) pruned[it->first] = p;
    }
    for (const auto& [tag, value] : anns) {
      if (tag == tags::kSourceDefinitions) continue;
      if (tag == tags::kVisibleColumns || tag == tags::kVisibleForeignKeys) {
        json p = visible_columns(table, value, ta, raw_defs, tag == tags::kVisibleForeignKeys);
        if (!p.is_null()) pruned[tag] = p;
      } else if (tag == tags::kTableDisplay) {
        json p = table_display(table, value, ta);
        if (!p.is_null()) pruned[tag] = p;
      } else if (tag == tags::kDisplay) {
        try {
          ta.display = display_spec(value, el);
          pruned[tag] = value;
        } catch (const ResolutionError& e) {
          diag(e, el, tag, "", -1);
        }
      } else if (tag == tags::kGenerated || tag == tags::kImmutable) {
        (tag == tags::kGenerated ? ta.generated : ta.immutable) = true;
        pruned[tag] = value;
      } else if (is_known_tag(tag)) {
        diag(Severity::Warning, el, tag, "", -1, "annotation does not apply to tables; ignored");
      } else {
        diag(Severity::Warning, el, tag, "", -1, "unrecognized annotation retained without interpretation");
        pruned[tag] = value;
      }
    }

    Table& out_table = *out.pruned.find_table(table.ref());
    out_table.annotations = std::move(pruned);
    for (auto& col : out_table.columns) col.annotations = column(table, col, ta.columns[col.name]);
    for (auto& fk : out_table.foreign_keys) fk.annotations = fkey(table, fk, ta.fkeys[fk.name]);
    out.tables[table.ref()] = std::move(ta);
  }

  AnnotationMap column(const Table& table, const Column& col, ColumnAnnotations& ca) {
    const std::string el = table.ref().str() + "/" + col.name;
    AnnotationMap pruned;
    for (const auto& [tag, value] : col.annotations) {
      try {
        if (tag == tags::kDisplay) {
          ca.display = display_spec(value, el);
          pruned[tag] = value;
        } else if (tag == tags::kColumnDisplay) {
          if (!value.is_object()) throw ResolutionError("column-display must be an object keyed by context", el);
          json kept = json::object();
          for (auto c = value.begin(); c != value.end(); ++c) {
            try {
              if (!is_valid_context(c.key())) throw ResolutionError("invalid context name", el);
              if (!c.value().is_object()) throw ResolutionError("context value must be an object", el);
              auto pattern = opt_string(c.value(), "markdown_pattern", el);
              if (pattern) {
                check_template(*pattern, el);
                ca.column_display[c.key()] = *pattern;
              }
              kept[c.key()] = c.value();
            } catch (const ResolutionError& e) {
              diag(e, el, tag, c.key(), -1);
            }
          }
          pruned[tag] = kept;
        } else if (tag == tags::kAsset) {
          if (!value.is_object()) throw ResolutionError("asset must be an object", el);
          if (!is_textual(col.type)) throw ResolutionError("asset url column must be text", el);
          AssetSpec a;
          a.url_column = col.name;
          json kept = json::object();
          for (auto f = value.begin(); f != value.end(); ++f) {
            std::optional<std::string>* slot = nullptr;
            if (f.key() == "filename_column") slot = &a.filename_column;
            else if (f.key() == "byte_count_column") slot = &a.byte_count_column;
            else if (f.key() == "md5") slot = &a.md5_column;
            else if (f.key() == "sha256") slot = &a.sha256_column;
            if (!slot) {
              kept[f.key()] = f.value();
              continue;
            }
            if (!f.value().is_string()) {
              diag(Severity::Error, el, tag, "", -1, f.key() + " must name a column");
              continue;
            }
            std::string target = f.value().get<std::string>();
            if (!table.find_column(target)) {
              bool hidden = model.is_hidden_column(table.ref(), target);
              diag(hidden ? Severity::Warning : Severity::Error, el, tag, "", -1,
                   std::string(hidden ? "column hidden by policy: " : "unknown column: ") + target);
              continue;
            }
            *slot = target;
            kept[f.key()] = f.value();
          }
          ca.asset = a;
          pruned[tag] = kept;
        } else if (tag == tags::kRequired || tag == tags::kGenerated || tag == tags::kImmutable) {
          bool& flag = tag == tags::kRequired ? ca.required : tag == tags::kGenerated ? ca.generated : ca.immutable;
          flag = !(value.is_boolean() && !value.get<bool>());
          pruned[tag] = value;
        } else if (is_known_tag(tag)) {
          diag(Severity::Warning, el, tag, "", -1, "annotation does not apply to columns; ignored");
        } else {
          diag(Severity::Warning, el, tag, "", -1, "unrecognized annotation retained without interpretation");
          pruned[tag] = value;
        }
      } catch (const ResolutionError& e) {
        diag(e, el, tag, "", -1);
      }
    }
    return pruned;
  }

  AnnotationMap fkey(const Table& table, const ForeignKey& fk, FkeyAnnotations& fa) {
    const std::string el = fk.name.str();
    AnnotationMap pruned;
    for (const auto& [tag, value] : fk.annotations) {
      if (tag != tags::kForeignKey) {
        if (is_known_tag(tag)) {
          diag(Severity::Warning, el, tag, "", -1, "annotation does not apply to foreign keys; ignored");
        } else {
          diag(Severity::Warning, el, tag, "", -1, "unrecognized annotation retained without interpretation");
          pruned[tag] = value;
        }
        continue;
      }
      if (!value.is_object()) {
        diag(Severity::Error, el, tag, "", -1, "foreign-key annotation must be an object");
        continue;
      }
      json kept = json::object();
      for (auto f = value.begin(); f != value.end(); ++f) {
        if (f.key() == "to_name" || f.key() == "from_name") {
          if (!f.value().is_string()) {
            diag(Severity::Error, el, tag, "", -1, f.key() + " must be a string");
            continue;
          }
          (f.key() == "to_name" ? fa.to_name : fa.from_name) = f.value().get<std::string>();
          kept[f.key()] = f.value();
        } else if (f.key() == "selection_filter") {
          if (!f.value().is_array()) {
            diag(Severity::Error, el, tag, "", -1, "selection_filter must be a list");
            continue;
          }
          const Table* target = model.catalog.find_table(fk.to_table);
          json list = json::array();
          for (std::size_t i = 0; i < f.value().size(); ++i) {
            const json& item = f.value()[i];
            try {
              FacetFilter ff;
              try {
                ff = facet_filter_from_json(item, el);
              } catch (const ParseError& e) {
                throw ResolutionError(e.what(), el);
              }
              const TableAnnotations* tta = out.table(fk.to_table);
              SourceDefinitions none;
              resolve_source(model, *target, parse_source_entry(ff.source, el),
                             tta ? &tta->sources : &none);
              if (ff.choices)
                for (const auto& ch : *ff.choices)
                  if (ch.is_string()) check_template(ch.get<std::string>(), el);
              fa.selection_filter.push_back(ff);
              list.push_back(item);
            } catch (const ResolutionError& e) {
              diag(e, el, tag, "selection_filter", static_cast<int>(i));
            }
          }
          kept[f.key()] = list;
        } else {
          kept[f.key()] = f.value();
        }
      }
      pruned[tag] = kept;
    }
    (void)table;
    return pruned;
  }

  AnnotationMap element_level(const AnnotationMap& anns, const std::string& el) {
    AnnotationMap pruned;
    for (const auto& [tag, value] : anns) {
      if (tag == tags::kDisplay) {
        try {
          display_spec(value, el);
          pruned[tag] = value;
        } catch (const ResolutionError& e) {
          diag(e, el, tag, "", -1);
        }
      } else if (is_known_tag(tag)) {
        diag(Severity::Warning, el, tag, "", -1, "annotation does not apply here; ignored");
      } else {
        diag(Severity::Warning, el, tag, "", -1, "unrecognized annotation retained without interpretation");
        pruned[tag] = value;
      }
    }
    return pruned;
  }
};

}  // namespace

ValidatedAnnotations validate_annotations(const RoleBasedModel& model) {
  ValidatedAnnotations out;
  out.version = model.catalog.version;
  out.pruned = model.catalog;
  Validator v{model, out};
  out.pruned.annotations = v.element_level(model.catalog.annotations, "");
  for (auto& [sname, schema] : out.pruned.schemas) schema.annotations = v.element_level(schema.annotations, sname);
  // Two passes so selection filters can see their target table's source definitions.
  for (const Table* t : model.catalog.tables()) {
    TableAnnotations ta;
    SourceDefinitions raw;
    auto it = t->annotations.find(tags::kSourceDefinitions);
    if (it != t->annotations.end() && it->second.is_object() && it->second.contains("sources") &&
        it->second["sources"].is_object())
      for (auto s = it->second["sources"].begin(); s != it->second["sources"].end(); ++s) ta.sources[s.key()] = s.value();
    out.tables[t->ref()] = std::move(ta);
  }
  for (const Table* t : model.catalog.tables()) v.table(*t);
  return out;
}

}  // namespace modeladapt
