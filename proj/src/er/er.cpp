#include "er/er.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "common/error.hpp"

namespace modeladapt {

const char* property_kind_name(PropertyKind kind) noexcept {
  switch (kind) {
    case PropertyKind::Scalar: return "scalar";
    case PropertyKind::EntityRef: return "entity_ref";
    case PropertyKind::Pseudo: return "pseudo";
    case PropertyKind::Asset: return "asset";
  }
  return "scalar";
}

const char* facet_kind_name(FacetKind kind) noexcept {
  switch (kind) {
    case FacetKind::Choice: return "choice";
    case FacetKind::Range: return "range";
    case FacetKind::TextSearch: return "text_search";
  }
  return "choice";
}

namespace {

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json asset_json(const AssetSpec& a) {
  return {{"url", a.url_column},
          {"filename", opt(a.filename_column)},
          {"byte_count", opt(a.byte_count_column)},
          {"md5", opt(a.md5_column)},
          {"sha256", opt(a.sha256_column)}};
}

const TableAnnotations& empty_table_annotations() {
  static const TableAnnotations empty;
  return empty;
}

const ColumnAnnotations& column_annotations(const TableAnnotations& ta, const std::string& column) {
  static const ColumnAnnotations empty;
  auto it = ta.columns.find(column);
  return it == ta.columns.end() ? empty : it->second;
}

std::string styled(const std::string& name, const std::optional<DisplaySpec>& d) {
  if (d && d->markdown_name) return *d->markdown_name;
  if (d && d->name) return *d->name;
  std::string out = name;
  if (!d || d->underline_space.value_or(true)) std::replace(out.begin(), out.end(), '_', ' ');
  if (d && d->title_case.value_or(false)) {
    bool start = true;
    for (char& c : out) {
      if (start && std::isalpha(static_cast<unsigned char>(c))) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      start = c == ' ';
    }
  }
  return out;
}

struct Planner {
  const RoleBasedModel& model;
  const ValidatedAnnotations& annotations;
  const Table& table;
  const TableAnnotations& ta;
  std::string context;

  bool entry() const { return is_entry_context(context); }
  bool create() const { return context == "entry" || context == "entry/create"; }

  const TableAnnotations& annotations_of(const TableRef& ref) const {
    const TableAnnotations* a = annotations.table(ref);
    return a ? *a : empty_table_annotations();
  }

  bool disabled(const std::vector<std::string>& cols) const {
    const AccessRights& tr = model.rights(table.ref());
    for (const auto& name : cols) {
      const Column* c = table.find_column(name);
      if (!c || c->is_system) return true;
      const ColumnAnnotations& ca = column_annotations(ta, name);
      if (ca.generated || ta.generated) return true;
      const AccessRights& cr = model.rights(table.ref(), name);
      if (create()) {
        if (!tr.insert || !cr.insert) return true;
      } else {
        if (ca.immutable || ta.immutable) return true;
        if (!tr.update || !cr.update) return true;
      }
    }
    return false;
  }

  bool required(const std::vector<std::string>& cols) const {
    for (const auto& name : cols) {
      const Column* c = table.find_column(name);
      if (!c || c->is_system) continue;
      const ColumnAnnotations& ca = column_annotations(ta, name);
      if (ca.generated || ta.generated) continue;
      if (!c->nullable || ca.required) return true;
    }
    return false;
  }

  std::string column_display(const Table& t, const std::string& column) const {
    const Column* c = t.find_column(column);
    return c ? display_name(t, *c, annotations) : column;
  }

  std::string source_display(const ResolvedSource& s) const {
    const Table* end = model.find_table(s.end_table());
    if (s.hops.empty()) return column_display(table, s.end_column);
    if (s.entity_mode) return end ? display_name(*end, annotations) : s.end_table().table;
    return end ? column_display(*end, s.end_column) : s.end_column;
  }

  PropertySpec column_property(const Column& col, const ResolvedSource& source) const {
    const ColumnAnnotations& ca = column_annotations(ta, col.name);
    PropertySpec p;
    p.kind = ca.asset ? PropertyKind::Asset : PropertyKind::Scalar;
    p.name = col.name;
    p.source = source;
    p.display_name = display_name(table, col, annotations);
    p.tooltip = col.comment;
    p.input_disabled = disabled({col.name});
    p.required = required({col.name});
    if (const std::string* pattern = resolve_context(ca.column_display, context)) p.display = *pattern;
    p.asset_map = ca.asset;
    return p;
  }

  PropertySpec fkey_property(const ForeignKey& fk, const ResolvedSource& source) const {
    PropertySpec p;
    p.kind = PropertyKind::EntityRef;
    p.name = fk.name.name;
    p.source = source;
    p.fkey = fk.name;
    auto fa = ta.fkeys.find(fk.name);
    if (fa != ta.fkeys.end() && fa->second.to_name) {
      p.display_name = *fa->second.to_name;
    } else if (fk.from_columns.size() == 1) {
      p.display_name = column_display(table, fk.from_columns.front());
    } else {
      const Table* target = model.find_table(fk.to_table);
      p.display_name = target ? display_name(*target, annotations) : fk.to_table.table;
    }
    if (fk.from_columns.size() == 1) {
      const Column* c = table.find_column(fk.from_columns.front());
      if (c) p.tooltip = c->comment;
    }
    p.input_disabled = disabled(fk.from_columns);
    p.required = required(fk.from_columns);
    return p;
  }

  ResolvedSource column_source(const std::string& column) const {
    SourceSpec s;
    s.column = column;
    return resolve_source(model, table, s);
  }

  ResolvedSource fkey_source(const ForeignKey& fk, Direction dir) const {
    SourceSpec s;
    s.path.push_back({dir, fk.name});
    s.column = "RID";
    return resolve_source(model, table, s);
  }

  std::optional<PropertySpec> entry_property(const ColumnEntry& e) const {
    const ResolvedSource& s = e.source;
    if (e.kind == ColumnEntry::Kind::Column || (s.hops.empty() && !s.aggregate)) {
      const Column* col = table.find_column(s.end_column);
      if (!col) return std::nullopt;
      if (entry() && col->is_system) return std::nullopt;
      PropertySpec p = column_property(*col, s);
      if (e.markdown_name) p.display_name = *e.markdown_name;
      if (e.comment) p.tooltip = e.comment;
      if (e.markdown_pattern) p.display = e.markdown_pattern;
      return p;
    }
    bool single_outbound = s.hops.size() == 1 && s.hops[0].direction == Direction::Outbound && s.entity_mode && !s.aggregate;
    if (single_outbound) {
      auto [owner, fk] = model.catalog.find_fkey(s.hops[0].fkey);
      if (fk) {
        PropertySpec p = fkey_property(*fk, s);
        if (e.markdown_name) p.display_name = *e.markdown_name;
        if (e.comment) p.tooltip = e.comment;
        if (e.markdown_pattern) p.display = e.markdown_pattern;
        return p;
      }
    }
    if (entry()) return std::nullopt;
    PropertySpec p;
    p.kind = PropertyKind::Pseudo;
    p.source = s;
    p.name = s.sourcekey ? *s.sourcekey : e.markdown_name ? *e.markdown_name : s.source_json().dump();
    p.display_name = e.markdown_name ? *e.markdown_name : source_display(s);
    p.tooltip = e.comment;
    p.input_disabled = true;
    p.display = e.markdown_pattern;
    p.wait_for = e.wait_for;
    return p;
  }

  std::vector<PropertySpec> heuristic_properties(bool include_system) const {
    std::vector<PropertySpec> out;
    std::vector<std::string> consumed;
    auto is_consumed = [&](const std::string& c) { return std::find(consumed.begin(), consumed.end(), c) != consumed.end(); };
    // Each outbound fkey is anchored at its first constituent column not claimed by an earlier fkey.
    std::map<std::string, const ForeignKey*> anchors;
    std::vector<std::string> claimed;
    for (const auto& fk : table.foreign_keys) {
      std::vector<std::string> cols;
      for (const auto& c : table.columns)
        if (std::find(fk.from_columns.begin(), fk.from_columns.end(), c.name) != fk.from_columns.end() && !c.is_system)
          cols.push_back(c.name);
      auto free = std::find_if(cols.begin(), cols.end(), [&](const std::string& c) {
        return std::find(claimed.begin(), claimed.end(), c) == claimed.end();
      });
      if (free == cols.end()) continue;
      anchors[*free] = &fk;
      claimed.insert(claimed.end(), cols.begin(), cols.end());
    }
    for (const auto& col : table.columns) {
      if (col.is_system) continue;
      auto a = anchors.find(col.name);
      if (a != anchors.end()) {
        out.push_back(fkey_property(*a->second, fkey_source(*a->second, Direction::Outbound)));
        for (const auto& c : a->second->from_columns) consumed.push_back(c);
        continue;
      }
      if (is_consumed(col.name) || std::find(claimed.begin(), claimed.end(), col.name) != claimed.end()) continue;
      out.push_back(column_property(col, column_source(col.name)));
    }
    if (include_system)
      for (auto sys : kSystemColumns)
        if (const Column* c = table.find_column(sys)) out.push_back(column_property(*c, column_source(c->name)));
    return out;
  }

  std::optional<Association> association_for(const ForeignKey& fk) const {
    const Table* middle = model.find_table(fk.table);
    if (!middle || middle->foreign_keys.size() != 2) return std::nullopt;
    std::set<std::string> user_cols, fk_cols;
    for (const auto& c : middle->columns)
      if (!c.is_system) user_cols.insert(c.name);
    for (const auto& f : middle->foreign_keys) fk_cols.insert(f.from_columns.begin(), f.from_columns.end());
    if (user_cols != fk_cols) return std::nullopt;
    const ForeignKey& other = middle->foreign_keys[0].name == fk.name ? middle->foreign_keys[1] : middle->foreign_keys[0];
    if (other.name == fk.name) return std::nullopt;
    return Association{middle->ref(), fk.name, other.name, other.to_table};
  }

  RelationshipSpec fkey_relationship(const ForeignKey& fk) const {
    RelationshipSpec r;
    r.fkey = fk.name;
    r.association = association_for(fk);
    const TableAnnotations& owner_ta = annotations_of(fk.table);
    auto fa = owner_ta.fkeys.find(fk.name);
    if (r.association) {
      SourceSpec s;
      s.path = {{Direction::Inbound, fk.name}, {Direction::Outbound, r.association->outbound}};
      s.column = "RID";
      r.via = resolve_source(model, table, s);
      const Table* far = model.find_table(r.association->far_table);
      r.name = far ? display_name(*far, annotations) : r.association->far_table.table;
    } else {
      r.via = fkey_source(fk, Direction::Inbound);
      const Table* owner = model.find_table(fk.table);
      r.name = owner ? display_name(*owner, annotations) : fk.table.table;
    }
    if (fa != owner_ta.fkeys.end() && fa->second.from_name) r.name = *fa->second.from_name;
    return r;
  }

  std::vector<RelationshipSpec> default_relationships() const {
    std::vector<RelationshipSpec> out;
    for (const ForeignKey* fk : model.catalog.inbound_fkeys(table.ref())) out.push_back(fkey_relationship(*fk));
    return out;
  }

  FacetKind facet_kind(const ResolvedSource& s, const std::optional<std::string>& ux_mode) const {
    if (ux_mode == "ranges" && (is_numeric(s.end_type) || is_temporal(s.end_type))) return FacetKind::Range;
    if (ux_mode == "search") return FacetKind::TextSearch;
    if (ux_mode == "choices") return FacetKind::Choice;
    if (s.entity_mode) return FacetKind::Choice;
    if (is_numeric(s.end_type) || is_temporal(s.end_type)) return FacetKind::Range;
    if (s.end_type == ScalarType::Markdown) return FacetKind::TextSearch;
    return FacetKind::Choice;
  }

  TablePlan build() const {
    TablePlan p;
    p.table = table.ref();
    p.context = context;
    p.display_name = display_name(table, annotations);
    p.rights = model.rights(table.ref());

    if (const auto* entries = resolve_context(ta.visible_columns, context)) {
      for (const auto& e : *entries)
        if (auto prop = entry_property(e)) p.properties.push_back(std::move(*prop));
    } else {
      p.properties = heuristic_properties(!entry());
    }

    if (context == "detailed") {
      if (const auto* entries = resolve_context(ta.visible_fkeys, context)) {
        for (const auto& e : *entries) {
          if (e.kind == ColumnEntry::Kind::Fkey) {
            auto [owner, fk] = model.catalog.find_fkey(*e.fkey);
            if (fk) {
              p.relationships.push_back(fkey_relationship(*fk));
              continue;
            }
          }
          RelationshipSpec r;
          r.via = e.source;
          r.name = e.markdown_name ? *e.markdown_name : source_display(e.source);
          p.relationships.push_back(std::move(r));
        }
      } else {
        p.relationships = default_relationships();
      }
    }

    if (context == "filter") {
      auto it = ta.facets.find("filter");
      if (it != ta.facets.end()) {
        for (const auto& f : it->second) {
          FacetSpec fs;
          fs.source = f.source;
          fs.display_name = f.markdown_name ? *f.markdown_name : source_display(f.source);
          fs.kind = facet_kind(f.source, f.ux_mode);
          fs.preselected = f.choices;
          p.facets.push_back(std::move(fs));
        }
      } else {
        Planner detailed = *this;
        detailed.context = "detailed";
        for (const auto& prop : detailed.heuristic_properties(true))
          p.facets.push_back(FacetSpec{prop.source, prop.display_name, facet_kind(prop.source, std::nullopt), {}});
        for (const auto& rel : detailed.default_relationships())
          p.facets.push_back(FacetSpec{rel.via, rel.name, facet_kind(rel.via, std::nullopt), {}});
      }
    }

    p.row_name = row_name_template(table, annotations);
    const TableDisplay* td = resolve_context(ta.table_display, context);
    if (td && !td->row_order.empty()) p.sort = td->row_order;
    else p.sort = default_sort(table);
    if (td) p.page_size = td->page_size;
    return p;
  }
};

}  // namespace

json PropertySpec::to_json() const {
  return {{"kind", property_kind_name(kind)},
          {"name", name},
          {"source", source.to_json()},
          {"display_name", display_name},
          {"tooltip", opt(tooltip)},
          {"input_disabled", input_disabled},
          {"required", required},
          {"display", display ? json{{"markdown_pattern", *display}} : json(nullptr)},
          {"asset_map", asset_map ? asset_json(*asset_map) : json(nullptr)},
          {"fkey", fkey ? fkey->to_json() : json(nullptr)},
          {"wait_for", wait_for}};
}

json RelationshipSpec::to_json() const {
  json assoc = nullptr;
  if (association)
    assoc = {{"table", association->table.str()},
             {"inbound", association->inbound.to_json()},
             {"outbound", association->outbound.to_json()},
             {"far_table", association->far_table.str()}};
  return {{"name", name}, {"via", via.to_json()}, {"fkey", fkey ? fkey->to_json() : json(nullptr)}, {"association", assoc}};
}

json FacetSpec::to_json() const {
  return {{"source", source.to_json()},
          {"display_name", display_name},
          {"kind", facet_kind_name(kind)},
          {"preselected", preselected}};
}

json TablePlan::to_json() const {
  json props = json::array(), rels = json::array(), facets_json = json::array(), sort_json = json::array();
  for (const auto& p : properties) props.push_back(p.to_json());
  for (const auto& r : relationships) rels.push_back(r.to_json());
  for (const auto& f : facets) facets_json.push_back(f.to_json());
  for (const auto& s : sort) sort_json.push_back({{"column", s.column}, {"descending", s.descending}});
  return {{"table", table.str()},
          {"context", context},
          {"display_name", display_name},
          {"properties", props},
          {"relationships", rels},
          {"facets", facets_json},
          {"row_name", row_name},
          {"sort", sort_json},
          {"page_size", page_size ? json(*page_size) : json(nullptr)},
          {"rights", rights.to_json()}};
}

std::string display_name(const Table& table, const ValidatedAnnotations& annotations) {
  const TableAnnotations* ta = annotations.table(table.ref());
  return styled(table.name, ta ? ta->display : std::nullopt);
}

std::string display_name(const Table& table, const Column& column, const ValidatedAnnotations& annotations) {
  const TableAnnotations* ta = annotations.table(table.ref());
  std::optional<DisplaySpec> d;
  if (ta) d = column_annotations(*ta, column.name).display;
  return styled(column.name, d);
}

std::string row_name_template(const Table& table, const ValidatedAnnotations& annotations) {
  if (const TableAnnotations* ta = annotations.table(table.ref())) {
    const TableDisplay* td = resolve_context(ta->table_display, "row_name");
    if (td && td->row_markdown_pattern) return *td->row_markdown_pattern;
  }
  for (const char* candidate : {"title", "name", "accession_number"}) {
    for (const auto& c : table.columns) {
      std::string lower = c.name;
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      if (lower == candidate) return "{{{" + c.name + "}}}";
    }
  }
  std::string out;
  for (const auto& s : default_sort(table)) {
    if (!out.empty()) out += ":";
    out += "{{{" + s.column + "}}}";
  }
  return out;
}

std::vector<SortKey> default_sort(const Table& table) {
  const Key* best = nullptr;
  for (const auto& k : table.keys)
    if (!best || k.columns.size() < best->columns.size()) best = &k;
  std::vector<SortKey> out;
  if (!best) return {{"RID", false}};
  for (const auto& c : best->columns) out.push_back({c, false});
  return out;
}

TablePlan plan(const TableRef& ref, std::string_view context, const RoleBasedModel& model,
               const ValidatedAnnotations& annotations) {
  const Table* table = model.find_table(ref);
  if (!table) throw PlanError("table not visible: " + ref.str(), ref.str());
  if (!is_valid_context(context) || context == "*") throw PlanError("invalid context '" + std::string(context) + "'", ref.str());
  const TableAnnotations* ta = annotations.table(ref);
  Planner planner{model, annotations, *table, ta ? *ta : empty_table_annotations(), std::string(context)};
  return planner.build();
}

}  // namespace modeladapt
