#include "query/compile.hpp"

#include <algorithm>

#include "common/error.hpp"
#include "render/render.hpp"

namespace modeladapt {

const char* record_role_name(RecordPlan::Role role) noexcept {
  switch (role) {
    case RecordPlan::Role::Core: return "core";
    case RecordPlan::Role::Property: return "property";
    case RecordPlan::Role::Dependency: return "dependency";
    case RecordPlan::Role::Relationship: return "relationship";
  }
  return "core";
}

namespace {

const Table& visible_table(const ModelView& view, const TableRef& ref) {
  const Table* t = view.model.find_table(ref);
  if (!t) throw NotFound("no such table", ref.str());
  return *t;
}

const SourceDefinitions* definitions(const ModelView& view, const TableRef& ref) {
  const TableAnnotations* ta = view.annotations.table(ref);
  return ta ? &ta->sources : nullptr;
}

// Columns whose values the client may read, in table order.
std::vector<std::string> readable_columns(const ModelView& view, const Table& table) {
  std::vector<std::string> out;
  for (const auto& c : table.columns)
    if (view.model.rights(table.ref(), c.name).select) out.push_back(c.name);
  return out;
}

std::vector<ColumnRef> column_refs(std::size_t instance, const std::vector<std::string>& names) {
  std::vector<ColumnRef> out;
  for (const auto& n : names) out.push_back(ColumnRef{instance, n});
  return out;
}

ResolvedSource resolve_filter_source(const ModelView& view, const Table& table, const json& source,
                                     const std::string& location) {
  try {
    return resolve_source(view.model, table, parse_source_entry(source, location), definitions(view, table.ref()));
  } catch (const ResolutionError& e) {
    throw PlanError(std::string("facet source: ") + e.what(), location);
  } catch (const ParseError& e) {
    throw PlanError(std::string("facet source: ") + e.what(), location);
  }
}

void require_facet(const TablePlan& filter_plan, const ResolvedSource& source, const std::string& location) {
  if (source.aggregate) throw PlanError("facets cannot aggregate", location);
  bool known = std::any_of(filter_plan.facets.begin(), filter_plan.facets.end(),
                           [&](const FacetSpec& f) { return f.source.same_path(source); });
  if (!known) throw PlanError("filter does not target a facet of this table", location);
}

Value typed(const json& j, const ResolvedSource& source, const std::string& location) {
  try {
    return value_from_json(j, source.end_type, location);
  } catch (const Error& e) {
    throw PlanError(std::string("facet value: ") + e.what(), location);
  }
}

// Conditions for one filter at instance `at`. An empty choice list selects nothing and adds no condition.
std::vector<Condition> filter_conditions(const FacetFilter& f, const ResolvedSource& source, std::size_t at,
                                         const std::string& location) {
  std::vector<Condition> out;
  if (f.choices && !f.choices->empty()) {
    Condition c;
    Predicate in{at, source.end_column, PredicateOp::In, {}};
    for (const auto& ch : *f.choices) {
      if (ch.is_null()) c.any.push_back(Predicate{at, source.end_column, PredicateOp::IsNull, {}});
      else in.values.push_back(typed(ch, source, location));
    }
    if (!in.values.empty()) c.any.push_back(std::move(in));
    out.push_back(std::move(c));
  }
  if (f.range) {
    Value lo = f.range->first.is_null() ? Value{} : typed(f.range->first, source, location);
    Value hi = f.range->second.is_null() ? Value{} : typed(f.range->second, source, location);
    out.push_back(Condition{{Predicate{at, source.end_column, PredicateOp::Between, {lo, hi}}}});
  }
  if (f.search && !f.search->empty()) {
    Condition c;
    for (const auto& s : *f.search) c.any.push_back(Predicate{at, source.end_column, PredicateOp::ILike, {Value{s}}});
    out.push_back(std::move(c));
  }
  return out;
}

struct FilterSet {
  const Table* table = nullptr;
  std::vector<std::pair<FacetFilter, ResolvedSource>> filters;
};

FilterSet resolve_filters(const ModelView& view, const Table& table, const std::vector<FacetFilter>& filters,
                          bool require_facets) {
  FilterSet out{&table, {}};
  std::optional<TablePlan> filter_plan;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const std::string loc = table.ref().str() + "/filters/" + std::to_string(i);
    ResolvedSource s = resolve_filter_source(view, table, filters[i].source, loc);
    if (require_facets) {
      if (!filter_plan) filter_plan = plan(table.ref(), "filter", view.model, view.annotations);
      require_facet(*filter_plan, s, loc);
    } else if (s.aggregate) {
      throw PlanError("filters cannot aggregate", loc);
    }
    out.filters.emplace_back(filters[i], std::move(s));
  }
  return out;
}

// Base instance with the client's row predicate, filters, and text search.
QueryPlan filtered_base(const ModelView& view, const FilterSet& fs, const std::string& search) {
  const Table& table = *fs.table;
  QueryPlan q;
  q.add_instance(table.ref(), view.model.row_predicate(table.ref()));
  for (std::size_t i = 0; i < fs.filters.size(); ++i) {
    const auto& [f, source] = fs.filters[i];
    std::size_t end = q.add_path(source, 0, view.model);
    for (auto& c : filter_conditions(f, source, end, table.ref().str() + "/filters/" + std::to_string(i)))
      q.conditions.push_back(std::move(c));
  }
  std::string needle = search;
  needle.erase(0, needle.find_first_not_of(" \t\r\n"));
  needle.erase(needle.find_last_not_of(" \t\r\n") + 1);
  if (!needle.empty()) {
    Condition c;
    for (const auto& col : table.columns)
      if (is_textual(col.type) && view.model.rights(table.ref(), col.name).select)
        c.any.push_back(Predicate{0, col.name, PredicateOp::ILike, {Value{needle}}});
    // No searchable column: nothing can match.
    if (c.any.empty()) c.any.push_back(Predicate{0, "RID", PredicateOp::In, {}});
    q.conditions.push_back(std::move(c));
  }
  return q;
}

std::vector<SortKey> checked_sort(const ModelView& view, const Table& table, std::vector<SortKey> sort) {
  if (sort.empty()) sort = plan(table.ref(), "compact", view.model, view.annotations).sort;
  for (const auto& k : sort)
    if (!table.find_column(k.column) || !view.model.rights(table.ref(), k.column).select)
      throw PlanError("cannot sort by " + k.column, table.ref().str());
  return sort;
}

QueryPlan entity_set(const ModelView& view, const FilterSet& fs, const std::string& search,
                     std::vector<SortKey> sort, std::size_t limit, std::size_t offset) {
  QueryPlan q = filtered_base(view, fs, search);
  q.projection = Projection::Entity;
  q.entity_instance = 0;
  q.columns = column_refs(0, readable_columns(view, *fs.table));
  q.sort = checked_sort(view, *fs.table, std::move(sort));
  q.limit = limit;
  q.offset = offset;
  return q;
}

// Base row selected by RID under the client's row predicate.
QueryPlan record_base(const ModelView& view, const Table& table, const std::string& rid) {
  QueryPlan q;
  q.add_instance(table.ref(), view.model.row_predicate(table.ref()));
  q.conditions.push_back(Condition{{Predicate{0, "RID", PredicateOp::Eq, {Value{rid}}}}});
  return q;
}

// One plan for the values a source contributes to a record.
QueryPlan source_plan(const ModelView& view, const Table& table, const std::string& rid,
                      const ResolvedSource& source) {
  QueryPlan q = record_base(view, table, rid);
  std::size_t end = q.add_path(source, 0, view.model);
  const Table& end_table = visible_table(view, source.end_table());
  if (source.aggregate) {
    q.projection = Projection::Aggregate;
    q.aggregate = source.aggregate;
    q.columns = {ColumnRef{end, source.end_column}};
    q.group_by_base = true;
    if (source.entity_mode && *source.aggregate == Aggregate::ArrayD) {
      q.aggregate_entities = true;
      q.entity_columns = readable_columns(view, end_table);
    }
    return q;
  }
  q.projection = Projection::Entity;
  q.entity_instance = end;
  q.columns = column_refs(end, source.entity_mode ? readable_columns(view, end_table)
                                                  : std::vector<std::string>{"RID", source.end_column});
  q.sort = {SortKey{source.end_column, false}};
  q.limit = kRelatedPageSize;
  return q;
}

}  // namespace

QueryPlan compile_entity_set(const ModelView& view, const EntitySetRequest& request) {
  const Table& table = visible_table(view, request.table);
  FilterSet fs = resolve_filters(view, table, request.filters, true);
  return entity_set(view, fs, request.search, request.sort, request.limit, request.offset);
}

QueryPlan compile_facet_values(const ModelView& view, const FacetValuesRequest& request) {
  const Table& table = visible_table(view, request.table);
  const std::string loc = table.ref().str() + "/facet";
  ResolvedSource target = resolve_filter_source(view, table, request.facet, loc);
  require_facet(plan(table.ref(), "filter", view.model, view.annotations), target, loc);

  FilterSet all = resolve_filters(view, table, request.filters, true);
  FilterSet others{&table, {}};
  for (auto& f : all.filters)
    if (!f.second.same_path(target)) others.filters.push_back(std::move(f));

  QueryPlan q = filtered_base(view, others, request.search);
  std::size_t end = q.add_path(target, 0, view.model);
  q.projection = Projection::ValueCounts;
  q.columns = {ColumnRef{end, target.end_column}};
  q.limit = request.limit;
  q.offset = request.offset;
  return q;
}

std::vector<RecordPlan> compile_record(const ModelView& view, const TableRef& ref, const std::string& rid,
                                       const std::string& context) {
  const Table& table = visible_table(view, ref);
  if (!decode_rid(rid)) throw InvalidArgument("malformed RID " + rid, ref.str());
  TablePlan tp = plan(ref, context, view.model, view.annotations);

  std::vector<RecordPlan> out;
  QueryPlan core = record_base(view, table, rid);
  core.columns = column_refs(0, readable_columns(view, table));
  core.limit = 1;
  out.push_back(RecordPlan{RecordPlan::Role::Core, "", std::move(core)});

  std::set<std::string> planned;
  for (const auto& p : tp.properties) {
    // Scalars and entity references are served by the core row.
    if (p.kind != PropertyKind::Pseudo || p.source.hops.empty()) continue;
    out.push_back(RecordPlan{RecordPlan::Role::Property, p.name, source_plan(view, table, rid, p.source)});
    planned.insert(p.name);
  }
  const TableAnnotations* ta = view.annotations.table(ref);
  for (const auto& p : tp.properties)
    for (const auto& key : p.wait_for) {
      if (planned.count(key) || !ta) continue;
      auto it = ta->resolved.find(key);
      if (it == ta->resolved.end()) continue;
      QueryPlan q = it->second.hops.empty() ? record_base(view, table, rid) : source_plan(view, table, rid, it->second);
      if (it->second.hops.empty()) {
        q.columns = {ColumnRef{0, it->second.end_column}};
        q.limit = 1;
      }
      out.push_back(RecordPlan{RecordPlan::Role::Dependency, key, std::move(q)});
      planned.insert(key);
    }
  for (const auto& r : tp.relationships) {
    QueryPlan q = record_base(view, table, rid);
    std::size_t end = q.add_path(r.via, 0, view.model);
    const Table& related = visible_table(view, r.via.end_table());
    q.projection = Projection::Entity;
    q.entity_instance = end;
    q.columns = column_refs(end, readable_columns(view, related));
    q.sort = checked_sort(view, related, {});
    q.limit = kRelatedPageSize;
    out.push_back(RecordPlan{RecordPlan::Role::Relationship, r.name, std::move(q)});
  }
  return out;
}

PickerPlan compile_picker(const ModelView& view, const FkeyName& fkey, const json& form, std::size_t limit,
                          std::size_t offset) {
  auto [owner, fk] = view.model.catalog.find_fkey(fkey);
  if (!fk) throw PlanError("no such foreign key", fkey.str());
  const Table& target = visible_table(view, fk->to_table);

  PickerPlan out;
  for (const auto& d : view.annotations.diagnostics)
    if (d.table == fkey.str() && d.context == "selection_filter") out.diagnostics.push_back(d);

  std::vector<FacetFilter> filters;
  if (const TableAnnotations* ta = view.annotations.table(owner->ref())) {
    auto it = ta->fkeys.find(fkey);
    if (it != ta->fkeys.end()) filters = it->second.selection_filter;
  }
  const json bindings = form.is_object() ? form : json::object();
  for (auto& f : filters) {
    if (!f.choices) continue;
    for (auto& ch : *f.choices)
      if (ch.is_string() && ch.get<std::string>().find("{{") != std::string::npos)
        ch = render_template(ch.get<std::string>(), bindings);
  }
  FilterSet fs = resolve_filters(view, target, filters, false);
  out.plan = entity_set(view, fs, "", {}, limit, offset);
  return out;
}

}  // namespace modeladapt
