#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "common/error.hpp"
#include "storage/query.hpp"

namespace modeladapt {

namespace {

using Tuple = std::vector<const Row*>;

const char* op_name(PredicateOp op) {
  switch (op) {
    case PredicateOp::Eq: return "=";
    case PredicateOp::In: return "in";
    case PredicateOp::Between: return "between";
    case PredicateOp::ILike: return "ilike";
    case PredicateOp::IsNull: return "is_null";
  }
  return "=";
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

const Value& cell(const Row& row, const std::string& column) {
  static const Value null;
  auto it = row.find(column);
  return it == row.end() ? null : it->second;
}

std::string join_key(const Row& row, const std::vector<std::string>& cols, bool& has_null) {
  std::string key;
  has_null = false;
  for (const auto& c : cols) {
    const Value& v = cell(row, c);
    if (v.is_null()) {
      has_null = true;
      return {};
    }
    key += v.key();
    key += '\x1f';
  }
  return key;
}

// Nulls last in both directions; RID compares by creation order.
int compare_for_sort(const std::string& column, const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return a.is_null() == b.is_null() ? 0 : (a.is_null() ? 1 : -1);
  if (column == "RID" && a.is_text() && b.is_text()) {
    if (a.text() == b.text()) return 0;
    return rid_less(a.text(), b.text()) ? -1 : 1;
  }
  auto c = compare(a, b);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

bool row_order_less(const Row& a, const Row& b, const std::vector<SortKey>& sort) {
  for (const auto& k : sort) {
    const Value& va = cell(a, k.column);
    const Value& vb = cell(b, k.column);
    if (va.is_null() != vb.is_null()) return vb.is_null();
    int c = compare_for_sort(k.column, va, vb);
    if (c != 0) return k.descending ? c > 0 : c < 0;
  }
  return compare_for_sort("RID", cell(a, "RID"), cell(b, "RID")) < 0;
}

json entity_json(const Row& row, const std::vector<std::string>& columns) {
  json out = json::object();
  for (const auto& c : columns) out[c] = value_to_json(cell(row, c));
  return out;
}

json aggregate_values(Aggregate agg, const std::vector<const Value*>& bag) {
  std::vector<Value> present;
  for (const Value* v : bag)
    if (!v->is_null()) present.push_back(*v);
  switch (agg) {
    case Aggregate::Cnt: return present.size();
    case Aggregate::CntD:
    case Aggregate::ArrayD: {
      std::sort(present.begin(), present.end());
      present.erase(std::unique(present.begin(), present.end()), present.end());
      if (agg == Aggregate::CntD) return present.size();
      json arr = json::array();
      for (const auto& v : present) arr.push_back(value_to_json(v));
      return arr;
    }
    case Aggregate::Min:
    case Aggregate::Max: {
      if (present.empty()) return nullptr;
      auto it = agg == Aggregate::Min ? std::min_element(present.begin(), present.end())
                                      : std::max_element(present.begin(), present.end());
      return value_to_json(*it);
    }
    case Aggregate::Sum: {
      if (present.empty()) return nullptr;
      bool all_int = std::all_of(present.begin(), present.end(), [](const Value& v) { return v.is_int(); });
      if (all_int) {
        std::int64_t s = 0;
        for (const auto& v : present) s += v.integer();
        return s;
      }
      double s = 0;
      for (const auto& v : present) s += v.as_double();
      return s;
    }
  }
  return nullptr;
}

class Executor {
 public:
  Executor(const QueryPlan& plan, const Snapshot& snap) : plan_(plan), snap_(snap) {}

  ResultSet run() {
    validate();
    candidates();
    join();
    filter_tuples();
    switch (plan_.projection) {
      case Projection::Entity: return entities();
      case Projection::Aggregate: return aggregates();
      case Projection::ValueCounts: return value_counts();
    }
    return {};
  }

 private:
  const Table& table_of(std::size_t instance) const { return *tables_[instance]; }

  void validate() {
    if (plan_.instances.empty()) throw PlanError("plan has no base instance");
    if (plan_.joins.size() + 1 != plan_.instances.size())
      throw PlanError("each instance after the base must be introduced by exactly one join");
    for (const auto& inst : plan_.instances) {
      const Table* t = snap_.catalog->find_table(inst.table);
      if (!t) throw PlanError("unknown table " + inst.table.str(), inst.table.str());
      tables_.push_back(t);
    }
    for (std::size_t j = 0; j < plan_.joins.size(); ++j) {
      const PlanJoin& join = plan_.joins[j];
      if (join.from > j) throw PlanError("join references a later instance");
      if (plan_.instances[join.from].table != join.hop.from_table || plan_.instances[j + 1].table != join.hop.to_table)
        throw PlanError("join hop does not connect its instances", join.hop.fkey.str());
      for (const auto& [f, t] : join.hop.join_columns)
        if (!table_of(join.from).find_column(f) || !table_of(j + 1).find_column(t))
          throw PlanError("join column missing", join.hop.fkey.str());
    }
    auto check_col = [&](std::size_t inst, const std::string& col) {
      if (inst >= tables_.size()) throw PlanError("instance out of range");
      if (!table_of(inst).find_column(col)) throw PlanError("unknown column " + col, table_of(inst).ref().str());
    };
    for (const auto& c : plan_.conditions)
      for (const auto& p : c.any) check_col(p.instance, p.column);
    for (const auto& c : plan_.columns) check_col(c.instance, c.column);
    if (plan_.aggregate_entities && !plan_.columns.empty())
      for (const auto& c : plan_.entity_columns) check_col(plan_.columns[0].instance, c);
    if (plan_.entity_instance >= tables_.size()) throw PlanError("entity instance out of range");
    if (plan_.projection == Projection::Entity)
      for (const auto& k : plan_.sort) check_col(plan_.entity_instance, k.column);
    if (plan_.projection != Projection::Entity && plan_.columns.size() != 1)
      throw PlanError("aggregates take exactly one projection target");
    if (plan_.projection == Projection::Aggregate && !plan_.aggregate) throw PlanError("aggregate function missing");
  }

  // Conditions confined to one instance are applied while scanning it.
  void candidates() {
    std::vector<std::vector<const Condition*>> local(tables_.size());
    for (const auto& c : plan_.conditions) {
      std::set<std::size_t> touched;
      for (const auto& p : c.any) touched.insert(p.instance);
      if (touched.size() == 1) local[*touched.begin()].push_back(&c);
      else deferred_.push_back(&c);
    }
    for (std::size_t i = 0; i < tables_.size(); ++i) {
      std::vector<const Row*> rows;
      for (const auto& row : snap_.data(plan_.instances[i].table).rows) {
        if (!row_visible(row, plan_.instances[i].policy)) continue;
        bool ok = std::all_of(local[i].begin(), local[i].end(), [&](const Condition* c) {
          return std::any_of(c->any.begin(), c->any.end(),
                             [&](const Predicate& p) { return predicate_matches(p, cell(row, p.column)); });
        });
        if (ok) rows.push_back(&row);
      }
      candidates_.push_back(std::move(rows));
    }
    base_rows_ = candidates_[0];
  }

  void join() {
    for (const Row* r : candidates_[0]) tuples_.push_back(Tuple{r});
    for (std::size_t j = 0; j < plan_.joins.size(); ++j) {
      const PlanJoin& join = plan_.joins[j];
      std::vector<std::string> from_cols, to_cols;
      for (const auto& [f, t] : join.hop.join_columns) {
        from_cols.push_back(f);
        to_cols.push_back(t);
      }
      std::unordered_map<std::string, std::vector<const Row*>> index;
      for (const Row* r : candidates_[j + 1]) {
        bool has_null;
        std::string k = join_key(*r, to_cols, has_null);
        if (!has_null) index[k].push_back(r);
      }
      std::vector<Tuple> next;
      for (const auto& t : tuples_) {
        bool has_null;
        std::string k = join_key(*t[join.from], from_cols, has_null);
        if (has_null) continue;
        auto it = index.find(k);
        if (it == index.end()) continue;
        for (const Row* r : it->second) {
          Tuple extended = t;
          extended.push_back(r);
          next.push_back(std::move(extended));
        }
      }
      tuples_ = std::move(next);
    }
  }

  void filter_tuples() {
    if (deferred_.empty()) return;
    std::vector<Tuple> kept;
    for (auto& t : tuples_) {
      bool ok = std::all_of(deferred_.begin(), deferred_.end(), [&](const Condition* c) {
        return std::any_of(c->any.begin(), c->any.end(),
                           [&](const Predicate& p) { return predicate_matches(p, cell(*t[p.instance], p.column)); });
      });
      if (ok) kept.push_back(std::move(t));
    }
    tuples_ = std::move(kept);
  }

  std::vector<std::string> output_columns(std::size_t instance) const {
    std::vector<std::string> cols;
    if (plan_.projection == Projection::Entity && !plan_.columns.empty()) {
      for (const auto& c : plan_.columns) cols.push_back(c.column);
    } else if (plan_.projection == Projection::Aggregate && !plan_.entity_columns.empty()) {
      cols = plan_.entity_columns;
    } else {
      for (const auto& c : table_of(instance).columns) cols.push_back(c.name);
    }
    return cols;
  }

  template <class T>
  std::vector<T> page(std::vector<T> items) const {
    std::size_t begin = std::min(plan_.offset, items.size());
    std::size_t end = plan_.limit ? std::min(items.size(), begin + *plan_.limit) : items.size();
    return std::vector<T>(items.begin() + static_cast<std::ptrdiff_t>(begin), items.begin() + static_cast<std::ptrdiff_t>(end));
  }

  ResultSet entities() {
    const std::size_t k = plan_.entity_instance;
    std::vector<const Row*> rows;
    std::unordered_set<const Row*> seen;
    for (const auto& t : tuples_)
      if (seen.insert(t[k]).second) rows.push_back(t[k]);
    std::stable_sort(rows.begin(), rows.end(),
                     [&](const Row* a, const Row* b) { return row_order_less(*a, *b, plan_.sort); });
    ResultSet rs;
    rs.total = rows.size();
    auto cols = output_columns(k);
    for (const Row* r : page(rows)) rs.rows.push_back(entity_json(*r, cols));
    return rs;
  }

  json aggregate_of(const std::vector<const Tuple*>& group) const {
    const ColumnRef& target = plan_.columns[0];
    if (plan_.aggregate_entities && *plan_.aggregate == Aggregate::ArrayD) {
      std::vector<const Row*> rows;
      std::unordered_set<const Row*> seen;
      for (const Tuple* t : group)
        if (seen.insert((*t)[target.instance]).second) rows.push_back((*t)[target.instance]);
      std::sort(rows.begin(), rows.end(), [&](const Row* a, const Row* b) {
        return row_order_less(*a, *b, {SortKey{target.column, false}});
      });
      json arr = json::array();
      auto cols = output_columns(target.instance);
      for (const Row* r : rows) arr.push_back(entity_json(*r, cols));
      return arr;
    }
    std::vector<const Value*> bag;
    for (const Tuple* t : group) bag.push_back(&cell(*(*t)[target.instance], target.column));
    return aggregate_values(*plan_.aggregate, bag);
  }

  ResultSet aggregates() {
    ResultSet rs;
    if (!plan_.group_by_base) {
      std::vector<const Tuple*> all;
      for (const auto& t : tuples_) all.push_back(&t);
      rs.rows.push_back({{"value", aggregate_of(all)}});
      rs.total = 1;
      return rs;
    }
    std::unordered_map<const Row*, std::vector<const Tuple*>> groups;
    for (const auto& t : tuples_) groups[t[0]].push_back(&t);
    std::vector<const Row*> bases = base_rows_;
    std::stable_sort(bases.begin(), bases.end(),
                     [&](const Row* a, const Row* b) { return row_order_less(*a, *b, {}); });
    rs.total = bases.size();
    static const std::vector<const Tuple*> none;
    for (const Row* b : page(bases)) {
      auto it = groups.find(b);
      rs.rows.push_back({{"RID", value_to_json(cell(*b, "RID"))}, {"value", aggregate_of(it == groups.end() ? none : it->second)}});
    }
    return rs;
  }

  ResultSet value_counts() {
    const ColumnRef& target = plan_.columns[0];
    std::map<std::string, std::pair<Value, std::unordered_set<const Row*>>> buckets;
    for (const auto& t : tuples_) {
      const Value& v = cell(*t[target.instance], target.column);
      auto& b = buckets[v.key()];
      b.first = v;
      b.second.insert(t[0]);
    }
    std::vector<std::pair<Value, std::size_t>> counts;
    for (auto& [k, b] : buckets) counts.emplace_back(b.first, b.second.size());
    std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    ResultSet rs;
    rs.total = counts.size();
    for (const auto& [v, n] : page(counts)) rs.rows.push_back({{"value", value_to_json(v)}, {"count", n}});
    return rs;
  }

  const QueryPlan& plan_;
  const Snapshot& snap_;
  std::vector<const Table*> tables_;
  std::vector<std::vector<const Row*>> candidates_;
  std::vector<const Row*> base_rows_;
  std::vector<const Condition*> deferred_;
  std::vector<Tuple> tuples_;
};

json predicate_json(const Predicate& p) {
  json vals = json::array();
  for (const auto& v : p.values) vals.push_back(value_to_json(v));
  return {{"instance", p.instance}, {"column", p.column}, {"op", op_name(p.op)}, {"values", vals}};
}

}  // namespace

bool rid_less(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

bool row_visible(const Row& row, const std::optional<RowPredicate>& policy) {
  if (!policy) return true;
  for (const auto& term : policy->terms) {
    const Value& v = cell(row, term.column);
    if (v.is_text() && term.values.count(v.text())) return true;
  }
  return false;
}

bool predicate_matches(const Predicate& p, const Value& v) {
  switch (p.op) {
    case PredicateOp::IsNull: return v.is_null();
    case PredicateOp::Eq:
    case PredicateOp::In:
      if (v.is_null()) return false;
      return std::any_of(p.values.begin(), p.values.end(), [&](const Value& x) { return !x.is_null() && x == v; });
    case PredicateOp::Between: {
      if (v.is_null()) return false;
      const Value lo = p.values.size() > 0 ? p.values[0] : Value{};
      const Value hi = p.values.size() > 1 ? p.values[1] : Value{};
      if (!lo.is_null() && v < lo) return false;
      if (!hi.is_null() && hi < v) return false;
      return true;
    }
    case PredicateOp::ILike: {
      if (!v.is_text() || p.values.empty() || !p.values[0].is_text()) return false;
      return lower(v.text()).find(lower(p.values[0].text())) != std::string::npos;
    }
  }
  return false;
}

std::size_t QueryPlan::add_instance(const TableRef& table, std::optional<RowPredicate> policy) {
  instances.push_back(PlanInstance{table, std::move(policy)});
  return instances.size() - 1;
}

std::size_t QueryPlan::add_path(const ResolvedSource& source, std::size_t from, const RoleBasedModel& model) {
  std::size_t cur = from;
  for (const auto& hop : source.hops) {
    std::size_t next = add_instance(hop.to_table, model.row_predicate(hop.to_table));
    joins.push_back(PlanJoin{cur, hop});
    cur = next;
  }
  return cur;
}

json QueryPlan::to_json() const {
  json insts = json::array(), js = json::array(), conds = json::array(), cols = json::array(), sort_json = json::array();
  for (const auto& i : instances) {
    json policy = nullptr;
    if (i.policy) {
      policy = json::array();
      for (const auto& t : i.policy->terms) policy.push_back({{"column", t.column}, {"in", t.values}});
    }
    insts.push_back({{"table", i.table.str()}, {"policy", policy}});
  }
  for (const auto& j : joins)
    js.push_back({{"from", j.from},
                  {"direction", j.hop.direction == Direction::Inbound ? "inbound" : "outbound"},
                  {"fkey", j.hop.fkey.to_json()}});
  for (const auto& c : conditions) {
    json any = json::array();
    for (const auto& p : c.any) any.push_back(predicate_json(p));
    conds.push_back(any);
  }
  for (const auto& c : columns) cols.push_back({{"instance", c.instance}, {"column", c.column}});
  for (const auto& s : sort) sort_json.push_back({{"column", s.column}, {"descending", s.descending}});
  static const char* projections[] = {"entity", "aggregate", "value_counts"};
  return {{"instances", insts},
          {"joins", js},
          {"conditions", conds},
          {"projection", projections[static_cast<int>(projection)]},
          {"entity_instance", entity_instance},
          {"columns", cols},
          {"aggregate", aggregate ? json(aggregate_name(*aggregate)) : json(nullptr)},
          {"aggregate_entities", aggregate_entities},
          {"group_by_base", group_by_base},
          {"sort", sort_json},
          {"limit", limit ? json(*limit) : json(nullptr)},
          {"offset", offset}};
}

ResultSet execute(const QueryPlan& plan, const Snapshot& snapshot) { return Executor(plan, snapshot).run(); }

}  // namespace modeladapt
