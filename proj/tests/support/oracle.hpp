#pragma once

// Brute-force reference evaluation over raw snapshot rows. Nested loops only;
// shares nothing with the executor beyond the data structures.

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "annotation/annotation.hpp"
#include "policy/policy.hpp"
#include "storage/store.hpp"

namespace modeladapt::testing {

inline bool contains_ci(const std::string& hay, const std::string& needle) {
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  return lower(hay).find(lower(needle)) != std::string::npos;
}

class Oracle {
 public:
  Oracle(const Snapshot& snap, const RoleBasedModel& model) : snap_(snap), model_(model) {}

  bool visible(const TableRef& t, const Row& row) const {
    auto pred = model_.row_predicate(t);
    if (!pred) return true;
    for (const auto& term : pred->terms) {
      const Value& v = row.at(term.column);
      if (v.is_text() && term.values.count(v.text())) return true;
    }
    return false;
  }

  std::vector<const Row*> rows(const TableRef& t) const {
    std::vector<const Row*> out;
    for (const auto& r : snap_.data(t).rows)
      if (visible(t, r)) out.push_back(&r);
    return out;
  }

  /// End rows reached from `base` along the source's hops (a bag).
  std::vector<const Row*> follow(const Row& base, const ResolvedSource& s) const {
    std::vector<const Row*> cur = {&base};
    for (const auto& hop : s.hops) {
      std::vector<const Row*> next;
      for (const Row* r : cur)
        for (const auto& c : snap_.data(hop.to_table).rows) {
          if (!visible(hop.to_table, c)) continue;
          bool match = true;
          for (const auto& [f, t] : hop.join_columns) {
            const Value& a = r->at(f);
            match = match && !a.is_null() && a == c.at(t);
          }
          if (match) next.push_back(&c);
        }
      cur = std::move(next);
    }
    return cur;
  }

  /// Sorted distinct non-null end values.
  std::vector<Value> distinct_values(const Row& base, const ResolvedSource& s) const {
    std::vector<Value> out;
    for (const Row* r : follow(base, s)) {
      const Value& v = r->at(s.end_column);
      if (!v.is_null() && std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  bool matches(const Row& base, const FacetFilter& f, const ResolvedSource& s) const {
    auto ends = follow(base, s);
    auto any = [&](auto pred) {
      return std::any_of(ends.begin(), ends.end(), [&](const Row* r) { return pred(r->at(s.end_column)); });
    };
    if (f.choices && !f.choices->empty()) {
      bool ok = any([&](const Value& v) {
        for (const auto& ch : *f.choices) {
          if (ch.is_null() ? v.is_null() : (!v.is_null() && v == value_from_json(ch, s.end_type))) return true;
        }
        return false;
      });
      if (!ok) return false;
    }
    if (f.range) {
      bool ok = any([&](const Value& v) {
        if (v.is_null()) return false;
        if (!f.range->first.is_null() && v < value_from_json(f.range->first, s.end_type)) return false;
        if (!f.range->second.is_null() && value_from_json(f.range->second, s.end_type) < v) return false;
        return true;
      });
      if (!ok) return false;
    }
    if (f.search && !f.search->empty()) {
      bool ok = any([&](const Value& v) {
        if (!v.is_text()) return false;
        for (const auto& w : *f.search)
          if (contains_ci(v.text(), w)) return true;
        return false;
      });
      if (!ok) return false;
    }
    return true;
  }

  bool search_matches(const TableRef& t, const Row& row, const std::string& needle) const {
    if (needle.empty()) return true;
    const Table* table = model_.find_table(t);
    for (const auto& c : table->columns)
      if (is_textual(c.type) && model_.rights(t, c.name).select) {
        const Value& v = row.at(c.name);
        if (v.is_text() && contains_ci(v.text(), needle)) return true;
      }
    return false;
  }

  using Filters = std::vector<std::pair<FacetFilter, ResolvedSource>>;

  std::vector<const Row*> entity_set(const TableRef& t, const Filters& filters, const std::string& search = {}) const {
    std::vector<const Row*> out;
    for (const Row* r : rows(t)) {
      bool ok = search_matches(t, *r, search);
      for (const auto& [f, s] : filters) ok = ok && matches(*r, f, s);
      if (ok) out.push_back(r);
    }
    return out;
  }

  /// value key -> (value, number of matching base rows). `filters` are applied as given.
  std::map<std::string, std::pair<Value, std::size_t>> facet_counts(const TableRef& t, const ResolvedSource& target,
                                                                      const Filters& filters,
                                                                      const std::string& search = {}) const {
    std::map<std::string, std::pair<Value, std::size_t>> out;
    for (const Row* r : entity_set(t, filters, search)) {
      std::set<std::string> seen;
      for (const Row* e : follow(*r, target)) {
        const Value& v = e->at(target.end_column);
        if (!seen.insert(v.key()).second) continue;
        auto& slot = out[v.key()];
        slot.first = v;
        ++slot.second;
      }
    }
    return out;
  }

 private:
  const Snapshot& snap_;
  const RoleBasedModel& model_;
};

}  // namespace modeladapt::testing
