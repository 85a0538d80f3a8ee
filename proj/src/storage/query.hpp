#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "annotation/annotation.hpp"
#include "policy/policy.hpp"
#include "storage/store.hpp"

namespace modeladapt {

struct PlanInstance {
  TableRef table;
  /// Row visibility for this instance; nullopt admits every row.
  std::optional<RowPredicate> policy;
};

/// Introduces a new instance joined to `from` across `hop`.
struct PlanJoin {
  std::size_t from = 0;
  ResolvedHop hop;
};

enum class PredicateOp { Eq, In, Between, ILike, IsNull };

struct Predicate {
  std::size_t instance = 0;
  std::string column;
  PredicateOp op = PredicateOp::Eq;
  /// Between: {min, max} where null is an open bound. ILike: one text needle.
  std::vector<Value> values;
};

/// Disjunction of predicates.
struct Condition {
  std::vector<Predicate> any;
};

struct ColumnRef {
  std::size_t instance = 0;
  std::string column;
};

enum class Projection {
  Entity,       // distinct rows of one instance
  Aggregate,    // aggregate of columns[0], per base row or global
  ValueCounts,  // distinct values of columns[0] with the number of base rows carrying each
};

struct QueryPlan {
  std::vector<PlanInstance> instances;  // [0] is the base instance
  std::vector<PlanJoin> joins;          // joins[i] introduces instance i + 1
  std::vector<Condition> conditions;    // conjunction
  Projection projection = Projection::Entity;
  std::size_t entity_instance = 0;
  /// Entity: columns to emit (empty emits all). Aggregate, ValueCounts: the target.
  std::vector<ColumnRef> columns;
  std::optional<Aggregate> aggregate;
  /// Aggregate only. array_d of entity rows instead of column values.
  bool aggregate_entities = false;
  /// With aggregate_entities: columns emitted per entity (empty emits all).
  std::vector<std::string> entity_columns;
  bool group_by_base = true;
  /// Entity: columns of the projected instance. RID is appended as the final tie-breaker.
  std::vector<SortKey> sort;
  std::optional<std::size_t> limit;
  std::size_t offset = 0;

  std::size_t add_instance(const TableRef& table, std::optional<RowPredicate> policy);
  /// Appends instances for each hop of `source`, starting at instance `from`.
  /// Returns the index of the final instance.
  std::size_t add_path(const ResolvedSource& source, std::size_t from, const RoleBasedModel& model);

  json to_json() const;
};

struct ResultSet {
  /// Entity: row objects. Aggregate: {"RID", "value"} per base row, or one
  /// {"value"} when global. ValueCounts: {"value", "count"}.
  std::vector<json> rows;
  /// Number of results before paging.
  std::size_t total = 0;
};

/// Text order for RID values: shorter first, then lexicographic. This is
/// creation order for store-assigned RIDs.
bool rid_less(const std::string& a, const std::string& b);

/// Deterministic evaluation against one snapshot. Throws PlanError.
ResultSet execute(const QueryPlan& plan, const Snapshot& snapshot);

bool row_visible(const Row& row, const std::optional<RowPredicate>& policy);
bool predicate_matches(const Predicate& p, const Value& v);

}  // namespace modeladapt
