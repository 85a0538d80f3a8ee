#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "annotation/annotation.hpp"
#include "policy/policy.hpp"

namespace modeladapt {

enum class PropertyKind { Scalar, EntityRef, Pseudo, Asset };
const char* property_kind_name(PropertyKind kind) noexcept;

struct PropertySpec {
  PropertyKind kind = PropertyKind::Scalar;
  std::string name;  // stable identifier: column name, fkey constraint name, or sourcekey
  ResolvedSource source;
  std::string display_name;
  std::optional<std::string> tooltip;
  bool input_disabled = false;
  bool required = false;
  std::optional<std::string> display;  // markdown_pattern
  std::optional<AssetSpec> asset_map;
  std::optional<FkeyName> fkey;  // entity_ref only
  std::vector<std::string> wait_for;

  json to_json() const;
};

struct Association {
  TableRef table;
  FkeyName inbound;   // middle table -> this table
  FkeyName outbound;  // middle table -> far table
  TableRef far_table;
};

struct RelationshipSpec {
  std::string name;
  ResolvedSource via;
  std::optional<FkeyName> fkey;  // the inbound fkey of a direct relationship
  std::optional<Association> association;

  json to_json() const;
};

enum class FacetKind { Choice, Range, TextSearch };
const char* facet_kind_name(FacetKind kind) noexcept;

struct FacetSpec {
  ResolvedSource source;
  std::string display_name;
  FacetKind kind = FacetKind::Choice;
  std::vector<json> preselected;

  json to_json() const;
};

struct TablePlan {
  TableRef table;
  std::string context;
  std::string display_name;
  std::vector<PropertySpec> properties;
  std::vector<RelationshipSpec> relationships;
  std::vector<FacetSpec> facets;
  std::string row_name;
  std::vector<SortKey> sort;
  std::optional<int> page_size;
  AccessRights rights;

  json to_json() const;
};

/// Display annotation name, else underscores replaced by spaces.
std::string display_name(const Table& table, const ValidatedAnnotations& annotations);
std::string display_name(const Table& table, const Column& column, const ValidatedAnnotations& annotations);

/// table-display row_name pattern, else title/name/accession_number, else
/// the shortest key joined with ":".
std::string row_name_template(const Table& table, const ValidatedAnnotations& annotations);

/// Shortest key (earliest on ties) ascending.
std::vector<SortKey> default_sort(const Table& table);

/// Throws PlanError if the table is not visible or the context is malformed.
TablePlan plan(const TableRef& table, std::string_view context, const RoleBasedModel& model,
               const ValidatedAnnotations& annotations);

}  // namespace modeladapt
