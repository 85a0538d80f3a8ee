#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "annotation/annotation.hpp"
#include "er/er.hpp"
#include "policy/policy.hpp"
#include "storage/query.hpp"

namespace modeladapt {

inline constexpr std::size_t kEntityPageSize = 25;
inline constexpr std::size_t kRelatedPageSize = 10;
inline constexpr std::size_t kFacetPageSize = 10;

/// The client's view of one catalog version. Both references must outlive
/// every compile call made through it.
struct ModelView {
  const RoleBasedModel& model;
  const ValidatedAnnotations& annotations;
};

struct EntitySetRequest {
  TableRef table;
  std::vector<FacetFilter> filters;
  std::string search;
  /// Empty uses the table's compact sort.
  std::vector<SortKey> sort;
  std::size_t limit = kEntityPageSize;
  std::size_t offset = 0;
};

/// Filters must target facets of the table's filter plan. Each filter gets
/// its own join chain, so a multivalued facet matches when at least one
/// related row matches.
QueryPlan compile_entity_set(const ModelView& view, const EntitySetRequest& request);

struct FacetValuesRequest {
  TableRef table;
  json facet;  // source entry of the target facet
  std::vector<FacetFilter> filters;
  std::string search;
  std::size_t limit = kFacetPageSize;
  std::size_t offset = 0;
};

/// Distinct end values of the facet with the number of matching base rows.
/// The target facet's own selection is ignored.
QueryPlan compile_facet_values(const ModelView& view, const FacetValuesRequest& request);

struct RecordPlan {
  enum class Role { Core, Property, Dependency, Relationship };
  Role role = Role::Core;
  /// Property name, sourcekey, or relationship name; empty for the core plan.
  std::string name;
  QueryPlan plan;
};

const char* record_role_name(RecordPlan::Role role) noexcept;

/// Throws InvalidArgument for a malformed RID. A missing row is only
/// detected when the core plan executes.
std::vector<RecordPlan> compile_record(const ModelView& view, const TableRef& table, const std::string& rid,
                                       const std::string& context = "detailed");

struct PickerPlan {
  QueryPlan plan;
  std::vector<Diagnostic> diagnostics;
};

/// Entity set over the fkey's referenced table with its selection_filter
/// applied. `{{{col}}}` in filter choices interpolates `form` values.
PickerPlan compile_picker(const ModelView& view, const FkeyName& fkey, const json& form,
                          std::size_t limit = kEntityPageSize, std::size_t offset = 0);

}  // namespace modeladapt
