#include <doctest.h>

#include <random>

#include "annotation/annotation.hpp"
#include "common/error.hpp"
#include "demo/demo.hpp"

using namespace modeladapt;

namespace {

const TableRef kStudy{"RNASeq", "Study"};

const json kFiveHop = json::array({
    {{"inbound", {"RNASeq", "Experiment_Study_fkey"}}},
    {{"inbound", {"RNASeq", "Replicate_Experiment_fkey"}}},
    {{"outbound", {"RNASeq", "Replicate_Specimen_fkey"}}},
    {{"inbound", {"RNASeq", "Specimen_Tissue_Specimen_fkey"}}},
    {{"outbound", {"RNASeq", "Specimen_Tissue_Tissue_fkey"}}},
    "Name",
});

RoleBasedModel curator_model() { return prune_model(demo::catalog(), ClientContext::make("c", {"curator"})); }
RoleBasedModel anonymous_model() { return prune_model(demo::catalog(), ClientContext::anonymous()); }

Catalog with_study_annotation(const std::string& tag, const json& value) {
  Catalog c = demo::catalog();
  c.find_table(kStudy)->annotations[tag] = value;
  return c;
}

std::vector<std::string> entry_names(const std::vector<ColumnEntry>& entries) {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.raw.dump());
  return out;
}

// Independent lookup: exact, then the part before "/", then "*".
std::optional<std::string> oracle_lookup(const std::set<std::string>& keys, const std::string& requested) {
  if (keys.count(requested)) return requested;
  auto slash = requested.find('/');
  if (slash != std::string::npos && keys.count(requested.substr(0, slash))) return requested.substr(0, slash);
  if (keys.count("*")) return std::string("*");
  return std::nullopt;
}

}  // namespace

TEST_CASE("context grammar") {
  CHECK(is_valid_context("*"));
  CHECK(is_valid_context("detailed"));
  CHECK(is_valid_context("entry/create"));
  CHECK(is_valid_context("compact/brief"));
  CHECK_FALSE(is_valid_context(""));
  CHECK_FALSE(is_valid_context("a/b/c"));
  CHECK_FALSE(is_valid_context("entry/"));
  CHECK_FALSE(is_valid_context("en try"));
  CHECK(is_entry_context("entry"));
  CHECK(is_entry_context("entry/edit"));
  CHECK_FALSE(is_entry_context("entryway"));
}

TEST_CASE("context fallback examples") {
  json m1 = {{"entry", "A"}, {"*", "B"}};
  REQUIRE(resolve_context(m1, "entry/create"));
  CHECK(*resolve_context(m1, "entry/create") == "A");
  json m2 = {{"*", "B"}};
  REQUIRE(resolve_context(m2, "detailed"));
  CHECK(*resolve_context(m2, "detailed") == "B");
  json m3 = {{"compact", "C"}};
  CHECK(resolve_context(m3, "filter") == nullptr);
  CHECK(resolve_context(m3, "compact/brief") != nullptr);
}

TEST_CASE("property: context resolution matches the lookup oracle") {
  static const char* pool[] = {"*", "compact", "compact/brief", "detailed", "entry", "entry/create",
                               "entry/edit", "filter", "row_name"};
  std::mt19937 rng(41);
  for (int i = 0; i < 2000; ++i) {
    std::set<std::string> keys;
    json map = json::object();
    for (const char* k : pool)
      if (rng() % 3 == 0) {
        keys.insert(k);
        map[k] = k;
      }
    std::string requested = pool[1 + rng() % 8];
    auto expected = oracle_lookup(keys, requested);
    const json* got = resolve_context(map, requested);
    if (!expected) {
      CHECK(got == nullptr);
    } else {
      REQUIRE(got);
      CHECK(*got == *expected);
    }
    CHECK(resolve_context_key({keys.begin(), keys.end()}, requested) == expected);
  }
}

TEST_CASE("source resolution") {
  RoleBasedModel m = curator_model();
  const Table& study = *m.find_table(kStudy);

  SUBCASE("bare column") {
    ResolvedSource s = resolve_source(m, study, parse_source_path("Title", "t"));
    CHECK(s.hops.empty());
    CHECK(s.end_column == "Title");
    CHECK_FALSE(s.entity_mode);
    CHECK_FALSE(s.multivalued);
  }
  SUBCASE("inbound path to Experiment_Type") {
    json src = json::array({{{"inbound", {"RNASeq", "Experiment_Study_fkey"}}}, "Experiment_Type"});
    ResolvedSource s = resolve_source(m, study, parse_source_path(src, "t"));
    REQUIRE(s.hops.size() == 1);
    CHECK(s.hops[0].direction == Direction::Inbound);
    CHECK(s.end_table() == TableRef{"RNASeq", "Experiment"});
    CHECK(s.multivalued);
    CHECK_FALSE(s.entity_mode);
    CHECK(s.hops[0].join_columns == std::vector<std::pair<std::string, std::string>>{{"RID", "Study"}});
  }
  SUBCASE("five hops to Tissue") {
    SourceSpec spec = parse_source_entry({{"source", kFiveHop}, {"aggregate", "array_d"}}, "t");
    ResolvedSource s = resolve_source(m, study, spec);
    CHECK(s.hops.size() == 5);
    CHECK(s.multivalued);
    REQUIRE(s.aggregate);
    CHECK(*s.aggregate == Aggregate::ArrayD);
    CHECK(s.end_table() == TableRef{"Vocab", "Tissue"});
    // Name is a key of Tissue.
    CHECK(s.entity_mode);
    std::vector<std::string> tables{s.base.str()};
    for (const auto& h : s.hops) tables.push_back(h.to_table.str());
    CHECK(tables == std::vector<std::string>{"RNASeq:Study", "RNASeq:Experiment", "RNASeq:Replicate", "RNASeq:Specimen",
                                             "RNASeq:Specimen_Tissue", "Vocab:Tissue"});
  }
  SUBCASE("entity mode needs a key end column") {
    json src = json::array({{{"outbound", {"RNASeq", "Study_Curation_Status_fkey"}}}, "Name"});
    CHECK(resolve_source(m, study, parse_source_path(src, "t")).entity_mode);
    json src2 = json::array({{{"outbound", {"RNASeq", "Study_Curation_Status_fkey"}}}, "Description"});
    CHECK_FALSE(resolve_source(m, study, parse_source_path(src2, "t")).entity_mode);
  }
  SUBCASE("count aggregates are not entities") {
    SourceSpec spec = parse_source_entry(
        {{"source", json::array({{{"inbound", {"RNASeq", "Experiment_Study_fkey"}}}, "RID"})}, {"aggregate", "cnt_d"}}, "t");
    CHECK_FALSE(resolve_source(m, study, spec).entity_mode);
  }
  SUBCASE("wrong direction") {
    json src = json::array({{{"outbound", {"RNASeq", "Experiment_Study_fkey"}}}, "RID"});
    CHECK_THROWS_AS(resolve_source(m, study, parse_source_path(src, "t")), ResolutionError);
  }
  SUBCASE("unknown fkey is not a policy matter") {
    json src = json::array({{{"inbound", {"RNASeq", "Nope_fkey"}}}, "RID"});
    try {
      resolve_source(m, study, parse_source_path(src, "t"));
      FAIL("expected ResolutionError");
    } catch (const ResolutionError& e) {
      CHECK_FALSE(e.policy_hidden());
    }
  }
  SUBCASE("aggregate without a path") {
    CHECK_THROWS_AS(resolve_source(m, study, parse_source_entry({{"source", "Title"}, {"aggregate", "cnt"}}, "t")),
                    ResolutionError);
  }
  SUBCASE("malformed source") {
    CHECK_THROWS(parse_source_path(json::array({{{"sideways", {"RNASeq", "x"}}}, "RID"}), "t"));
    CHECK_THROWS(parse_source_path(json::array(), "t"));
  }
}

TEST_CASE("sources hidden by policy") {
  RoleBasedModel m = anonymous_model();
  const Table& study = *m.find_table(kStudy);
  json src = json::array({{{"outbound", {"RNASeq", "Study_Curation_Status_fkey"}}}, "Name"});
  try {
    resolve_source(m, study, parse_source_path(src, "t"));
    FAIL("expected ResolutionError");
  } catch (const ResolutionError& e) {
    CHECK(e.policy_hidden());
  }
  try {
    resolve_source(m, study, parse_source_path("Curation_Status", "t"));
    FAIL("expected ResolutionError");
  } catch (const ResolutionError& e) {
    CHECK(e.policy_hidden());
  }
}

TEST_CASE("sourcekey indirection") {
  RoleBasedModel m = curator_model();
  const Table& study = *m.find_table(kStudy);
  SourceDefinitions defs = {
      {"tissue", {{"source", kFiveHop}, {"aggregate", "array_d"}}},
      {"alias", {{"sourcekey", "tissue"}}},
  };
  SourceSpec ok;
  ok.sourcekey = "tissue";
  ResolvedSource s = resolve_source(m, study, ok, &defs);
  CHECK(s.hops.size() == 5);
  CHECK(s.sourcekey == std::optional<std::string>("tissue"));

  SourceSpec chained;
  chained.sourcekey = "alias";
  CHECK_THROWS_AS(resolve_source(m, study, chained, &defs), ResolutionError);
  SourceSpec dangling;
  dangling.sourcekey = "missing";
  CHECK_THROWS_AS(resolve_source(m, study, dangling, &defs), ResolutionError);
}

TEST_CASE("fixture annotations validate cleanly for a curator") {
  ValidatedAnnotations va = validate_annotations(curator_model());
  for (const auto& d : va.diagnostics) MESSAGE(d.line());
  CHECK(va.diagnostics.empty());
  const TableAnnotations* ta = va.table(kStudy);
  REQUIRE(ta);
  CHECK(ta->visible_columns.at("compact").size() == 6);
  CHECK(ta->visible_columns.at("detailed").size() == 8);
  CHECK(ta->facets.at("filter").size() == 5);
  CHECK(ta->resolved.at("Anatomical_Source").hops.size() == 5);
  CHECK(ta->visible_fkeys.at("detailed").size() == 2);
}

TEST_CASE("anonymous validation drops entries touching hidden elements") {
  ValidatedAnnotations va = validate_annotations(anonymous_model());
  CHECK(va.error_count() == 0);
  CHECK(va.warning_count() == 4);
  const TableAnnotations* ta = va.table(kStudy);
  REQUIRE(ta);
  auto has_status_fkey = [](const std::vector<ColumnEntry>& entries) {
    for (const auto& e : entries)
      if (e.fkey && e.fkey->name == "Study_Curation_Status_fkey") return true;
    return false;
  };
  CHECK(ta->visible_columns.at("compact").size() == 5);
  CHECK_FALSE(has_status_fkey(ta->visible_columns.at("compact")));
  CHECK(ta->visible_columns.at("detailed").size() == 7);
  CHECK(ta->visible_columns.at("entry").size() == 4);
  CHECK(ta->facets.at("filter").size() == 4);
  for (const auto& d : va.diagnostics) {
    CHECK(d.severity == Diagnostic::Severity::Warning);
    CHECK(d.table == "RNASeq:Study");
  }
}

TEST_CASE("one dangling sourcekey yields exactly one error") {
  json vc = {{"compact", json::array({"RID", "Title", {{"sourcekey", "Experiment_Type"}}, {{"sourcekey", "No_Such_Source"}},
                                      {{"sourcekey", "Anatomical_Source"}}})}};
  RoleBasedModel m = prune_model(with_study_annotation(tags::kVisibleColumns, vc), ClientContext::make("c", {"curator"}));
  ValidatedAnnotations va = validate_annotations(m);
  REQUIRE(va.error_count() == 1);
  CHECK(va.warning_count() == 0);
  const Diagnostic& d = va.diagnostics.front();
  CHECK(d.context == "compact");
  CHECK(d.index == 3);
  CHECK(d.tag == tags::kVisibleColumns);
  CHECK(d.line().rfind("ERROR table=RNASeq:Study tag=tag:isrd.isi.edu,2016:visible-columns context=compact idx=3 msg=", 0) == 0);
  const auto& kept = va.table(kStudy)->visible_columns.at("compact");
  CHECK(entry_names(kept) == std::vector<std::string>{R"("RID")", R"("Title")", R"({"sourcekey":"Experiment_Type"})",
                                                      R"({"sourcekey":"Anatomical_Source"})"});
  // The pruned catalog carries only the surviving entries.
  const json& pruned = va.pruned.find_table(kStudy)->annotations.at(tags::kVisibleColumns);
  CHECK(pruned["compact"].size() == 4);
}

TEST_CASE("property: pruning one entry leaves siblings unchanged") {
  RoleBasedModel base = curator_model();
  const std::vector<json> valid = {
      "RID", "Title", "Release_Date", json::array({"RNASeq", "Study_Curation_Status_fkey"}),
      {{"sourcekey", "Experiment_Type"}}, {{"sourcekey", "Anatomical_Source"}},
      {{"source", json::array({{{"inbound", {"RNASeq", "Study_File_Study_fkey"}}}, "RID"})}, {"aggregate", "cnt"}}};
  const std::vector<json> invalid = {
      "Nope", json::array({"RNASeq", "Nope_fkey"}), {{"sourcekey", "Missing"}},
      {{"source", json::array({{{"outbound", {"RNASeq", "Experiment_Study_fkey"}}}, "RID"})}},
      {{"source", "Title"}, {"aggregate", "median"}}, 42};
  std::mt19937 rng(43);
  for (int i = 0; i < 200; ++i) {
    json mixed = json::array(), clean = json::array();
    std::size_t bad = 0;
    int n = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < n; ++k) {
      if (rng() % 3 == 0) {
        mixed.push_back(invalid[rng() % invalid.size()]);
        ++bad;
      } else {
        const json& v = valid[rng() % valid.size()];
        mixed.push_back(v);
        clean.push_back(v);
      }
    }
    Catalog a = with_study_annotation(tags::kVisibleColumns, {{"compact", mixed}});
    Catalog b = with_study_annotation(tags::kVisibleColumns, {{"compact", clean}});
    ClientContext c = ClientContext::make("c", {"curator"});
    ValidatedAnnotations va = validate_annotations(prune_model(a, c));
    ValidatedAnnotations vb = validate_annotations(prune_model(b, c));
    CHECK(va.error_count() == bad);
    CHECK(vb.error_count() == 0);
    const auto& ea = va.table(kStudy)->visible_columns.at("compact");
    const auto& eb = vb.table(kStudy)->visible_columns.at("compact");
    REQUIRE(ea.size() == eb.size());
    for (std::size_t k = 0; k < ea.size(); ++k) {
      CHECK(ea[k].raw == eb[k].raw);
      CHECK(ea[k].source.to_json() == eb[k].source.to_json());
    }
  }
}

TEST_CASE("property: resolved join chains are connected") {
  RoleBasedModel m = curator_model();
  ValidatedAnnotations va = validate_annotations(m);
  std::size_t checked = 0;
  for (const auto& [ref, ta] : va.tables) {
    auto check = [&](const ResolvedSource& s) {
      TableRef cur = s.base;
      for (const auto& h : s.hops) {
        CHECK(h.from_table == cur);
        CHECK(m.find_table(h.to_table));
        cur = h.to_table;
      }
      CHECK(m.find_table(cur)->find_column(s.end_column));
      CHECK(s.multivalued == std::any_of(s.hops.begin(), s.hops.end(),
                                         [](const ResolvedHop& h) { return h.direction == Direction::Inbound; }));
      ++checked;
    };
    for (const auto& [k, entries] : ta.visible_columns)
      for (const auto& e : entries) check(e.source);
    for (const auto& [k, entries] : ta.facets)
      for (const auto& e : entries) check(e.source);
    for (const auto& [k, s] : ta.resolved) check(s);
  }
  CHECK(checked > 20);
}

TEST_CASE("unknown and misplaced tags") {
  Catalog c = with_study_annotation("tag:example.org,2024:custom", {{"x", 1}});
  c.find_table(kStudy)->find_column("Title")->annotations[tags::kVisibleColumns] = json::object();
  ValidatedAnnotations va = validate_annotations(prune_model(c, ClientContext::make("c", {"curator"})));
  CHECK(va.error_count() == 0);
  CHECK(va.warning_count() == 2);
  const Table* pruned = va.pruned.find_table(kStudy);
  CHECK(pruned->annotations.count("tag:example.org,2024:custom"));
  CHECK_FALSE(pruned->find_column("Title")->annotations.count(tags::kVisibleColumns));
}

TEST_CASE("table-display payload checks") {
  json td = {{"compact", {{"row_order", json::array({{{"column", "Nope"}}})}, {"page_size", 0}}},
             {"detailed", {{"row_markdown_pattern", "{{#unclosed}}"}}},
             {"row_name", {{"row_markdown_pattern", "{{{Title}}}"}}}};
  ValidatedAnnotations va =
      validate_annotations(prune_model(with_study_annotation(tags::kTableDisplay, td), ClientContext::make("c", {"curator"})));
  CHECK(va.error_count() == 3);
  const TableAnnotations* ta = va.table(kStudy);
  CHECK(ta->table_display.at("row_name").row_markdown_pattern == std::optional<std::string>("{{{Title}}}"));
  CHECK(ta->table_display.at("compact").row_order.empty());
}

TEST_CASE("facet filters") {
  FacetFilter f = facet_filter_from_json({{"source", "Title"}, {"choices", {"a", nullptr}}}, "t");
  REQUIRE(f.choices);
  CHECK(f.choices->size() == 2);
  FacetFilter r = facet_filter_from_json({{"sourcekey", "x"}, {"range", {{"min", 1}}}}, "t");
  REQUIRE(r.range);
  CHECK(r.range->first == 1);
  CHECK(r.range->second.is_null());
  CHECK_THROWS_AS(facet_filter_from_json({{"source", "Title"}}, "t"), ParseError);
  auto list = facet_filters_from_json({{"and", json::array({{{"source", "Title"}, {"search", {"kidney"}}}})}});
  REQUIRE(list.size() == 1);
  CHECK(list[0].search == std::optional<std::vector<std::string>>({"kidney"}));
  CHECK(facet_filter_from_json(list[0].to_json(), "t").to_json() == list[0].to_json());
}

TEST_CASE("selection filter resolves against the referenced table") {
  ValidatedAnnotations va = validate_annotations(curator_model());
  const TableAnnotations* ta = va.table({"RNASeq", "Experiment"});
  REQUIRE(ta);
  const auto& fa = ta->fkeys.at({"RNASeq", "Experiment_Purification_Protocol_fkey"});
  CHECK(fa.to_name == std::optional<std::string>("Purification Protocol"));
  CHECK(fa.selection_filter.size() == 1);
}
