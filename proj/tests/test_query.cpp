#include <doctest.h>

#include <random>

#include "common/error.hpp"
#include "demo/demo.hpp"
#include "query/compile.hpp"
#include "support/oracle.hpp"

using namespace modeladapt;
using modeladapt::testing::Oracle;

namespace {

const TableRef kStudy{"RNASeq", "Study"};
const TableRef kExperiment{"RNASeq", "Experiment"};
const TableRef kStudyFile{"RNASeq", "Study_File"};

ClientContext curator() { return ClientContext::make("c", {"curator"}); }

struct Session {
  RoleBasedModel model;
  ValidatedAnnotations annotations;
  ModelView view{model, annotations};

  Session(const Catalog& c, const ClientContext& client)
      : model(prune_model(c, client)), annotations(validate_annotations(model)) {}
  Session(const Session&) = delete;
};

struct Demo {
  Store store{demo::catalog()};
  Demo() { demo::populate(store); }
};

std::vector<std::string> rids(const ResultSet& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs.rows) out.push_back(r["RID"].get<std::string>());
  return out;
}

std::set<std::string> rid_set(const std::vector<const Row*>& rows) {
  std::set<std::string> out;
  for (const Row* r : rows) out.insert(r->at("RID").text());
  return out;
}

json entry(const ResolvedSource& s) { return {{"source", s.source_json()}}; }

FacetFilter choices(const ResolvedSource& s, std::vector<json> values) {
  FacetFilter f;
  f.source = entry(s);
  f.choices = std::move(values);
  return f;
}

// Every instance of a plan carries the client's row predicate for its table.
void check_policy_soundness(const QueryPlan& q, const RoleBasedModel& m) {
  for (const auto& inst : q.instances) CHECK(inst.policy == m.row_predicate(inst.table));
}

const FacetSpec& facet_named(const TablePlan& p, const std::string& name) {
  for (const auto& f : p.facets)
    if (f.display_name == name) return f;
  FAIL("no facet " << name);
  throw;
}

}  // namespace

TEST_CASE("entity set without filters applies only the row policy") {
  Demo d;
  auto snap = d.store.snapshot();
  Session anon(*snap->catalog, ClientContext::anonymous());
  QueryPlan q = compile_entity_set(anon.view, {kStudy, {}, "", {}, 1000, 0});
  REQUIRE(q.instances.size() == 1);
  REQUIRE(q.instances[0].policy);
  CHECK(q.instances[0].policy->terms == std::vector<RowFilter>{RowFilter{"Curation_Status", {"Release"}}});
  CHECK(q.conditions.empty());
  for (const auto& c : q.columns) CHECK(c.column != "Curation_Status");

  ResultSet rs = execute(q, *snap);
  std::set<std::string> expected;
  for (const auto& row : snap->data(kStudy).rows)
    if (row.at("Curation_Status") == Value{"Release"}) expected.insert(row.at("RID").text());
  REQUIRE_FALSE(expected.empty());
  auto got = rids(rs);
  CHECK(std::set<std::string>(got.begin(), got.end()) == expected);
  CHECK(got.size() == expected.size());
  CHECK(rs.total == expected.size());
  for (const auto& r : rs.rows) CHECK_FALSE(r.contains("Curation_Status"));

  // Sorted by RMT descending, the table's row_order.
  for (std::size_t i = 1; i < rs.rows.size(); ++i)
    CHECK(rs.rows[i - 1]["RMT"].get<std::string>() >= rs.rows[i]["RMT"].get<std::string>());

  Session cur(*snap->catalog, curator());
  ResultSet all = execute(compile_entity_set(cur.view, {kStudy, {}, "", {}, 1000, 0}), *snap);
  CHECK(all.total == snap->data(kStudy).rows.size());
}

TEST_CASE("entity set paging and search") {
  Demo d;
  auto snap = d.store.snapshot();
  Session cur(*snap->catalog, curator());
  ResultSet all = execute(compile_entity_set(cur.view, {kStudy, {}, "", {}, 1000, 0}), *snap);
  ResultSet page = execute(compile_entity_set(cur.view, {kStudy, {}, "", {}, 7, 5}), *snap);
  CHECK(page.total == all.total);
  REQUIRE(page.rows.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(page.rows[i] == all.rows[i + 5]);
  CHECK(execute(compile_entity_set(cur.view, {kStudy, {}, "", {}, 0, 0}), *snap).rows.empty());
  CHECK(compile_entity_set(cur.view, {kStudy, {}, "", {}, kEntityPageSize, 0}).limit == std::optional<std::size_t>(25));

  QueryPlan q = compile_entity_set(cur.view, {kStudy, {}, "  PODOCYTE ", {}, 1000, 0});
  REQUIRE(q.conditions.size() == 1);
  std::set<std::string> searched;
  for (const auto& p : q.conditions[0].any) {
    CHECK(p.op == PredicateOp::ILike);
    CHECK(p.values == std::vector<Value>{Value{"PODOCYTE"}});
    searched.insert(p.column);
  }
  CHECK(searched == std::set<std::string>{"RID", "Title", "Summary", "Cellbrowser_URL", "Curation_Status", "RCB", "RMB"});
  Oracle oracle(*snap, cur.model);
  auto got = rids(execute(q, *snap));
  CHECK(std::set<std::string>(got.begin(), got.end()) == rid_set(oracle.entity_set(kStudy, {}, "PODOCYTE")));

  Session anon(*snap->catalog, ClientContext::anonymous());
  QueryPlan qa = compile_entity_set(anon.view, {kStudy, {}, "x", {}, 10, 0});
  for (const auto& p : qa.conditions[0].any) CHECK(p.column != "Curation_Status");

  CHECK_THROWS_AS(compile_entity_set(anon.view, {kStudy, {}, "", {SortKey{"Curation_Status", false}}, 10, 0}),
                  PlanError);
  CHECK_THROWS_AS(compile_entity_set(anon.view, {{"Vocab", "Curation_Status"}, {}, "", {}, 10, 0}), NotFound);
}

TEST_CASE("five-hop tissue facet") {
  Demo d;
  auto snap = d.store.snapshot();
  Session anon(*snap->catalog, ClientContext::anonymous());
  TablePlan fp = plan(kStudy, "filter", anon.model, anon.annotations);
  const FacetSpec& tissue = facet_named(fp, "Specimen_Anatomical_Source");
  REQUIRE(tissue.source.hops.size() == 5);

  QueryPlan q = compile_entity_set(anon.view, {kStudy, {choices(tissue.source, {"Kidney"})}, "", {}, 1000, 0});
  CHECK(q.instances.size() == 6);
  CHECK(q.joins.size() == 5);
  check_policy_soundness(q, anon.model);
  ResultSet rs = execute(q, *snap);
  auto got = rids(rs);
  std::set<std::string> unique(got.begin(), got.end());
  CHECK(unique.size() == got.size());  // deduplicated by Study RID

  Oracle oracle(*snap, anon.model);
  auto expected = rid_set(oracle.entity_set(kStudy, {{choices(tissue.source, {"Kidney"}), tissue.source}}));
  CHECK(unique == expected);
  REQUIRE_FALSE(expected.empty());

  CHECK_THROWS_AS(compile_entity_set(anon.view, {kStudy, {choices(tissue.source, {1.5})}, "", {}, 10, 0}), PlanError);
  FacetFilter unknown;
  unknown.source = {{"source", "Summary"}};
  unknown.choices = std::vector<json>{"x"};
  CHECK_THROWS_AS(compile_entity_set(anon.view, {kStudy, {unknown}, "", {}, 10, 0}), PlanError);
  FacetFilter hidden;
  hidden.source = {{"source", "Curation_Status"}};
  hidden.choices = std::vector<json>{"Release"};
  CHECK_THROWS_AS(compile_entity_set(anon.view, {kStudy, {hidden}, "", {}, 10, 0}), PlanError);
}

TEST_CASE("facet values exclude their own selection") {
  Demo d;
  auto snap = d.store.snapshot();
  Session anon(*snap->catalog, ClientContext::anonymous());
  TablePlan fp = plan(kStudy, "filter", anon.model, anon.annotations);
  const FacetSpec& tissue = facet_named(fp, "Specimen_Anatomical_Source");
  const FacetSpec& type = facet_named(fp, "Experiment Type");

  FacetValuesRequest req{kStudy, entry(tissue.source), {choices(tissue.source, {"Kidney"})}, "", 1000, 0};
  QueryPlan q = compile_facet_values(anon.view, req);
  check_policy_soundness(q, anon.model);
  CHECK(q.projection == Projection::ValueCounts);
  CHECK(q.conditions.empty());
  CHECK(compile_facet_values(anon.view, {kStudy, entry(tissue.source), {}, "", kFacetPageSize, 0}).limit ==
        std::optional<std::size_t>(10));

  Oracle oracle(*snap, anon.model);
  auto expected = oracle.facet_counts(kStudy, tissue.source, {});
  ResultSet rs = execute(q, *snap);
  CHECK(rs.rows.size() == expected.size());
  for (const auto& r : rs.rows) {
    Value v = r["value"].is_null() ? Value{} : value_from_json(r["value"], ScalarType::Text);
    REQUIRE(expected.count(v.key()));
    CHECK(expected.at(v.key()).second == r["count"].get<std::size_t>());
  }

  // Sibling facet counts see the tissue selection.
  FacetValuesRequest sib{kStudy, entry(type.source), {choices(tissue.source, {"Kidney"})}, "", 1000, 0};
  auto sib_expected =
      oracle.facet_counts(kStudy, type.source, {{choices(tissue.source, {"Kidney"}), tissue.source}});
  ResultSet srs = execute(compile_facet_values(anon.view, sib), *snap);
  CHECK(srs.rows.size() == sib_expected.size());
  for (const auto& r : srs.rows) {
    Value v = r["value"].is_null() ? Value{} : value_from_json(r["value"], ScalarType::Text);
    CHECK(sib_expected.at(v.key()).second == r["count"].get<std::size_t>());
  }
}

TEST_CASE("facet values edge cases") {
  const char* doc = R"({
    "owners": ["admin"], "acls": {"select": ["*"]},
    "schemas": {"S": {"tables": {
      "T": {"columns": [{"name": "Flag", "type": "boolean"}, {"name": "Note", "type": "text"}]}}}}})";
  Catalog c = parse_catalog(doc);
  Store store(c);
  std::vector<json> rows;
  for (int i = 0; i < 12; ++i) rows.push_back({{"Flag", i % 3 == 0 ? json(nullptr) : json(i % 3 == 1)}});
  store.load({"S", "T"}, rows, "loader");
  Session s(c, ClientContext::anonymous());
  json flag = {{"source", "Flag"}};
  ResultSet rs = execute(compile_facet_values(s.view, {{"S", "T"}, flag, {}, "", 1000, 0}), *store.snapshot());
  CHECK(rs.rows.size() == 3);
  std::size_t sum = 0;
  for (const auto& r : rs.rows) sum += r["count"].get<std::size_t>();
  CHECK(sum == 12);

  Store empty(c);
  ResultSet none = execute(compile_facet_values(s.view, {{"S", "T"}, {{"source", "Note"}}, {}, "", 10, 0}),
                           *empty.snapshot());
  CHECK(none.rows.empty());
  CHECK_THROWS_AS(compile_facet_values(s.view, {{"S", "T"}, {{"source", "Nope"}}, {}, "", 10, 0}), PlanError);
}

TEST_CASE("property: randomized facet states match the brute-force oracle") {
  Demo d;
  auto snap = d.store.snapshot();
  std::mt19937 rng(71);
  std::size_t nonempty_results = 0, selections = 0;
  for (int state = 0; state < 20; ++state) {
    const bool as_curator = state % 2 == 1;
    Session s(*snap->catalog, as_curator ? curator() : ClientContext::anonymous());
    Oracle oracle(*snap, s.model);
    TablePlan fp = plan(kStudy, "filter", s.model, s.annotations);
    REQUIRE(fp.facets.size() == (as_curator ? 5u : 4u));

    // Random selection per facet, drawn from values present in the data.
    Oracle::Filters selected;
    for (const auto& facet : fp.facets) {
      if (rng() % 2) continue;
      FacetFilter f;
      f.source = entry(facet.source);
      auto present = oracle.facet_counts(kStudy, facet.source, {});
      std::vector<Value> values;
      for (const auto& [k, v] : present) values.push_back(v.first);
      if (values.empty()) continue;
      if (facet.kind == FacetKind::Range) {
        std::vector<Value> dated;
        for (const auto& v : values)
          if (!v.is_null()) dated.push_back(v);
        Value a = dated[rng() % dated.size()], b = dated[rng() % dated.size()];
        if (b < a) std::swap(a, b);
        f.range = std::make_pair(rng() % 4 ? value_to_json(a) : json(nullptr), rng() % 4 ? value_to_json(b) : json(nullptr));
        if (f.range->first.is_null() && f.range->second.is_null()) f.range->first = value_to_json(a);
      } else {
        std::vector<json> picked;
        for (unsigned n = 1 + rng() % 3; n > 0; --n) picked.push_back(value_to_json(values[rng() % values.size()]));
        if (rng() % 5 == 0) picked.push_back("no such value");
        f.choices = picked;
      }
      selected.emplace_back(f, facet.source);
      ++selections;
    }
    std::string search = rng() % 4 == 0 ? "cells 1" : "";

    std::vector<FacetFilter> wire;
    for (const auto& [f, src] : selected) wire.push_back(f);
    QueryPlan q = compile_entity_set(s.view, {kStudy, wire, search, {}, 1000, 0});
    check_policy_soundness(q, s.model);
    auto got = rids(execute(q, *snap));
    auto expected = rid_set(oracle.entity_set(kStudy, selected, search));
    CHECK(std::set<std::string>(got.begin(), got.end()) == expected);
    CHECK(got.size() == expected.size());
    nonempty_results += !expected.empty();

    for (const auto& facet : fp.facets) {
      QueryPlan fq = compile_facet_values(s.view, {kStudy, entry(facet.source), wire, search, 1000, 0});
      check_policy_soundness(fq, s.model);
      ResultSet rs = execute(fq, *snap);
      Oracle::Filters others, with_own;
      bool own = false;
      for (const auto& sel : selected) {
        with_own.push_back(sel);
        if (sel.second.same_path(facet.source)) own = true;
        else others.push_back(sel);
      }
      auto counts = oracle.facet_counts(kStudy, facet.source, others, search);
      CHECK(rs.rows.size() == counts.size());
      CHECK(rs.total == counts.size());
      for (std::size_t i = 0; i < rs.rows.size(); ++i) {
        const json& r = rs.rows[i];
        Value v = r["value"].is_null() ? Value{} : value_from_json(r["value"], facet.source.end_type);
        auto it = counts.find(v.key());
        REQUIRE(it != counts.end());
        CHECK(it->second.second == r["count"].get<std::size_t>());
        if (i > 0) {
          const json& prev = rs.rows[i - 1];
          CHECK(prev["count"].get<std::size_t>() >= r["count"].get<std::size_t>());
        }
      }
      if (own) {
        // Applying the facet's own selection can only lower its counts.
        auto narrowed = oracle.facet_counts(kStudy, facet.source, with_own, search);
        for (const auto& [key, vc] : narrowed) {
          REQUIRE(counts.count(key));
          CHECK(counts.at(key).second >= vc.second);
        }
      }
    }
  }
  CHECK(selections >= 20);
  CHECK(nonempty_results >= 5);
}

TEST_CASE("anatomical source aggregates equal the nested-loop oracle") {
  Demo d;
  auto snap = d.store.snapshot();
  for (const ClientContext& client : {ClientContext::anonymous(), curator()}) {
    Session s(*snap->catalog, client);
    Oracle oracle(*snap, s.model);
    const ResolvedSource& src = s.annotations.table(kStudy)->resolved.at("Anatomical_Source");
    CHECK(src.hops.size() == 5);
    CHECK(src.multivalued);
    CHECK(src.aggregate == std::optional<Aggregate>(Aggregate::ArrayD));

    std::size_t studies = 0, with_tissue = 0;
    for (const Row* study : oracle.rows(kStudy)) {
      const std::string rid = study->at("RID").text();
      auto plans = compile_record(s.view, kStudy, rid);
      const RecordPlan* anat = nullptr;
      for (const auto& p : plans)
        if (p.name == "Anatomical_Source") anat = &p;
      REQUIRE(anat);
      check_policy_soundness(anat->plan, s.model);
      ResultSet arr = execute(anat->plan, *snap);
      REQUIRE(arr.rows.size() == 1);
      json expected = json::array();
      for (const auto& v : oracle.distinct_values(*study, src)) expected.push_back(value_to_json(v));
      // Tissue.Name is a key, so array_d yields whole Tissue rows ordered by Name.
      json names = json::array();
      for (const auto& t : arr.rows[0]["value"]) {
        CHECK(t.contains("RID"));
        names.push_back(t["Name"]);
      }
      CHECK(names == expected);

      QueryPlan cnt = anat->plan;
      cnt.aggregate = Aggregate::CntD;
      ResultSet c = execute(cnt, *snap);
      CHECK(c.rows[0]["value"] == expected.size());
      CHECK(c.rows[0]["value"].get<std::size_t>() == arr.rows[0]["value"].size());
      ++studies;
      with_tissue += !expected.empty();
    }
    CHECK(studies > 0);
    CHECK(with_tissue > 0);
  }
}

TEST_CASE("record plans") {
  Demo d;
  auto snap = d.store.snapshot();
  Session anon(*snap->catalog, ClientContext::anonymous());
  Oracle oracle(*snap, anon.model);
  const std::string rid = oracle.rows(kStudy).front()->at("RID").text();

  auto plans = compile_record(anon.view, kStudy, rid);
  std::vector<std::string> roles, names;
  for (const auto& p : plans) {
    roles.push_back(record_role_name(p.role));
    names.push_back(p.name);
    check_policy_soundness(p.plan, anon.model);
  }
  CHECK(roles == std::vector<std::string>{"core", "property", "property", "relationship", "relationship"});
  CHECK(names == std::vector<std::string>{"", "Experiment_Type", "Anatomical_Source", "Experiments", "Study File"});
  ResultSet core = execute(plans[0].plan, *snap);
  REQUIRE(core.rows.size() == 1);
  CHECK(core.rows[0]["RID"] == rid);
  CHECK_FALSE(core.rows[0].contains("Curation_Status"));
  CHECK(plans[3].plan.limit == std::optional<std::size_t>(kRelatedPageSize));

  // Each declared non-scalar property is planned exactly once.
  TablePlan tp = plan(kStudy, "detailed", anon.model, anon.annotations);
  for (const auto& prop : tp.properties) {
    auto n = std::count(names.begin(), names.end(), prop.name);
    CHECK(n == (prop.kind == PropertyKind::Pseudo ? 1 : 0));
  }

  // The compact context adds the Summary composition and its dependencies.
  auto compact = compile_record(anon.view, kStudy, rid, "compact");
  std::vector<std::string> compact_names;
  for (const auto& p : compact)
    if (p.role != RecordPlan::Role::Relationship) compact_names.push_back(p.name);
  CHECK(compact_names == std::vector<std::string>{"", "Experiment_Type", "Anatomical_Source", "Num_Replicates"});
  for (const auto& p : compact)
    if (p.name == "Num_Replicates") CHECK(p.plan.aggregate == std::optional<Aggregate>(Aggregate::CntD));

  // Unreleased rows are missing only at execution.
  std::string hidden;
  for (const auto& row : snap->data(kStudy).rows)
    if (!(row.at("Curation_Status") == Value{"Release"})) hidden = row.at("RID").text();
  auto hidden_plans = compile_record(anon.view, kStudy, hidden);
  CHECK(execute(hidden_plans[0].plan, *snap).rows.empty());
  CHECK_THROWS_AS(compile_record(anon.view, kStudy, "not a rid"), InvalidArgument);

  // No relationships: only the core plan.
  const std::string file = snap->data(kStudyFile).rows.front().at("RID").text();
  CHECK(compile_record(anon.view, kStudyFile, file).size() == 1);
}

TEST_CASE("related listings carry the related table's row policy") {
  Catalog c = demo::catalog();
  RowPolicy rp;
  rp.rules.push_back(RowPolicyRule{{"*"}, RowFilter{"Experiment_Type", {"RNA-Seq"}}});
  c.find_table(kExperiment)->row_policy = rp;
  Store store(c);
  demo::populate(store);
  auto snap = store.snapshot();
  Session anon(c, ClientContext::anonymous());
  Oracle oracle(*snap, anon.model);
  std::size_t checked = 0;
  for (const Row* study : oracle.rows(kStudy)) {
    auto plans = compile_record(anon.view, kStudy, study->at("RID").text());
    const QueryPlan& related = plans[3].plan;
    REQUIRE(plans[3].name == "Experiments");
    REQUIRE(related.instances.size() == 2);
    REQUIRE(related.instances[1].policy);
    CHECK(related.instances[1].policy->terms == std::vector<RowFilter>{RowFilter{"Experiment_Type", {"RNA-Seq"}}});
    for (const auto& r : execute(related, *snap).rows) {
      CHECK(r["Experiment_Type"] == "RNA-Seq");
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("picker applies the selection filter") {
  Demo d;
  auto snap = d.store.snapshot();
  Session cur(*snap->catalog, curator());
  PickerPlan pp = compile_picker(cur.view, {"RNASeq", "Experiment_Purification_Protocol_fkey"}, json::object());
  CHECK(pp.diagnostics.empty());
  ResultSet rs = execute(pp.plan, *snap);
  CHECK(rs.total == 3);
  for (const auto& r : rs.rows) CHECK(r["Category"] == "Purification");

  PickerPlan plain = compile_picker(cur.view, {"RNASeq", "Experiment_Study_fkey"}, json::object());
  CHECK(plain.plan.conditions.empty());
  CHECK(execute(plain.plan, *snap).total == snap->data(kStudy).rows.size());

  Session anon(*snap->catalog, ClientContext::anonymous());
  CHECK_THROWS_AS(compile_picker(anon.view, {"RNASeq", "Study_Curation_Status_fkey"}, json::object()), PlanError);
}

TEST_CASE("picker interpolates form values and prunes hidden filters") {
  Catalog c = demo::catalog();
  Table* exp = c.find_table(kExperiment);
  for (auto& fk : exp->foreign_keys) {
    if (fk.name.name == "Experiment_Purification_Protocol_fkey")
      fk.annotations[tags::kForeignKey] = {
          {"selection_filter", {{{"source", "Category"}, {"choices", {"{{{Category}}}"}}}}}};
    if (fk.name.name == "Experiment_Study_fkey")
      fk.annotations[tags::kForeignKey] = {
          {"selection_filter", {{{"source", "Curation_Status"}, {"choices", {"Release"}}}}}};
  }
  Store store(c);
  demo::populate(store);
  auto snap = store.snapshot();

  Session cur(c, curator());
  PickerPlan lib = compile_picker(cur.view, {"RNASeq", "Experiment_Purification_Protocol_fkey"},
                                  {{"Category", "Library Prep"}});
  ResultSet rs = execute(lib.plan, *snap);
  CHECK(rs.total == 3);
  for (const auto& r : rs.rows) CHECK(r["Category"] == "Library Prep");

  PickerPlan released = compile_picker(cur.view, {"RNASeq", "Experiment_Study_fkey"}, json::object());
  CHECK(released.diagnostics.empty());
  CHECK(released.plan.conditions.size() == 1);

  // Anonymous cannot see Curation_Status: the filter is dropped with a warning.
  Catalog open = c;
  open.find_table(kExperiment)->acls.grants[Right::Insert] = {"*"};
  Session anon(open, ClientContext::anonymous());
  PickerPlan pruned = compile_picker(anon.view, {"RNASeq", "Experiment_Study_fkey"}, json::object());
  REQUIRE(pruned.diagnostics.size() == 1);
  CHECK(pruned.diagnostics[0].severity == Diagnostic::Severity::Warning);
  CHECK(pruned.plan.conditions.empty());
}
