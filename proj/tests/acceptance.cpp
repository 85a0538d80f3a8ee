// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <sstream>

#include "annotation/annotation.hpp"
#include "common/error.hpp"
#include "demo/demo.hpp"
#include "er/er.hpp"
#include "query/compile.hpp"
#include "render/render.hpp"
#include "service/engine.hpp"
#include "support/expected_model.hpp"
#include "support/integrity.hpp"
#include "support/markdown_fuzz.hpp"
#include "support/oracle.hpp"

using namespace modeladapt;
using modeladapt::testing::Oracle;
namespace fs = std::filesystem;

namespace {

const TableRef kStudy{"RNASeq", "Study"};
const TableRef kExperiment{"RNASeq", "Experiment"};
const TableRef kProtocol{"RNASeq", "Protocol"};
const std::string kVisibleColumns = "tag:isrd.isi.edu,2016:visible-columns";
const std::string kTableDisplay = "tag:isrd.isi.edu,2016:table-display";

using Headers = std::map<std::string, std::string>;
const Headers kCuratorHeaders{{"x-client-id", "curator-1"}, {"x-client-roles", "curator"}};

ClientContext curator() { return ClientContext::make("curator-1", {"curator"}); }

// Collects failed expectations; the first few messages go on the FAIL line.
struct Verdict {
  std::size_t failures = 0;
  std::vector<std::string> notes;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures;
    if (notes.size() < 3) notes.push_back(what);
  }
};

struct Local {
  RoleBasedModel model;
  ValidatedAnnotations annotations;
  ModelView view{model, annotations};
  Local(const Catalog& c, const ClientContext& client)
      : model(prune_model(c, client)), annotations(validate_annotations(model)) {}
  Local(const Local&) = delete;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json call(Engine& e, const std::string& path, const Headers& h, std::map<std::string, std::string> q, int* status) {
  Response r = e.handle(Request{"GET", path, std::move(q), h, {}});
  *status = r.status;
  return json::parse(r.body);
}

std::vector<std::string> page_rids(const json& page) {
  std::vector<std::string> out;
  for (const auto& r : page["rows"]) out.push_back(r["RID"]);
  return out;
}

std::set<std::string> rid_set(const std::vector<const Row*>& rows) {
  std::set<std::string> out;
  for (const Row* r : rows) out.insert(r->at("RID").text());
  return out;
}

json entry(const ResolvedSource& s) { return {{"source", s.source_json()}}; }

// ---- criteria -----------------------------------------------------------

void role_pruning(Verdict& v) {
  Store store{demo::catalog()};
  Engine engine{store};
  int status = 0;
  json anon = call(engine, "/model", {}, {}, &status);
  v.expect(status == 200, "anonymous /model status");
  v.expect(anon == testing::expected_model(false), "anonymous model document differs from expectation");
  v.expect(anon.dump().find("Curation_Status") == std::string::npos, "anonymous document mentions Curation_Status");
  json cur = call(engine, "/model", kCuratorHeaders, {}, &status);
  v.expect(cur == testing::expected_model(true), "curator model document differs from expectation");
  bool editable = false;
  for (const auto& c : cur["schemas"]["RNASeq"]["tables"]["Study"]["columns"])
    if (c["name"] == "Curation_Status") editable = c["rights"]["update"] == true;
  v.expect(editable, "curator lacks update on Curation_Status");
}

void row_policy(Verdict& v) {
  Store store{demo::catalog()};
  demo::populate(store);
  Engine engine{store};
  auto snap = store.snapshot();
  Local anon(*snap->catalog, ClientContext::anonymous());
  Oracle oracle(*snap, anon.model);
  // The oracle's own notion of "released", straight from the raw rows.
  std::set<std::string> released;
  for (const auto& r : snap->data(kStudy).rows)
    if (r.at("Curation_Status") == Value{"Release"}) released.insert(r.at("RID").text());
  v.expect(rid_set(oracle.rows(kStudy)) == released, "oracle visibility disagrees with raw status");

  int status = 0;
  json page = call(engine, "/entity/RNASeq/Study", {}, {{"limit", "100000"}}, &status);
  auto got = page_rids(page);
  v.expect(status == 200, "anonymous /entity status");
  v.expect(std::set<std::string>(got.begin(), got.end()) == released && got.size() == released.size(),
           "anonymous rows != released rows");
  json all = call(engine, "/entity/RNASeq/Study", kCuratorHeaders, {{"limit", "100000"}}, &status);
  v.expect(all["rows"].size() == snap->data(kStudy).rows.size(), "curator does not see all rows");
  v.expect(!released.empty() && released.size() < snap->data(kStudy).rows.size(), "fixture lacks mixed statuses");
}

void source_resolution(Verdict& v) {
  Store store{demo::catalog()};
  demo::populate(store);
  auto snap = store.snapshot();
  for (const ClientContext& client : {ClientContext::anonymous(), curator()}) {
    Local s(*snap->catalog, client);
    Oracle oracle(*snap, s.model);
    const auto* ta = s.annotations.table(kStudy);
    if (!ta || !ta->resolved.count("Anatomical_Source")) {
      v.expect(false, "Anatomical_Source not resolved");
      return;
    }
    const ResolvedSource& src = ta->resolved.at("Anatomical_Source");
    v.expect(src.hops.size() == 5, "hops != 5");
    v.expect(src.multivalued, "not multivalued");
    v.expect(src.aggregate == std::optional<Aggregate>(Aggregate::ArrayD), "aggregate != array_d");
    for (const Row* study : oracle.rows(kStudy)) {
      const std::string rid = study->at("RID").text();
      const RecordPlan* anat = nullptr;
      auto plans = compile_record(s.view, kStudy, rid);
      for (const auto& p : plans)
        if (p.name == "Anatomical_Source") anat = &p;
      if (!anat) {
        v.expect(false, "no Anatomical_Source plan for " + rid);
        continue;
      }
      ResultSet arr = execute(anat->plan, *snap);
      json expected = json::array();
      for (const auto& val : oracle.distinct_values(*study, src)) expected.push_back(value_to_json(val));
      json names = json::array();
      for (const auto& t : arr.rows.at(0)["value"]) names.push_back(t["Name"]);
      v.expect(names == expected, "array_d mismatch for " + rid);
      QueryPlan cnt = anat->plan;
      cnt.aggregate = Aggregate::CntD;
      json c = execute(cnt, *snap).rows.at(0)["value"];
      v.expect(c == expected.size(), "cnt_d mismatch for " + rid);
      v.expect(c.get<std::size_t>() == arr.rows[0]["value"].size(), "cnt_d != |array_d| for " + rid);
    }
  }
}

void facets(Verdict& v) {
  Store store{demo::catalog()};
  demo::populate(store);
  auto snap = store.snapshot();
  std::mt19937 rng(2024);
  for (int state = 0; state < 20; ++state) {
    Local s(*snap->catalog, state % 2 ? curator() : ClientContext::anonymous());
    Oracle oracle(*snap, s.model);
    TablePlan fp = plan(kStudy, "filter", s.model, s.annotations);
    Oracle::Filters selected;
    for (const auto& facet : fp.facets) {
      if (rng() % 2) continue;
      std::vector<Value> present;
      for (const auto& [k, vc] : oracle.facet_counts(kStudy, facet.source, {})) present.push_back(vc.first);
      if (present.empty()) continue;
      FacetFilter f;
      f.source = entry(facet.source);
      if (facet.kind == FacetKind::Range) {
        std::vector<Value> nn;
        for (const auto& x : present)
          if (!x.is_null()) nn.push_back(x);
        if (nn.empty()) continue;
        Value a = nn[rng() % nn.size()], b = nn[rng() % nn.size()];
        if (b < a) std::swap(a, b);
        f.range = std::make_pair(value_to_json(a), rng() % 3 ? value_to_json(b) : json(nullptr));
      } else {
        std::vector<json> picked;
        for (unsigned n = 1 + rng() % 3; n > 0; --n) picked.push_back(value_to_json(present[rng() % present.size()]));
        f.choices = picked;
      }
      selected.emplace_back(f, facet.source);
    }
    std::vector<FacetFilter> wire;
    for (const auto& [f, src] : selected) wire.push_back(f);
    ResultSet rs = execute(compile_entity_set(s.view, {kStudy, wire, "", {}, 100000, 0}), *snap);
    std::set<std::string> got;
    for (const auto& r : rs.rows) got.insert(r["RID"].get<std::string>());
    v.expect(got == rid_set(oracle.entity_set(kStudy, selected)), "result set mismatch in state " + std::to_string(state));

    for (const auto& facet : fp.facets) {
      ResultSet fv = execute(compile_facet_values(s.view, {kStudy, entry(facet.source), wire, "", 100000, 0}), *snap);
      Oracle::Filters others, with_own;
      for (const auto& sel : selected) {
        with_own.push_back(sel);
        if (!sel.second.same_path(facet.source)) others.push_back(sel);
      }
      auto counts = oracle.facet_counts(kStudy, facet.source, others);
      bool same = fv.rows.size() == counts.size();
      for (const auto& r : fv.rows) {
        Value val = r["value"].is_null() ? Value{} : value_from_json(r["value"], facet.source.end_type);
        auto it = counts.find(val.key());
        same = same && it != counts.end() && it->second.second == r["count"].get<std::size_t>();
      }
      v.expect(same, "facet counts mismatch for " + facet.display_name + " in state " + std::to_string(state));
      // Excluding its own selection never lowers a facet's counts.
      for (const auto& [key, vc] : oracle.facet_counts(kStudy, facet.source, with_own))
        v.expect(counts.count(key) && counts.at(key).second >= vc.second,
                 "monotonicity broken for " + facet.display_name);
    }
  }
}

void context_fallback(Verdict& v) {
  Catalog c = demo::catalog();
  Local s(c, curator());
  auto strip = [](TablePlan p) {
    json j = p.to_json();
    j.erase("context");
    return j;
  };
  v.expect(strip(plan(kStudy, "entry/create", s.model, s.annotations)) == strip(plan(kStudy, "entry", s.model, s.annotations)),
           "entry/create != entry");
  json list = json::array({"Title", "Release_Date"});
  Catalog star = demo::catalog(), exact = demo::catalog();
  star.find_table(kStudy)->annotations[kVisibleColumns] = {{"*", list}};
  exact.find_table(kStudy)->annotations[kVisibleColumns] = {{"detailed", list}};
  Local a(star, curator()), b(exact, curator());
  TablePlan pa = plan(kStudy, "detailed", a.model, a.annotations);
  v.expect(pa.to_json() == plan(kStudy, "detailed", b.model, b.annotations).to_json(), "detailed does not fall back to *");
  std::vector<std::string> names;
  for (const auto& p : pa.properties) names.push_back(p.name);
  v.expect(names == std::vector<std::string>{"Title", "Release_Date"}, "fallback property list");
}

void heuristic_defaults(Verdict& v) {
  const char* doc = R"({
    "acls": {"select": ["*"]},
    "schemas": {"H": {"tables": {
      "V": {"columns": [{"name": "Name", "type": "text", "nullable": false}],
            "keys": [{"name": "V_Name_key", "columns": ["Name"]}]},
      "T": {"columns": [{"name": "A", "type": "int", "nullable": false}, {"name": "B", "type": "text"}],
            "foreign_keys": [{"name": ["H", "T_B_fkey"], "from_columns": ["B"],
                              "to": {"schema": "H", "table": "V", "columns": ["Name"]}}]},
      "W": {"columns": [{"name": "accession_number", "type": "text"},
                        {"name": "T", "type": "text", "nullable": false},
                        {"name": "Created", "type": "date"}],
            "foreign_keys": [{"name": ["H", "W_T_fkey"], "from_columns": ["T"],
                              "to": {"schema": "H", "table": "T", "columns": ["RID"]}}]}}}}})";
  Local s(parse_catalog(doc), ClientContext::anonymous());
  auto names = [](const TablePlan& p) {
    std::vector<std::string> out;
    for (const auto& x : p.properties) out.push_back(x.name);
    return out;
  };
  const std::vector<std::string> sys{"RID", "RCT", "RMT", "RCB", "RMB"};
  auto with_sys = [&](std::vector<std::string> head) {
    head.insert(head.end(), sys.begin(), sys.end());
    return head;
  };
  TablePlan t = plan({"H", "T"}, "detailed", s.model, s.annotations);
  TablePlan vv = plan({"H", "V"}, "detailed", s.model, s.annotations);
  TablePlan w = plan({"H", "W"}, "detailed", s.model, s.annotations);
  v.expect(names(t) == with_sys({"A", "T_B_fkey"}), "T properties");
  v.expect(names(vv) == with_sys({"Name"}), "V properties");
  v.expect(names(w) == with_sys({"accession_number", "W_T_fkey", "Created"}), "W properties");
  // Row name: title > name > accession_number > shortest key.
  v.expect(vv.row_name == "{{{Name}}}", "V row name");
  v.expect(w.row_name == "{{{accession_number}}}", "W row name");
  v.expect(t.row_name == "{{{RID}}}", "T row name");
  // Sort: the shortest key.
  v.expect(vv.sort == std::vector<SortKey>{{"Name", false}}, "V sort");
  v.expect(t.sort == std::vector<SortKey>{{"RID", false}}, "T sort");
  v.expect(w.sort == std::vector<SortKey>{{"RID", false}}, "W sort");
  // Relationships: inbound fkeys.
  v.expect(t.relationships.size() == 1 && t.relationships[0].fkey == FkeyName{"H", "W_T_fkey"}, "T relationships");
  v.expect(vv.relationships.size() == 1 && vv.relationships[0].fkey == FkeyName{"H", "T_B_fkey"}, "V relationships");
  v.expect(w.relationships.empty(), "W relationships");
}

void annotation_pruning(Verdict& v) {
  Catalog c = demo::catalog();
  json compact = json::array({"RID", "Title", {{"sourcekey", "Experiment_Type"}}, {{"sourcekey", "No_Such_Source"}},
                              {{"sourcekey", "Anatomical_Source"}}});
  c.find_table(kStudy)->annotations[kVisibleColumns] = {{"compact", compact}};
  Local s(c, curator());
  v.expect(s.annotations.error_count() == 1, "error count != 1");
  json kept = s.annotations.pruned.find_table(kStudy)->annotations.at(kVisibleColumns)["compact"];
  json expected = compact;
  expected.erase(3);
  v.expect(kept == expected, "surviving entries changed count or order");
}

void crud_integrity(Verdict& v) {
  std::mt19937 rng(99);
  const Catalog cat = demo::catalog();
  std::size_t accepted = 0, rejected = 0;
  for (int round = 0; round < 4; ++round) {
    Store store(cat);
    demo::populate(store, static_cast<std::uint32_t>(round + 11));
    const std::vector<ClientContext> clients = {curator(), ClientContext::make("curator-2", {"curator"}),
                                                ClientContext::make("root", {"admin"})};
    std::map<std::string, std::string> last_rmt;
    for (int step = 0; step < 80; ++step) {
      auto snap = store.snapshot();
      const ClientContext who = clients[rng() % clients.size()];
      auto pick = [&](const TableRef& t) -> std::string {
        const auto& rows = snap->data(t).rows;
        return rows.empty() || rng() % 6 == 0 ? "Z-ZZZZ" : rows[rng() % rows.size()].at("RID").text();
      };
      std::string rid;
      bool ok = true;
      try {
        switch (rng() % 5) {
          case 0: rid = store.insert(kExperiment, {{{"Study", pick(kStudy)}}}, who)[0].at("RID").text(); break;
          case 1:
            rid = pick(kExperiment);
            store.update(kExperiment, {rid}, {{"Study", pick(kStudy)}}, who);
            break;
          case 2: store.remove(kStudy, {pick(kStudy)}, who); break;
          case 3:
            rid = store.insert(kProtocol, {{{"Name", "Protocol " + std::to_string(rng() % 9)}, {"Category", "x"}}}, who)[0]
                      .at("RID")
                      .text();
            break;
          default: store.remove(kExperiment, {pick(kExperiment)}, who); break;
        }
      } catch (const ConstraintError&) {
        ok = false;
      } catch (const NotFound&) {
        ok = false;
      }
      auto after = store.snapshot();
      v.expect(testing::integrity_violations(cat, testing::state_of(*after)).empty(), "integrity violated");
      ++(ok ? accepted : rejected);
      if (!ok) {
        v.expect(testing::state_of(*after) == testing::state_of(*snap), "rejected write changed state");
        continue;
      }
      if (!rid.empty())
        for (const Table* t : cat.tables())
          if (const Row* row = after->data(t->ref()).find(rid)) {
            v.expect(row->at("RMB") == Value{who.id}, "RMB != acting identity");
            if (!snap->data(t->ref()).find(rid)) v.expect(row->at("RCB") == Value{who.id}, "RCB != acting identity");
            v.expect(!last_rmt.count(rid) || value_to_json(row->at("RMT")).get<std::string>() >= last_rmt[rid],
                     "RMT decreased");
            last_rmt[rid] = value_to_json(row->at("RMT")).get<std::string>();
          }
      std::set<std::string> rids;
      for (const Table* t : cat.tables())
        for (const auto& row : after->data(t->ref()).rows) v.expect(rids.insert(row.at("RID").text()).second, "duplicate RID");
    }
  }
  v.expect(accepted > 40 && rejected > 40, "both outcomes must be exercised");
}

void rendering(Verdict& v) {
  const fs::path dir = MODELADAPT_TEST_DATA_DIR;
  std::string html = markdown_to_html(read_file(dir / "golden/iframe_cellbrowser.md"));
  v.expect(html == read_file(dir / "golden/iframe_cellbrowser.html"), "iframe golden mismatch");
  v.expect(html.find("width=\"1000\" height=\"600\"") != std::string::npos, "iframe size");
  v.expect(format_value(Value{std::int64_t{1234567}}, ScalarType::Int) == "1,234,567", "thousands separator");
  std::mt19937 rng(5);
  const std::regex ymd(R"(\d{4}-\d{2}-\d{2})");
  for (int i = 0; i < 1000; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", 1900 + static_cast<int>(rng() % 200), 1 + static_cast<int>(rng() % 12),
                  1 + static_cast<int>(rng() % 28));
    auto d = parse_date(buf);
    std::string out = d ? format_value(Value{*d}, ScalarType::Date) : "";
    v.expect(out == buf && std::regex_match(out, ymd), std::string("date ") + buf);
  }
  std::mt19937 fuzz(17);
  for (int i = 0; i < 10000; ++i) {
    std::string out = markdown_to_html(testing::random_markdown(fuzz));
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    v.expect(out.find("<script") == std::string::npos, "fuzz emitted <script");
  }
}

void live_evolution(Verdict& v) {
  const fs::path dir = fs::temp_directory_path() / ("modeladapt-accept-" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  const fs::path file = dir / "catalog.json";
  Catalog start = demo::catalog();
  // The fixture already orders Study by RMT; start without it so the change is observable.
  json display = start.find_table(kStudy)->annotations.at(kTableDisplay);
  display.erase("*");
  start.find_table(kStudy)->annotations[kTableDisplay] = display;
  std::ofstream(file) << serialize_catalog(start);

  Store store{start};
  demo::populate(store);
  // Touch a few early rows so RMT order differs from RID order at the top too.
  auto early = store.snapshot()->data(kStudy).rows;
  for (std::size_t i = 0; i < 3 && i < early.size(); ++i)
    store.update(kStudy, {early[i].at("RID").text()}, {{"Summary", "revised"}}, curator());
  Engine engine{store, EngineOptions{file}};
  int status = 0;
  auto before = page_rids(call(engine, "/entity/RNASeq/Study", kCuratorHeaders, {{"limit", "100000"}}, &status));
  v.expect(std::is_sorted(before.begin(), before.end(), rid_less), "initial order is not by RID");

  display["*"] = {{"row_order", {{{"column", "RMT"}, {"descending", true}}}}};
  const std::string cmd = std::string("'") + MODELADAPT_CLI + "' set-annotation '" + file.string() +
                          "' --schema RNASeq --table Study --tag '" + kTableDisplay + "' --value '" + display.dump() +
                          "' > /dev/null";
  v.expect(std::system(cmd.c_str()) == 0, "CLI set-annotation failed");

  json after = call(engine, "/entity/RNASeq/Study", kCuratorHeaders, {{"limit", "100000"}}, &status);
  std::vector<std::string> rmt;
  for (const auto& r : after["rows"]) rmt.push_back(r["values"]["RMT"]);
  v.expect(status == 200, "status after change");
  v.expect(std::is_sorted(rmt.rbegin(), rmt.rend()), "rows are not ordered by RMT descending");
  v.expect(page_rids(after) != before, "order did not change");
  v.expect(after["rows"].size() == before.size(), "row count changed");
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
      {"role pruning", role_pruning},
      {"row policy", row_policy},
      {"source resolution", source_resolution},
      {"facets", facets},
      {"context fallback", context_fallback},
      {"heuristic defaults", heuristic_defaults},
      {"annotation pruning", annotation_pruning},
      {"crud and system columns", crud_integrity},
      {"rendering", rendering},
      {"live evolution", live_evolution},
  };
  int failed = 0, n = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      check(v);
    } catch (const std::exception& e) {
      v.expect(false, std::string("threw: ") + e.what());
    }
    ++n;
    if (v.failures == 0) {
      std::cout << "PASS " << n << " " << name << '\n';
    } else {
      ++failed;
      std::cout << "FAIL " << n << " " << name << " (" << v.failures << " failed checks)";
      for (const auto& note : v.notes) std::cout << "; " << note;
      std::cout << '\n';
    }
  }
  return failed ? 1 : 0;
}
