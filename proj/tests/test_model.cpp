#include <doctest.h>

#include <random>

#include "common/error.hpp"
#include "model/catalog.hpp"
#include "support/random_catalog.hpp"

using namespace modeladapt;
using modeladapt::testing::random_catalog;

namespace {

const char* kStudyDoc = R"({
  "owners": ["admin"],
  "acls": {"select": ["*"]},
  "schemas": {"RNASeq": {"tables": {
    "Study": {"columns": [{"name": "Title", "type": "text", "nullable": false}]},
    "Experiment": {
      "columns": [{"name": "Study", "type": "text", "nullable": false},
                  {"name": "Experiment_Type", "type": "text"}],
      "foreign_keys": [{"name": ["RNASeq", "Experiment_Study_fkey"], "from_columns": ["Study"],
                        "to": {"schema": "RNASeq", "table": "Study", "columns": ["RID"]}}]}
  }}}
})";

std::vector<std::string> column_names(const Table& t) {
  std::vector<std::string> out;
  for (const auto& c : t.columns) out.push_back(c.name);
  return out;
}

}  // namespace

TEST_CASE("minimal document gets system columns and RID key") {
  Catalog c = parse_catalog(R"({"schemas": {"S": {"tables": {"T": {"columns": [{"name": "Title", "type": "text"}]}}}}})");
  const Table* t = c.find_table({"S", "T"});
  REQUIRE(t);
  CHECK(column_names(*t) == std::vector<std::string>{"RID", "RCT", "RMT", "RCB", "RMB", "Title"});
  CHECK(t->is_key({"RID"}));
  for (const auto& col : t->columns) {
    if (is_system_column_name(col.name)) {
      CHECK(col.is_system);
      CHECK_FALSE(col.nullable);
    }
  }
  CHECK(t->find_column("RCT")->type == ScalarType::Timestamp);
  CHECK(t->find_column("RMB")->type == ScalarType::Text);
}

TEST_CASE("fixture fkey resolves Experiment to Study") {
  Catalog c = parse_catalog(kStudyDoc);
  auto [owner, fk] = c.find_fkey({"RNASeq", "Experiment_Study_fkey"});
  REQUIRE(fk);
  CHECK(owner->name == "Experiment");
  CHECK(fk->to_table == TableRef{"RNASeq", "Study"});
  auto inbound = c.inbound_fkeys({"RNASeq", "Study"});
  REQUIRE(inbound.size() == 1);
  CHECK(inbound[0] == fk);
}

TEST_CASE("structural violations") {
  SUBCASE("fkey to non-key columns") {
    CHECK_THROWS_AS(parse_catalog(R"({"schemas": {"S": {"tables": {
      "A": {"columns": [{"name": "x", "type": "text"}]},
      "B": {"columns": [{"name": "y", "type": "text"}],
            "foreign_keys": [{"name": ["S", "B_fk"], "from_columns": ["y"], "to": {"schema": "S", "table": "A", "columns": ["x"]}}]}}}}})"),
                    ModelError);
  }
  SUBCASE("dangling target") {
    CHECK_THROWS_AS(parse_catalog(R"({"schemas": {"S": {"tables": {
      "B": {"columns": [{"name": "y", "type": "text"}],
            "foreign_keys": [{"name": ["S", "B_fk"], "from_columns": ["y"], "to": {"schema": "S", "table": "Z", "columns": ["RID"]}}]}}}}})"),
                    ModelError);
  }
  SUBCASE("type mismatch across fkey") {
    CHECK_THROWS_AS(parse_catalog(R"({"schemas": {"S": {"tables": {
      "A": {"columns": []},
      "B": {"columns": [{"name": "y", "type": "int"}],
            "foreign_keys": [{"name": ["S", "B_fk"], "from_columns": ["y"], "to": {"schema": "S", "table": "A", "columns": ["RID"]}}]}}}}})"),
                    ModelError);
  }
  SUBCASE("duplicate columns") {
    CHECK_THROWS_AS(parse_catalog(R"({"schemas": {"S": {"tables": {"A": {"columns": [{"name": "x"}, {"name": "x"}]}}}}})"),
                    ModelError);
  }
  SUBCASE("key over missing column") {
    CHECK_THROWS_AS(parse_catalog(R"({"schemas": {"S": {"tables": {"A": {"columns": [], "keys": [{"name": "k", "columns": ["nope"]}]}}}}})"),
                    ModelError);
  }
  SUBCASE("bad identifier") {
    CHECK_THROWS_AS(parse_catalog(R"({"schemas": {"S": {"tables": {"9A": {"columns": []}}}}})"), ModelError);
  }
  SUBCASE("row policy on non-text column") {
    CHECK_THROWS_AS(parse_catalog(R"({"schemas": {"S": {"tables": {"A": {"columns": [{"name": "n", "type": "int"}],
      "row_policy": {"rules": [{"roles": ["*"], "predicate": {"column": "n", "in": ["1"]}}]}}}}}})"),
                    ModelError);
  }
  SUBCASE("delete in column acl") {
    CHECK_THROWS_AS(parse_catalog(R"({"schemas": {"S": {"tables": {"A": {"columns": [{"name": "n", "acls": {"delete": ["*"]}}]}}}}})"),
                    ModelError);
  }
  SUBCASE("malformed JSON") { CHECK_THROWS_AS(parse_catalog("{\"schemas\": "), ParseError); }
  SUBCASE("wrong shape") { CHECK_THROWS_AS(parse_catalog(R"({"schemas": []})"), ParseError); }
}

TEST_CASE("identifier grammar") {
  CHECK(is_valid_identifier("Specimen Tissue"));
  CHECK(is_valid_identifier("_x9"));
  CHECK_FALSE(is_valid_identifier(""));
  CHECK_FALSE(is_valid_identifier(" x"));
  CHECK_FALSE(is_valid_identifier("a-b"));
}

TEST_CASE("model changes") {
  Catalog c = parse_catalog(kStudyDoc);
  const std::string before = serialize_catalog(c);

  SUBCASE("set-annotation stores verbatim and bumps version") {
    json payload = {{"row_order", {{{"column", "RMT"}, {"descending", true}}}}};
    Catalog next = apply_model_change(
        c, change::SetAnnotation{ElementRef::for_table({"RNASeq", "Study"}), "tag:isrd.isi.edu,2016:table-display", payload});
    CHECK(next.version == c.version + 1);
    CHECK(next.find_table({"RNASeq", "Study"})->annotations.at("tag:isrd.isi.edu,2016:table-display") == payload);
    CHECK(serialize_catalog(c) == before);
  }
  SUBCASE("add-column appends last") {
    Column col;
    col.name = "Cellbrowser_URL";
    Catalog next = apply_model_change(c, change::AddColumn{{"RNASeq", "Study"}, col});
    CHECK(next.find_table({"RNASeq", "Study"})->columns.back().name == "Cellbrowser_URL");
    CHECK(next.version == c.version + 1);
  }
  SUBCASE("drop-column used by fkey") {
    CHECK_THROWS_AS(apply_model_change(c, change::DropColumn{{"RNASeq", "Experiment"}, "Study"}), ModelError);
    CHECK(serialize_catalog(c) == before);
  }
  SUBCASE("drop-column after drop-fkey succeeds") {
    Catalog a = apply_model_change(c, change::DropFkey{{"RNASeq", "Experiment_Study_fkey"}});
    Catalog b = apply_model_change(a, change::DropColumn{{"RNASeq", "Experiment"}, "Study"});
    CHECK(b.version == c.version + 2);
    CHECK_FALSE(b.find_table({"RNASeq", "Experiment"})->find_column("Study"));
  }
  SUBCASE("system columns are not droppable") {
    CHECK_THROWS_AS(apply_model_change(c, change::DropColumn{{"RNASeq", "Study"}, "RMT"}), ModelError);
  }
  SUBCASE("add-table injects system columns") {
    Table t;
    t.schema = "Vocab";
    t.name = "Tissue";
    Column name;
    name.name = "Name";
    t.columns.push_back(name);
    Catalog next = apply_model_change(c, change::AddTable{t});
    CHECK(column_names(*next.find_table({"Vocab", "Tissue"})) ==
          std::vector<std::string>{"RID", "RCT", "RMT", "RCB", "RMB", "Name"});
  }
  SUBCASE("json form round-trips") {
    json j = {{"op", "set-annotation"},
              {"target", {{"schema", "RNASeq"}, {"table", "Study"}, {"column", "Title"}}},
              {"tag", "tag:misd.isi.edu,2015:display"},
              {"value", {{"name", "Study Title"}}}};
    ModelChange mc = model_change_from_json(j);
    CHECK(model_change_to_json(mc) == j);
    Catalog next = apply_model_change(c, mc);
    CHECK(next.find_table({"RNASeq", "Study"})->find_column("Title")->annotations.count("tag:misd.isi.edu,2015:display"));
  }
  SUBCASE("unknown op") { CHECK_THROWS_AS(model_change_from_json({{"op", "rename"}}), ParseError); }
}

TEST_CASE("property: serialize then parse is identity") {
  std::mt19937 rng(7);
  for (int i = 0; i < 200; ++i) {
    Catalog c = random_catalog(rng);
    json once = catalog_to_json(c);
    Catalog again = parse_catalog(serialize_catalog(c));
    CHECK(catalog_to_json(again) == once);
  }
}

TEST_CASE("property: every table has system columns and a RID key") {
  std::mt19937 rng(11);
  for (int i = 0; i < 100; ++i) {
    Catalog c = random_catalog(rng);
    for (const Table* t : c.tables()) {
      for (auto sys : kSystemColumns) CHECK(t->find_column(sys));
      CHECK(t->is_key({"RID"}));
    }
  }
}

TEST_CASE("property: change sequences keep inputs intact and versions monotone") {
  std::mt19937 rng(13);
  for (int i = 0; i < 50; ++i) {
    Catalog c = random_catalog(rng);
    std::int64_t last = c.version;
    for (int step = 0; step < 10; ++step) {
      auto tables = c.tables();
      const Table* t = tables[rng() % tables.size()];
      std::string before = serialize_catalog(c);
      ModelChange mc;
      switch (rng() % 4) {
        case 0: {
          Column col;
          col.name = "added_" + std::to_string(step);
          mc = change::AddColumn{t->ref(), col};
          break;
        }
        case 1: mc = change::DropColumn{t->ref(), t->columns.back().name}; break;
        case 2:
          mc = change::SetAnnotation{ElementRef::for_table(t->ref()), "tag:test", json(step)};
          break;
        default: mc = change::DeleteAnnotation{ElementRef::for_table(t->ref()), "tag:test"}; break;
      }
      try {
        Catalog next = apply_model_change(c, mc);
        CHECK(next.version > last);
        last = next.version;
        CHECK(serialize_catalog(c) == before);
        c = std::move(next);
      } catch (const ModelError&) {
        CHECK(serialize_catalog(c) == before);
      }
    }
  }
}
