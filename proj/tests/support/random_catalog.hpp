#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "model/catalog.hpp"

namespace modeladapt::testing {

inline const std::vector<std::string> kRolePool = {"*", "r1", "r2", "r3"};

inline json random_role_list(std::mt19937& rng) {
  json out = json::array();
  for (const auto& r : kRolePool)
    if (rng() % 3 == 0) out.push_back(r);
  return out;
}

inline json random_acl(std::mt19937& rng, bool column_level) {
  static const char* table_rights[] = {"enumerate", "select", "insert", "update", "delete"};
  json acl = json::object();
  for (int i = 0; i < (column_level ? 4 : 5); ++i)
    if (rng() % 2) acl[table_rights[i]] = random_role_list(rng);
  return acl;
}

/// Random valid catalog: tables with random scalar columns and fkeys to
/// earlier tables. With `with_policy`, acls and row policies are randomized.
inline Catalog random_catalog(std::mt19937& rng, bool with_policy = false) {
  static const char* types[] = {"text", "markdown", "int", "float", "boolean", "date", "timestamp"};
  json schemas = json::object();
  int nschemas = 1 + static_cast<int>(rng() % 2);
  std::vector<std::pair<std::string, std::string>> made;
  for (int s = 0; s < nschemas; ++s) {
    std::string sname = "S" + std::to_string(s);
    json tables = json::object();
    int ntables = 1 + static_cast<int>(rng() % 4);
    for (int t = 0; t < ntables; ++t) {
      std::string tname = "T" + std::to_string(s) + "_" + std::to_string(t);
      json cols = json::array();
      int ncols = static_cast<int>(rng() % 5);
      for (int c = 0; c < ncols; ++c) {
        json col = {{"name", "c" + std::to_string(c)}, {"type", types[rng() % 7]}, {"nullable", rng() % 2 == 0},
                    {"annotations", {{"tag:x", static_cast<int>(rng() % 100)}}}};
        if (with_policy && rng() % 3 == 0) col["acls"] = random_acl(rng, true);
        cols.push_back(col);
      }
      json fks = json::array();
      if (!made.empty() && rng() % 2) {
        auto& target = made[rng() % made.size()];
        json ref = {{"name", "ref"}, {"type", "text"}};
        if (with_policy && rng() % 3 == 0) ref["acls"] = random_acl(rng, true);
        cols.push_back(ref);
        fks.push_back({{"name", {sname, tname + "_ref_fkey"}},
                       {"from_columns", {"ref"}},
                       {"to", {{"schema", target.first}, {"table", target.second}, {"columns", {"RID"}}}}});
      }
      json table = {{"columns", cols}, {"foreign_keys", fks}};
      if (with_policy) {
        if (rng() % 2) table["acls"] = random_acl(rng, false);
        if (rng() % 3 == 0) {
          cols.push_back({{"name", "status"}, {"type", "text"}});
          table["columns"] = cols;
          json rules = json::array();
          int nrules = static_cast<int>(rng() % 3);
          for (int r = 0; r < nrules; ++r) {
            json rule = {{"roles", random_role_list(rng)}};
            if (rng() % 2) rule["predicate"] = {{"column", "status"}, {"in", {"v" + std::to_string(rng() % 3)}}};
            rules.push_back(rule);
          }
          table["row_policy"] = {{"rules", rules}};
        }
      } else if (rng() % 3 == 0) {
        table["acls"] = {{"select", {"*"}}, {"update", {"r1"}}};
      }
      if (rng() % 3 == 0 && ncols > 0) table["comment"] = "table " + tname;
      tables[tname] = table;
      made.emplace_back(sname, tname);
    }
    schemas[sname] = {{"tables", tables}};
  }
  json doc = {{"owners", {"admin"}}, {"schemas", schemas}};
  if (with_policy) doc["acls"] = random_acl(rng, false);
  return catalog_from_json(doc);
}

}  // namespace modeladapt::testing
