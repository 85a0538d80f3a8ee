#include "demo/demo.hpp"

#include <random>
#include <string>
#include <vector>

namespace modeladapt::demo {

namespace {

const char* const kCatalog = R"json({
  "owners": ["admin"],
  "acls": {"select": ["*"], "insert": ["curator"], "update": ["curator"], "delete": ["curator"]},
  "schemas": {
    "Vocab": {"tables": {
      "Curation_Status": {
        "columns": [{"name": "Name", "type": "text", "nullable": false},
                    {"name": "Description", "type": "markdown"}],
        "keys": [{"name": "Curation_Status_Name_key", "columns": ["Name"]}],
        "acls": {"select": ["curator"]}},
      "Species": {
        "columns": [{"name": "Name", "type": "text", "nullable": false},
                    {"name": "Description", "type": "markdown"}],
        "keys": [{"name": "Species_Name_key", "columns": ["Name"]}]},
      "Tissue": {
        "columns": [{"name": "Name", "type": "text", "nullable": false},
                    {"name": "Description", "type": "markdown"}],
        "keys": [{"name": "Tissue_Name_key", "columns": ["Name"]}]},
      "Experiment_Type": {
        "columns": [{"name": "Name", "type": "text", "nullable": false},
                    {"name": "Description", "type": "markdown"}],
        "keys": [{"name": "Experiment_Type_Name_key", "columns": ["Name"]}]}
    }},
    "RNASeq": {"tables": {
      "Study": {
        "columns": [
          {"name": "Title", "type": "text", "nullable": false},
          {"name": "Summary", "type": "markdown"},
          {"name": "Release_Date", "type": "date"},
          {"name": "Cellbrowser_URL", "type": "text",
           "annotations": {"tag:isrd.isi.edu,2016:column-display": {
             "detailed": {"markdown_pattern": "::: iframe [Cell Browser]({{{Cellbrowser_URL}}}){width=1000 height=600}\n:::"}}}},
          {"name": "Curation_Status", "type": "text",
           "acls": {"select": ["curator"], "insert": ["curator"], "update": ["curator"]}}],
        "foreign_keys": [
          {"name": ["RNASeq", "Study_Curation_Status_fkey"], "from_columns": ["Curation_Status"],
           "to": {"schema": "Vocab", "table": "Curation_Status", "columns": ["Name"]}}],
        "row_policy": {"rules": [
          {"roles": ["*"], "predicate": {"column": "Curation_Status", "in": ["Release"]}},
          {"roles": ["curator"]}]},
        "annotations": {
          "tag:isrd.isi.edu,2019:source-definitions": {
            "columns": true,
            "fkeys": true,
            "sources": {
              "Experiment_Type": {
                "source": [{"inbound": ["RNASeq", "Experiment_Study_fkey"]}, "Experiment_Type"],
                "aggregate": "array_d",
                "markdown_name": "Experiment Type"},
              "Anatomical_Source": {
                "source": [{"inbound": ["RNASeq", "Experiment_Study_fkey"]},
                           {"inbound": ["RNASeq", "Replicate_Experiment_fkey"]},
                           {"outbound": ["RNASeq", "Replicate_Specimen_fkey"]},
                           {"inbound": ["RNASeq", "Specimen_Tissue_Specimen_fkey"]},
                           {"outbound": ["RNASeq", "Specimen_Tissue_Tissue_fkey"]},
                           "Name"],
                "aggregate": "array_d",
                "markdown_name": "Anatomical Source"},
              "Num_Replicates": {
                "source": [{"inbound": ["RNASeq", "Experiment_Study_fkey"]},
                           {"inbound": ["RNASeq", "Replicate_Experiment_fkey"]}, "RID"],
                "aggregate": "cnt_d",
                "markdown_name": "Replicates"}}},
          "tag:isrd.isi.edu,2016:visible-columns": {
            "compact": [
              "RID",
              "Title",
              ["RNASeq", "Study_Curation_Status_fkey"],
              {"sourcekey": "Experiment_Type"},
              {"sourcekey": "Anatomical_Source"},
              {"sourcekey": "Num_Replicates",
               "markdown_name": "Summary",
               "display": {"markdown_pattern": "- Replicates: {{{Num_Replicates}}}\n- Tissues: {{{Anatomical_Source}}}",
                           "wait_for": ["Num_Replicates", "Anatomical_Source"]}}],
            "detailed": [
              "RID",
              "Title",
              "Summary",
              "Release_Date",
              ["RNASeq", "Study_Curation_Status_fkey"],
              {"sourcekey": "Experiment_Type"},
              {"sourcekey": "Anatomical_Source"},
              "Cellbrowser_URL"],
            "entry": [
              "Title",
              "Summary",
              "Release_Date",
              ["RNASeq", "Study_Curation_Status_fkey"],
              "Cellbrowser_URL"],
            "filter": {"and": [
              {"source": "Title", "markdown_name": "Title"},
              {"source": [{"inbound": ["RNASeq", "Experiment_Study_fkey"]}, "Experiment_Type"],
               "markdown_name": "Experiment Type"},
              {"source": [{"inbound": ["RNASeq", "Experiment_Study_fkey"]},
                          {"inbound": ["RNASeq", "Replicate_Experiment_fkey"]},
                          {"outbound": ["RNASeq", "Replicate_Specimen_fkey"]},
                          {"inbound": ["RNASeq", "Specimen_Tissue_Specimen_fkey"]},
                          {"outbound": ["RNASeq", "Specimen_Tissue_Tissue_fkey"]},
                          "Name"],
               "markdown_name": "Specimen_Anatomical_Source"},
              {"source": [{"outbound": ["RNASeq", "Study_Curation_Status_fkey"]}, "Name"],
               "markdown_name": "Curation Status"},
              {"source": "Release_Date"}]}},
          "tag:isrd.isi.edu,2016:visible-foreign-keys": {
            "detailed": [["RNASeq", "Experiment_Study_fkey"], ["RNASeq", "Study_File_Study_fkey"]]},
          "tag:isrd.isi.edu,2016:table-display": {
            "row_name": {"row_markdown_pattern": "{{{RID}}}: {{{Title}}}"},
            "*": {"row_order": [{"column": "RMT", "descending": true}]}}}},
      "Protocol": {
        "columns": [{"name": "Name", "type": "text", "nullable": false},
                    {"name": "Category", "type": "text", "nullable": false},
                    {"name": "Description", "type": "markdown"}],
        "keys": [{"name": "Protocol_Name_key", "columns": ["Name"]}]},
      "Experiment": {
        "columns": [
          {"name": "Study", "type": "text", "nullable": false},
          {"name": "Experiment_Type", "type": "text"},
          {"name": "Purification_Protocol", "type": "text"},
          {"name": "Notes", "type": "markdown"}],
        "foreign_keys": [
          {"name": ["RNASeq", "Experiment_Study_fkey"], "from_columns": ["Study"],
           "to": {"schema": "RNASeq", "table": "Study", "columns": ["RID"]},
           "annotations": {"tag:isrd.isi.edu,2016:foreign-key": {"from_name": "Experiments"}}},
          {"name": ["RNASeq", "Experiment_Experiment_Type_fkey"], "from_columns": ["Experiment_Type"],
           "to": {"schema": "Vocab", "table": "Experiment_Type", "columns": ["Name"]}},
          {"name": ["RNASeq", "Experiment_Purification_Protocol_fkey"], "from_columns": ["Purification_Protocol"],
           "to": {"schema": "RNASeq", "table": "Protocol", "columns": ["Name"]},
           "annotations": {"tag:isrd.isi.edu,2016:foreign-key": {
             "to_name": "Purification Protocol",
             "selection_filter": [{"source": "Category", "choices": ["Purification"]}]}}}]},
      "Specimen": {
        "columns": [
          {"name": "Species", "type": "text"},
          {"name": "Stage", "type": "text"},
          {"name": "Collection_Date", "type": "date"}],
        "foreign_keys": [
          {"name": ["RNASeq", "Specimen_Species_fkey"], "from_columns": ["Species"],
           "to": {"schema": "Vocab", "table": "Species", "columns": ["Name"]}}]},
      "Replicate": {
        "columns": [
          {"name": "Experiment", "type": "text", "nullable": false},
          {"name": "Specimen", "type": "text"},
          {"name": "Biological_Replicate_Number", "type": "int"},
          {"name": "Technical_Replicate_Number", "type": "int"}],
        "foreign_keys": [
          {"name": ["RNASeq", "Replicate_Experiment_fkey"], "from_columns": ["Experiment"],
           "to": {"schema": "RNASeq", "table": "Experiment", "columns": ["RID"]}},
          {"name": ["RNASeq", "Replicate_Specimen_fkey"], "from_columns": ["Specimen"],
           "to": {"schema": "RNASeq", "table": "Specimen", "columns": ["RID"]}}]},
      "Specimen_Tissue": {
        "columns": [
          {"name": "Specimen", "type": "text", "nullable": false},
          {"name": "Tissue", "type": "text", "nullable": false}],
        "keys": [{"name": "Specimen_Tissue_key", "columns": ["Specimen", "Tissue"]}],
        "foreign_keys": [
          {"name": ["RNASeq", "Specimen_Tissue_Specimen_fkey"], "from_columns": ["Specimen"],
           "to": {"schema": "RNASeq", "table": "Specimen", "columns": ["RID"]}},
          {"name": ["RNASeq", "Specimen_Tissue_Tissue_fkey"], "from_columns": ["Tissue"],
           "to": {"schema": "Vocab", "table": "Tissue", "columns": ["Name"]}}]},
      "Study_File": {
        "columns": [
          {"name": "Study", "type": "text", "nullable": false},
          {"name": "URL", "type": "text", "nullable": false,
           "annotations": {"tag:isrd.isi.edu,2017:asset": {
             "filename_column": "File_Name", "byte_count_column": "Byte_Count", "md5": "MD5"}}},
          {"name": "File_Name", "type": "text"},
          {"name": "Byte_Count", "type": "int"},
          {"name": "MD5", "type": "text"}],
        "foreign_keys": [
          {"name": ["RNASeq", "Study_File_Study_fkey"], "from_columns": ["Study"],
           "to": {"schema": "RNASeq", "table": "Study", "columns": ["RID"]}}]},
      "File": {
        "columns": [
          {"name": "Replicate", "type": "text", "nullable": false},
          {"name": "URL", "type": "text", "nullable": false,
           "annotations": {"tag:isrd.isi.edu,2017:asset": {
             "filename_column": "File_Name", "byte_count_column": "Byte_Count", "md5": "MD5"}}},
          {"name": "File_Name", "type": "text"},
          {"name": "File_Type", "type": "text"},
          {"name": "Byte_Count", "type": "int"},
          {"name": "MD5", "type": "text"}],
        "foreign_keys": [
          {"name": ["RNASeq", "File_Replicate_fkey"], "from_columns": ["Replicate"],
           "to": {"schema": "RNASeq", "table": "Replicate", "columns": ["RID"]}}]}
    }}
  }
})json";

}  // namespace

const char* catalog_text() noexcept { return kCatalog; }

Catalog catalog() { return parse_catalog(kCatalog); }

namespace {

class Loader {
 public:
  explicit Loader(Store& store) : store_(store) {}

  // Loads rows in order, stamping consecutive creation minutes; returns their RIDs.
  std::vector<std::string> load(const TableRef& table, std::vector<json> rows) {
    for (auto& r : rows) {
      Timestamp ts{base_.micros + minute_++ * 60'000'000LL};
      r["RCT"] = format_timestamp(ts);
      r["RMT"] = format_timestamp(ts);
    }
    std::vector<std::string> rids;
    for (const auto& row : store_.load(table, rows, "demo-loader")) rids.push_back(row.at("RID").text());
    return rids;
  }

 private:
  Store& store_;
  Timestamp base_ = *parse_timestamp("2020-01-06T09:00:00Z");
  std::int64_t minute_ = 0;
};

std::vector<json> named(const std::vector<std::string>& names) {
  std::vector<json> rows;
  for (const auto& n : names) rows.push_back({{"Name", n}});
  return rows;
}

}  // namespace

void populate(Store& store, std::uint32_t seed) {
  std::mt19937 rng(seed);
  auto pick = [&](const auto& v) -> const auto& { return v[rng() % v.size()]; };
  Loader loader(store);

  const std::vector<std::string> statuses = {"In preparation", "PI review", "Biocurator review", "Release"};
  const std::vector<std::string> species = {"Homo sapiens", "Mus musculus"};
  const std::vector<std::string> tissues = {"Kidney", "Ureter", "Bladder", "Nephron", "Urethra", "Gonad"};
  const std::vector<std::string> types = {"RNA-Seq", "scRNA-Seq", "ATAC-Seq", "ChIP-Seq"};
  const std::vector<std::string> stages = {"E11.5", "E13.5", "E15.5", "P0", "Adult"};
  const std::vector<std::string> topics = {"nephron progenitor", "ureteric bud", "stromal", "collecting duct",
                                           "podocyte", "urothelium", "glomerular", "loop of Henle"};

  loader.load({"Vocab", "Curation_Status"}, named(statuses));
  loader.load({"Vocab", "Species"}, named(species));
  loader.load({"Vocab", "Tissue"}, named(tissues));
  loader.load({"Vocab", "Experiment_Type"}, named(types));

  std::vector<json> protocols;
  for (int i = 1; i <= 6; ++i)
    protocols.push_back({{"Name", "Protocol " + std::to_string(i)},
                         {"Category", i % 2 ? "Purification" : "Library Prep"},
                         {"Description", "Step-by-step procedure " + std::to_string(i)}});
  loader.load({"RNASeq", "Protocol"}, protocols);

  std::vector<json> studies;
  for (int i = 1; i <= 40; ++i) {
    json s = {{"Title", "Atlas of " + pick(topics) + " cells " + std::to_string(i)},
              {"Summary", "Profiling of **" + pick(topics) + "** populations."},
              {"Curation_Status", pick(statuses)}};
    if (rng() % 3) s["Release_Date"] = format_date(Date{18000 + static_cast<std::int32_t>(rng() % 1500)});
    if (rng() % 4 == 0) s["Cellbrowser_URL"] = "https://cells.example.org/study" + std::to_string(i);
    studies.push_back(std::move(s));
  }
  auto study_rids = loader.load({"RNASeq", "Study"}, studies);

  std::vector<json> specimens;
  for (int i = 0; i < 60; ++i) {
    json s = {{"Species", pick(species)}, {"Stage", pick(stages)}};
    if (rng() % 2) s["Collection_Date"] = format_date(Date{17500 + static_cast<std::int32_t>(rng() % 1000)});
    specimens.push_back(std::move(s));
  }
  auto specimen_rids = loader.load({"RNASeq", "Specimen"}, specimens);

  std::vector<json> links;
  for (const auto& sp : specimen_rids) {
    std::vector<std::string> chosen;
    for (unsigned n = rng() % 3; chosen.size() < n;) {
      const auto& t = pick(tissues);
      if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) chosen.push_back(t);
    }
    for (const auto& t : chosen) links.push_back({{"Specimen", sp}, {"Tissue", t}});
  }
  loader.load({"RNASeq", "Specimen_Tissue"}, links);

  std::vector<json> experiments;
  for (const auto& st : study_rids)
    for (unsigned n = rng() % 4; n > 0; --n) {
      json e = {{"Study", st}, {"Purification_Protocol", "Protocol " + std::to_string(1 + 2 * (rng() % 3))}};
      if (rng() % 5) e["Experiment_Type"] = pick(types);
      experiments.push_back(std::move(e));
    }
  auto experiment_rids = loader.load({"RNASeq", "Experiment"}, experiments);

  std::vector<json> replicates;
  for (const auto& ex : experiment_rids)
    for (unsigned n = 1 + rng() % 3, b = 1; b <= n; ++b) {
      json r = {{"Experiment", ex}, {"Biological_Replicate_Number", b}, {"Technical_Replicate_Number", 1}};
      if (rng() % 6) r["Specimen"] = pick(specimen_rids);
      replicates.push_back(std::move(r));
    }
  auto replicate_rids = loader.load({"RNASeq", "Replicate"}, replicates);

  std::vector<json> files;
  for (const auto& st : study_rids)
    for (unsigned n = rng() % 3, k = 1; k <= n; ++k) {
      std::string name = "counts_" + std::to_string(k) + ".tsv";
      files.push_back({{"Study", st},
                       {"URL", "/hatrac/study/" + st + "/" + name},
                       {"File_Name", name},
                       {"Byte_Count", 1000 + static_cast<int>(rng() % 5'000'000)},
                       {"MD5", "0123456789abcdef0123456789abcdef"}});
    }
  loader.load({"RNASeq", "Study_File"}, files);

  std::vector<json> reads;
  for (const auto& rep : replicate_rids)
    if (rng() % 2) {
      std::string name = rep + "_R1.fastq.gz";
      reads.push_back({{"Replicate", rep},
                       {"URL", "/hatrac/replicate/" + rep + "/" + name},
                       {"File_Name", name},
                       {"File_Type", "FastQ"},
                       {"Byte_Count", 1'000'000 + static_cast<int>(rng() % 90'000'000)},
                       {"MD5", "fedcba9876543210fedcba9876543210"}});
    }
  loader.load({"RNASeq", "File"}, reads);
}

}  // namespace modeladapt::demo
