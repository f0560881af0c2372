//
// GeqShift - Copyright 2026 The GeqShift Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <fstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace geqshift;

namespace {

// A line as the dataset-preparation pipeline emits it: methyl glycoside
// fragment with the O-methyl protons pre-averaged (n_eq = 3).
const char *kPrepLine =
    R"({"id":"me-frag","class":"mono","smiles":"COC(O)CO","atoms":[{"z":6,"h":3},{"z":8,"h":0},)"
    R"({"z":6,"h":1},{"z":8,"h":1},{"z":6,"h":2},{"z":8,"h":1}],"bonds":[[0,1,1],[1,2,1],[2,3,1],)"
    R"([2,4,1],[4,5,1]],"conformers":[[[0,0,0],[1.4,0,0],[2.1,1.2,0],[1.5,2.3,0.2],[3.6,1.1,0.1],)"
    R"([4.2,2.3,0.3]]],"labels":[{"atom":0,"nucleus":"C","shift":57.8,"n_eq":1},)"
    R"({"atom":0,"nucleus":"H","shift":3.41,"n_eq":3},{"atom":2,"nucleus":"C","shift":103.9,"n_eq":1},)"
    R"({"atom":4,"nucleus":"H","shift":3.72,"n_eq":2}]})";

std::filesystem::path write_lines(const std::string &name, const std::vector<std::string> &lines) {
  auto p = gqtest::temp_dir("molecule") / name;
  std::ofstream out(p);
  for (const auto &l : lines)
    out << l << "\n";
  return p;
}

MoleculeRecord prep_record() { return record_from_json(nlohmann::json::parse(kPrepLine)); }

std::string validation_message(const MoleculeRecord &r) {
  try {
    validate(r);
  } catch (const ValidationError &e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Dataset, PreparedLineLoads) {
  auto recs = load_dataset(write_lines("prep.jsonl", {kPrepLine}));
  ASSERT_EQ(recs.size(), 1u);
  const auto &r = recs[0];
  EXPECT_EQ(r.id, "me-frag");
  EXPECT_EQ(r.num_atoms(), 6);
  EXPECT_EQ(r.bonds.size(), 5u);
  EXPECT_EQ(r.labels[1].n_equivalent, 3);
  auto c = count_labels(recs);
  EXPECT_EQ(c.c13, 2u);
  EXPECT_EQ(c.h1, 2u);
}

TEST(Dataset, EmptyFileGivesNoRecords) {
  EXPECT_TRUE(load_dataset(write_lines("empty.jsonl", {})).empty());
}

TEST(Dataset, RoundTrip) {
  auto data = synthetic_dataset(3, 5);
  auto p = gqtest::temp_dir("molecule_rt") / "d.jsonl";
  save_dataset(data, p);
  auto back = load_dataset(p);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    EXPECT_EQ(back[i], data[i]);
}

TEST(Dataset, DuplicateIdsRejected) {
  EXPECT_THROW(load_dataset(write_lines("dup.jsonl", {kPrepLine, kPrepLine})), ValidationError);
}

TEST(Dataset, SchemaErrorsNameRecordAndField) {
  auto j = nlohmann::json::parse(kPrepLine);
  j["atoms"][2].erase("h");
  try {
    record_from_json(j);
    FAIL();
  } catch (const ValidationError &e) {
    EXPECT_NE(std::string(e.what()).find("me-frag"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("atoms[2].h"), std::string::npos) << e.what();
  }
  auto k = nlohmann::json::parse(kPrepLine);
  k["bonds"][0] = {0, 1, 7};
  EXPECT_THROW(record_from_json(k), ValidationError);
  auto m = nlohmann::json::parse(kPrepLine);
  m["class"] = "hexa";
  EXPECT_THROW(record_from_json(m), ValidationError);
}

TEST(Dataset, InvariantViolations) {
  auto r = prep_record();
  EXPECT_EQ(validation_message(r), "");

  auto a = r;
  a.conformers[0].pop_back();
  EXPECT_NE(validation_message(a).find("conformers[0]"), std::string::npos);

  auto b = r;
  b.conformers.clear();
  EXPECT_NE(validation_message(b), "");

  auto c = r;
  c.labels[0].atom_index = 17;
  EXPECT_NE(validation_message(c).find("labels[0].atom"), std::string::npos);

  auto d = r;
  d.labels[2].shift_ppm = 260.0;
  EXPECT_NE(validation_message(d).find("labels[2].shift"), std::string::npos);

  auto e = r;
  e.labels[1].shift_ppm = 15.5;
  EXPECT_NE(validation_message(e), "");

  auto f = r;
  f.labels.push_back({1, Nucleus::C13, 70.0, 1});  // oxygen
  EXPECT_NE(validation_message(f), "");

  auto g = r;
  g.atoms[3].n_hydrogens = 5;
  EXPECT_NE(validation_message(g).find("atoms[3].h"), std::string::npos);

  auto h = r;
  h.bonds.push_back({2, 2, BondOrder::single});
  EXPECT_NE(validation_message(h).find("self bond"), std::string::npos);

  auto k = r;
  k.labels[1].n_equivalent = 4;  // only 3 protons on atom 0
  EXPECT_NE(validation_message(k).find("n_eq"), std::string::npos);
}

TEST(Dataset, EnumParsing) {
  EXPECT_EQ(parse_saccharide_class("tri"), SaccharideClass::tri);
  EXPECT_EQ(parse_nucleus("H"), Nucleus::H1);
  EXPECT_EQ(to_string(Nucleus::C13), "C");
  EXPECT_THROW(parse_nucleus("N"), ValidationError);
}

TEST(Synthetic, RecordsAreValidAndDeterministic) {
  auto a = synthetic_dataset(4, 9);
  auto b = synthetic_dataset(4, 9);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 12u);
  for (const auto &r : a) {
    EXPECT_NO_THROW(validate(r));
    EXPECT_GE(r.num_atoms(), 5);
    EXPECT_LE(r.num_atoms(), 30);
    EXPECT_FALSE(r.labels.empty());
  }
}
