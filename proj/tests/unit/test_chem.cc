#include <doctest.h>

#include "generators.h"
#include "rxn/chem.h"
#include "rxn/errors.h"

using namespace rxn;
using namespace rxn::chem;

namespace {

std::map<std::string, long> counts_of(std::string_view smiles) {
  std::map<std::string, long> out;
  const ElementCounts counts = atom_count_vector(parse_smiles(smiles));
  for (const auto& [el, n] : counts.entries()) out[el] = n;
  return out;
}

}  // namespace

TEST_CASE("atom counts of small molecules") {
  using M = std::map<std::string, long>;
  CHECK(counts_of("CCO") == M{{"C", 2}, {"H", 6}, {"O", 1}});
  CHECK(counts_of("c1ccccc1") == M{{"C", 6}, {"H", 6}});
  CHECK(counts_of("c1ccc2ccccc2c1") == M{{"C", 10}, {"H", 8}});
  CHECK(counts_of("c1ccncc1") == M{{"C", 5}, {"H", 5}, {"N", 1}});
  CHECK(counts_of("c1cc[nH]c1") == M{{"C", 4}, {"H", 5}, {"N", 1}});
  CHECK(counts_of("C#N") == M{{"C", 1}, {"H", 1}, {"N", 1}});
  CHECK(counts_of("Cl") == M{{"Cl", 1}, {"H", 1}});
  CHECK(counts_of("OS(=O)(=O)O") == M{{"H", 2}, {"O", 4}, {"S", 1}});
  CHECK(counts_of("CC.O") == M{{"C", 2}, {"H", 8}, {"O", 1}});
  CHECK(counts_of("[NH4+]") == M{{"H", 4}, {"N", 1}});
  CHECK(counts_of("[13CH4]") == M{{"C", 1}, {"H", 4}});
  CHECK(counts_of("C1CC1") == M{{"C", 3}, {"H", 6}});
}

TEST_CASE("formal charges and formula") {
  CHECK(formal_charge_sum(parse_smiles("CC(=O)[O-]")) == -1);
  CHECK(formal_charge_sum(parse_smiles("[NH4+].[Cl-]")) == 0);
  CHECK(formula(atom_count_vector(parse_smiles("CCO"))) == "C2H6O");
}

TEST_CASE("malformed SMILES") {
  CHECK_THROWS_AS(parse_smiles("C(C"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C1CC"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("CX"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C(C)(C)(C)(C)C"), ValenceError);
  try {
    parse_smiles("CCX");
    FAIL("no exception");
  } catch (const SyntaxError& e) {
    CHECK(e.position() == 2);
  }
}

TEST_CASE("conservation residual") {
  const std::vector<Molecule> ethanol = {parse_smiles("CCO")};
  const std::vector<Molecule> ethene_water = {parse_smiles("C=C"), parse_smiles("O")};
  CHECK(conservation_residual(ethanol, ethene_water).balanced());

  const std::vector<Molecule> ethene = {parse_smiles("C=C")};
  const ConservationResidual r = conservation_residual(ethanol, ethene);
  CHECK_FALSE(r.balanced());
  CHECK(r.elements.get("H") == 2);
  CHECK(r.elements.get("O") == 1);
  CHECK(r.elements.get("C") == 0);

  const std::vector<Molecule> ammonium = {parse_smiles("[NH4+]")};
  const std::vector<Molecule> ammonia = {parse_smiles("N")};
  const ConservationResidual q = conservation_residual(ammonium, ammonia);
  CHECK(q.charge == 1);
  CHECK(q.elements.get("H") == 1);

  CHECK_THROWS_AS(conservation_residual(ethanol, std::vector<Molecule>{}), PreconditionError);
}

TEST_CASE("residual antisymmetry and identity on random molecule lists") {
  testing::Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = testing::random_molecules(rng, 3);
    const auto b = testing::random_molecules(rng, 3);
    const ConservationResidual ab = conservation_residual(a, b);
    const ConservationResidual ba = conservation_residual(b, a);
    CHECK(ab.elements == -ba.elements);
    CHECK(ab.charge == -ba.charge);
    CHECK(conservation_residual(a, a).balanced());
  }
}

TEST_CASE("parsed counts agree with the generating tree") {
  testing::Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const testing::MoleculeTree tree = testing::random_tree(rng);
    const int root = testing::uniform_int(rng, 0, static_cast<int>(tree.elements.size()) - 1);
    const std::string smiles = tree.smiles(root, rng);
    CAPTURE(smiles);
    CHECK(counts_of(smiles) == tree.counts());
  }
}

TEST_CASE("written SMILES keeps atom counts and charge") {
  testing::Rng rng(8);
  for (const char* s : {"CC(=O)[O-]", "c1ccncc1", "[NH4+]", "OS(=O)(=O)O", "C#N"}) {
    const Molecule m = parse_smiles(s);
    const Molecule again = parse_smiles(write_smiles(m));
    CHECK(atom_count_vector(again) == atom_count_vector(m));
    CHECK(formal_charge_sum(again) == formal_charge_sum(m));
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Molecule m = parse_smiles(testing::random_tree(rng).smiles());
    CHECK(atom_count_vector(parse_smiles(write_smiles(m))) == atom_count_vector(m));
  }
}

TEST_CASE("fingerprint configuration") {
  FingerprintConfig c;
  CHECK_NOTHROW(c.validate());
  c.width = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.width = 1024;
  c.max_path_length = 8;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.max_path_length = 7;
  c.algorithm = "morgan";
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("tanimoto basics") {
  const Fingerprint a = fingerprint(parse_smiles("CCO"));
  const Fingerprint b = fingerprint(parse_smiles("CCN"));
  CHECK(tanimoto(a, a) == 1.0);
  CHECK(tanimoto(a, b) == tanimoto(b, a));
  CHECK(tanimoto(a, b) < 1.0);
  CHECK(tanimoto(a, b) > 0.0);
  FingerprintConfig narrow;
  narrow.width = 1024;
  CHECK_THROWS_AS(tanimoto(a, fingerprint(parse_smiles("CCO"), narrow)), WidthMismatch);
  FingerprintConfig shorter;
  shorter.max_path_length = 3;
  CHECK_THROWS_AS(tanimoto(a, fingerprint(parse_smiles("CCO"), shorter)), WidthMismatch);
}

TEST_CASE("fingerprints ignore atom order") {
  testing::Rng rng(9);
  CHECK(fingerprint(parse_smiles("OCC")) == fingerprint(parse_smiles("CCO")));
  for (int trial = 0; trial < 100; ++trial) {
    const testing::MoleculeTree tree = testing::random_tree(rng);
    const Molecule m = parse_smiles(tree.smiles());
    const auto perm = testing::random_permutation(rng, m.size());
    CHECK(fingerprint(m.reindexed(perm)) == fingerprint(m));
    const int root = testing::uniform_int(rng, 0, static_cast<int>(tree.elements.size()) - 1);
    CHECK(fingerprint(parse_smiles(tree.smiles(root, rng))) == fingerprint(m));
  }
}
