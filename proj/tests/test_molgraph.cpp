#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "hiermol/canon.hpp"
#include "hiermol/rings.hpp"
#include "hiermol/selfies.hpp"
#include "hiermol/smiles.hpp"
#include "hiermol/valence.hpp"
#include "support/generators.hpp"

using namespace hiermol;

namespace {

// Brute-force oracle: try every atom bijection.
bool brute_force_isomorphic(const Molecule& a, const Molecule& b) {
  if (a.num_atoms() != b.num_atoms() || a.num_bonds() != b.num_bonds()) return false;
  std::vector<int> p(static_cast<std::size_t>(a.num_atoms()));
  std::iota(p.begin(), p.end(), 0);
  auto same = [](const Atom& x, const Atom& y) {
    return x.element == y.element && x.formal_charge == y.formal_charge && x.aromatic == y.aromatic;
  };
  do {
    bool ok = true;
    for (int v = 0; v < a.num_atoms() && ok; ++v) ok = same(a.atom(v), b.atom(p[v]));
    for (const auto& bond : a.bonds()) {
      if (!ok) break;
      int j = b.bond_between(p[bond.begin], p[bond.end]);
      ok = j >= 0 && b.bond(j).order == bond.order;
    }
    if (ok) return true;
  } while (std::next_permutation(p.begin(), p.end()));
  return false;
}

int count_bonds(const Molecule& m, BondOrder order) {
  return static_cast<int>(std::count_if(m.bonds().begin(), m.bonds().end(), [&](const Bond& b) { return b.order == order; }));
}

std::string canon(std::string_view smiles) { return canonicalize(parse_smiles(smiles)).text; }

}  // namespace

TEST_CASE("parse: atoms, charges and implicit hydrogens") {
  auto m = parse_smiles("C");
  CHECK(m.num_atoms() == 1);
  CHECK(m.num_bonds() == 0);
  CHECK(m.atom(0).hydrogens == 4);

  CHECK(parse_smiles("O").atom(0).hydrogens == 2);
  auto ammonium = parse_smiles("[NH4+]");
  CHECK(ammonium.atom(0).hydrogens == 4);
  CHECK(ammonium.atom(0).formal_charge == 1);
  CHECK(parse_smiles("C[O-]").atom(1).formal_charge == -1);
  CHECK_THROWS_WITH_AS(parse_smiles("[Fe]"), doctest::Contains("unknown element"), SmilesError);
}

TEST_CASE("parse: aromatic ring and aspirin counts") {
  auto benzene = parse_smiles("c1ccccc1");
  CHECK(benzene.num_atoms() == 6);
  CHECK(count_bonds(benzene, BondOrder::Aromatic) == 6);
  CHECK(ring_count(benzene) == 1);
  for (const auto& a : benzene.atoms()) {
    CHECK(a.aromatic);
    CHECK(a.hydrogens == 1);
  }

  auto aspirin = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  CHECK(aspirin.heavy_atom_count() == 13);
  CHECK(aspirin.num_bonds() == 13);
  CHECK(count_bonds(aspirin, BondOrder::Double) == 2);
  CHECK(count_bonds(aspirin, BondOrder::Aromatic) == 6);
}

TEST_CASE("parse: ring closures, stereo markers and fragments") {
  CHECK(parse_smiles("C%10CC%10").num_bonds() == 3);
  auto stereo = parse_smiles("F/C=C/F");
  CHECK(stereo.num_atoms() == 4);
  CHECK(count_bonds(stereo, BondOrder::Double) == 1);
  CHECK(parse_smiles("N[C@@H](C)C(=O)O").atom(1).hydrogens == 1);
  auto salt = parse_smiles("CC(=O)O.[Na+]");
  CHECK(salt.num_fragments() == 2);
  CHECK(parse_smiles("c1ccccc1-c1ccccc1").num_bonds() == 13);
  // Biphenyl's inter-ring bond is single even without the explicit '-'.
  CHECK(count_bonds(parse_smiles("c1ccccc1c1ccccc1"), BondOrder::Single) == 1);
}

TEST_CASE("parse: errors carry offsets") {
  auto offset_of = [](std::string_view s) -> std::size_t {
    try {
      parse_smiles(s);
    } catch (const SmilesError& e) {
      return e.offset();
    }
    return std::string::npos;
  };
  CHECK_THROWS_AS(parse_smiles(""), SmilesError);
  CHECK_THROWS_AS(parse_smiles("C("), SmilesError);
  CHECK_THROWS_AS(parse_smiles("C)"), SmilesError);
  CHECK_THROWS_AS(parse_smiles("C1CC"), SmilesError);
  CHECK_THROWS_AS(parse_smiles("[Xx]"), SmilesError);
  CHECK_THROWS_AS(parse_smiles("[13C]"), SmilesError);
  CHECK_THROWS_AS(parse_smiles("CQ"), SmilesError);
  CHECK(offset_of("CCQ") == 2);
  CHECK(offset_of("CC)") == 2);
}

TEST_CASE("write: identity order and round trips") {
  CHECK(write_smiles(parse_smiles("C")) == "C");
  CHECK(write_smiles(parse_smiles("OCC")) == "OCC");
  CHECK(write_smiles(parse_smiles("CC(=O)O")) == "CC(=O)O");
  CHECK(write_smiles(parse_smiles("C1CC1")) == "C1CC1");

  testing::MoleculeGenerator gen(7);
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    Molecule m = gen.next(14);
    auto rank = testing::random_permutation(m.num_atoms(), rng);
    std::string text = write_smiles(m, rank);
    Molecule back = parse_smiles(text);
    INFO(text);
    CHECK(is_isomorphic(m, back));
  }
}

TEST_CASE("valence table") {
  CHECK(validate_valence(parse_smiles("C")).empty());
  CHECK(validate_valence(parse_smiles("C(C)(C)(C)(C)C")).size() == 1);
  CHECK(validate_valence(parse_smiles("C[N+](C)(C)C")).empty());
  CHECK(validate_valence(parse_smiles("[NH4+]")).empty());
  CHECK(validate_valence(parse_smiles("c1cc[nH]c1")).empty());
  CHECK(validate_valence(parse_smiles("c1ccoc1")).empty());
  CHECK(validate_valence(parse_smiles("c1ccsc1")).empty());
  CHECK(validate_valence(parse_smiles("CS(=O)(=O)C")).empty());
  CHECK(validate_valence(parse_smiles("O=[N+]([O-])c1ccccc1")).empty());
  CHECK(validate_valence(parse_smiles("[CH5]")).size() == 1);
  CHECK(validate_valence(parse_smiles("O=O=O")).size() == 1);
}

TEST_CASE("canonical ranks are permutations") {
  CHECK(canonical_ranks(parse_smiles("C")) == std::vector<int>{0});
  auto r = canonical_ranks(parse_smiles("c1ccccc1"));
  std::sort(r.begin(), r.end());
  CHECK(r == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("canonical form: equivalent inputs agree") {
  CHECK(canon("C") == "C");
  CHECK(canon("OCC") == canon("CCO"));
  CHECK(canon("CCO") != canon("COC"));
  CHECK(canon("C1=CC=CC=C1") == canon("c1ccccc1"));
  CHECK(canon("C1=CC=NC=C1") == canon("c1ccncc1"));
  CHECK(canon("C1=CC=C2C=CC=CC2=C1") == canon("c1ccc2ccccc2c1"));
  CHECK(canon("C1=CNC=C1") == canon("c1cc[nH]c1"));
  CHECK(canon("CC(=O)Oc1ccccc1C(=O)O") == canon("OC(=O)c1ccccc1OC(C)=O"));
  // Cyclohexene must stay non-aromatic.
  CHECK(canon("C1=CCCCC1").find('c') == std::string::npos);
}

TEST_CASE("canonical form: permutation stability") {
  Rng rng(3);
  Molecule aspirin = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  const auto reference = canonicalize(aspirin);
  for (int i = 0; i < 20; ++i) CHECK(canonicalize(aspirin.permuted(testing::random_permutation(13, rng))) == reference);

  testing::MoleculeGenerator gen(5);
  for (int i = 0; i < 200; ++i) {
    Molecule m = gen.next(20);
    const auto c = canonicalize(m);
    INFO(c.text);
    for (int k = 0; k < 5; ++k) CHECK(canonicalize(m.permuted(testing::random_permutation(m.num_atoms(), rng))) == c);
    // Re-parsing the canonical string is a fixed point.
    CHECK(canonicalize(parse_smiles(c.text)) == c);
  }
}

TEST_CASE("isomorphism oracle agrees with brute force") {
  CHECK(is_isomorphic(parse_smiles("CCO"), parse_smiles("OCC")));
  CHECK_FALSE(is_isomorphic(parse_smiles("CCO"), parse_smiles("COC")));
  Molecule big = parse_smiles("CCCCCCCCCCCCCCCCC");
  CHECK_THROWS_AS(is_isomorphic(big, big), std::length_error);

  testing::MoleculeGenerator gen(9);
  Rng rng(1);
  int positives = 0;
  for (int i = 0; i < 300; ++i) {
    Molecule a = gen.next(7);
    Molecule b = (i % 2 == 0) ? a.permuted(testing::random_permutation(a.num_atoms(), rng)) : gen.next(7);
    bool expected = brute_force_isomorphic(a, b);
    positives += expected;
    CHECK(is_isomorphic(a, b) == expected);
    CHECK((canonicalize(a) == canonicalize(b)) == is_isomorphic(normalize_aromaticity(a), normalize_aromaticity(b)));
  }
  CHECK(positives >= 150);
}

TEST_CASE("kekulize restores alternating bonds") {
  auto k = kekulize(parse_smiles("c1ccccc1"));
  REQUIRE(k);
  CHECK(count_bonds(*k, BondOrder::Double) == 3);
  CHECK(count_bonds(*k, BondOrder::Aromatic) == 0);
  auto pyrrole = kekulize(parse_smiles("c1cc[nH]c1"));
  REQUIRE(pyrrole);
  CHECK(count_bonds(*pyrrole, BondOrder::Double) == 2);
  CHECK(validate_valence(*pyrrole).empty());
}

TEST_CASE("ring perception") {
  auto sizes = smallest_ring_through_bond(parse_smiles("c1ccc2ccccc2c1"));
  CHECK(std::count(sizes.begin(), sizes.end(), 6) == 11);
  CHECK(simple_cycles(parse_smiles("c1ccc2ccccc2c1"), 10).size() == 3);
  auto rb = parse_smiles("CCc1ccccc1").ring_bonds();
  CHECK(std::count(rb.begin(), rb.end(), true) == 6);
}

TEST_CASE("selfies: decoding rules") {
  Molecule ethanol = decode_selfies("[C][C][O]");
  CHECK(is_isomorphic(ethanol, parse_smiles("CCO")));
  CHECK(decode_selfies("").empty());
  // A double bond into a saturated atom is downgraded.
  CHECK(is_isomorphic(decode_selfies("[F][=C]"), parse_smiles("FC")));
  // The chain stops once fluorine is saturated.
  CHECK(decode_selfies("[C][F][C]").num_atoms() == 2);
  // Ring1 with index [Ring1] (value 1) closes a ring of size 3.
  CHECK(is_isomorphic(decode_selfies("[C][C][C][Ring1][Ring1]"), parse_smiles("C1CC1")));
  CHECK(is_isomorphic(decode_selfies("[C][Branch1][C][O][C]"), parse_smiles("C(O)C")));
  CHECK_THROWS_AS(decode_selfies("[Xe]"), SelfiesError);
  CHECK_THROWS_AS(decode_selfies("C"), SelfiesError);
}

TEST_CASE("selfies: random strings decode to valid molecules") {
  auto alphabet = selfies_alphabet();
  CHECK(alphabet.size() == 32);
  Rng rng(2024);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    int len = static_cast<int>(rng.below(25));
    for (int k = 0; k < len; ++k) s += alphabet[rng.below(alphabet.size())];
    Molecule m = decode_selfies(s);
    INFO(s);
    CHECK(validate_valence(m).empty());
    CHECK(m.num_fragments() <= 1);
  }
}

TEST_CASE("selfies: encode then decode preserves structure") {
  for (const char* smi : {"CCO", "CC(=O)Oc1ccccc1C(=O)O", "C1CCCCC1", "c1ccncc1", "CC#N", "FC(F)(F)Cl", "c1ccc2ccccc2c1",
                          "OC1CC(N)C1", "CCS(=O)C"}) {
    Molecule m = parse_smiles(smi);
    INFO(smi);
    std::string s;
    try {
      s = encode_selfies(m);
    } catch (const SelfiesError& e) {
      // Hypervalent sulfur is outside the subset.
      CHECK(std::string(smi) == "CCS(=O)C");
      continue;
    }
    INFO(s);
    CHECK(canonicalize(decode_selfies(s)) == canonicalize(m));
  }
  testing::MoleculeGenerator gen(77);
  int encoded = 0;
  for (int i = 0; i < 300; ++i) {
    Molecule m = gen.next(16);
    std::string s;
    try {
      s = encode_selfies(m);
    } catch (const SelfiesError&) {
      continue;
    }
    ++encoded;
    INFO(write_smiles(m));
    INFO(s);
    CHECK(canonicalize(decode_selfies(s)) == canonicalize(m));
  }
  CHECK(encoded >= 150);
}
