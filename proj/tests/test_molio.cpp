#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "rmat/error.hpp"
#include "rmat/molio.hpp"
#include "support/synthetic.hpp"

using namespace rmat;
using molio::Element;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Floyd-Warshall hop counts, -1 when unreachable.
std::vector<int> floyd(const molio::Molecule& m) {
  const std::size_t n = m.size();
  const int inf = 1 << 20;
  std::vector<int> d(n * n, inf);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 0;
  for (const auto& b : m.bonds) d[b.a * n + b.b] = d[b.b * n + b.a] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::min(d[i * n + j], d[i * n + k] + d[k * n + j]);
  for (int& x : d)
    if (x >= inf) x = -1;
  return d;
}

}  // namespace

TEST_SUITE("molio") {
  TEST_CASE("carbon dioxide from SMILES") {
    const auto m = molio::parse_smiles("C(=O)=O");
    REQUIRE(m.size() == 3);
    CHECK(m.atoms[0].element == Element::C);
    CHECK(m.atoms[1].element == Element::O);
    CHECK(m.atoms[2].element == Element::O);
    REQUIRE(m.bonds.size() == 2);
    for (const auto& b : m.bonds) CHECK(b.order == 2.0);
    CHECK(m.atoms[0].h_count == 0);
    CHECK_FALSE(m.coords.has_value());
  }

  TEST_CASE("ethanol implicit hydrogens") {
    const auto m = molio::parse_smiles("CCO");
    REQUIRE(m.size() == 3);
    CHECK(m.bonds.size() == 2);
    CHECK(m.atoms[0].h_count == 3);
    CHECK(m.atoms[1].h_count == 2);
    CHECK(m.atoms[2].h_count == 1);
  }

  TEST_CASE("aromatic benzene from SMILES") {
    const auto m = molio::parse_smiles("c1ccccc1");
    REQUIRE(m.size() == 6);
    REQUIRE(m.bonds.size() == 6);
    for (const auto& a : m.atoms) {
      CHECK(a.is_aromatic);
      CHECK(a.in_ring);
      CHECK(a.h_count == 1);
    }
    for (const auto& b : m.bonds) {
      CHECK(b.order == 1.5);
      CHECK(b.is_aromatic);
      CHECK(b.in_ring);
    }
  }

  TEST_CASE("bracket atoms, charges and ring closures") {
    const auto m = molio::parse_smiles("[NH4+]");
    CHECK(m.atoms[0].formal_charge == 1);
    CHECK(m.atoms[0].h_count == 4);
    const auto cyc = molio::parse_smiles("C1CC%10CC1.C%10");
    CHECK(cyc.size() == 6);
    const auto hal = molio::parse_smiles("ClCBr");
    CHECK(hal.atoms[0].element == Element::Cl);
    CHECK(hal.atoms[2].element == Element::Br);
    CHECK(molio::parse_smiles("[Xe]").atoms[0].element == Element::Other);
  }

  TEST_CASE("SMILES errors carry an offset") {
    CHECK_THROWS_AS(molio::parse_smiles("CC(O"), ParseError);
    CHECK_THROWS_AS(molio::parse_smiles("C1CC"), ParseError);
    CHECK_THROWS_AS(molio::parse_smiles("CQ"), ParseError);
    try {
      molio::parse_smiles("CCQ");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.position() == 2);
    }
  }

  TEST_CASE("charges outside [-5, 5] clamp") {
    molio::Atom a;
    a.formal_charge = 7;
    CHECK(molio::clamp_charge(a));
    CHECK(a.formal_charge == 5);
    a.formal_charge = -2;
    CHECK_FALSE(molio::clamp_charge(a));
  }

  TEST_CASE("CO2 record from SDF") {
    const auto r = molio::parse_sdf(read_file(std::string(RMAT_TEST_DATA) + "/co2.sdf"));
    REQUIRE(r.errors.empty());
    REQUIRE(r.molecules.size() == 1);
    const auto& m = r.molecules[0];
    CHECK(m.size() == 3);
    CHECK(m.bonds.size() == 2);
    for (const auto& b : m.bonds) {
      CHECK(b.order == 2.0);
      CHECK_FALSE(b.in_ring);
      CHECK(b.is_conjugated);
    }
    REQUIRE(m.coords.has_value());
    CHECK((*m.coords)[0].x == -1.16);
  }

  TEST_CASE("empty SDF stream") {
    const auto r = molio::parse_sdf(std::string_view{});
    CHECK(r.molecules.empty());
    CHECK(r.errors.empty());
  }

  TEST_CASE("benzene SDF ring perception matches the cycle rank") {
    const auto r = molio::parse_sdf(read_file(std::string(RMAT_TEST_DATA) + "/benzene.sdf"));
    REQUIRE(r.molecules.size() == 1);
    const auto& m = r.molecules[0];
    for (const auto& b : m.bonds) {
      CHECK(b.order == 1.5);
      CHECK(b.is_aromatic);
      CHECK(b.in_ring);
    }
    // bonds - atoms + components
    CHECK(static_cast<int>(m.bonds.size()) - static_cast<int>(m.size()) + 1 == 1);
  }

  TEST_CASE("bad SDF record is reported, neighbours still parse") {
    const std::string good = read_file(std::string(RMAT_TEST_DATA) + "/ethanol.sdf");
    std::string bad = good;
    bad.replace(bad.find("  1  2  1  0"), 12, "  1  9  1  0");
    const auto r = molio::parse_sdf(good + bad + good);
    CHECK(r.molecules.size() == 2);
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].record == 1);
    CHECK(r.errors[0].line > 0);
  }

  TEST_CASE("SDF round trip") {
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
      const auto m = molio::parse_smiles(testing::random_smiles(rng, 2, 10));
      const auto back = molio::parse_sdf(molio::write_sdf({m}));
      REQUIRE(back.molecules.size() == 1);
      const auto& r = back.molecules[0];
      REQUIRE(r.size() == m.size());
      REQUIRE(r.bonds.size() == m.bonds.size());
      for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(r.atoms[i].element == m.atoms[i].element);
        CHECK(r.atoms[i].h_count == m.atoms[i].h_count);
        CHECK(r.atoms[i].formal_charge == m.atoms[i].formal_charge);
        CHECK(r.atoms[i].in_ring == m.atoms[i].in_ring);
      }
      for (const auto& b : m.bonds) {
        const auto k2 = r.bond_between(b.a, b.b);
        REQUIRE(k2.has_value());
        CHECK(r.bonds[*k2].order == b.order);
      }
    }
  }

  TEST_CASE("neighbourhood orders on a path and a ring") {
    const auto path = molio::parse_smiles("CCCCC");
    const auto o = molio::neighborhood_orders(path);
    CHECK(o(0, 4) == 4);
    CHECK(o(0, 3) == 3);
    CHECK(o(0, 2) == 2);
    CHECK(o(0, 1) == 1);
    for (std::size_t i = 0; i < 5; ++i) CHECK(o(i, i) == 0);
    const auto ring = molio::neighborhood_orders(molio::parse_smiles("c1ccccc1"));
    CHECK(ring(0, 3) == 3);
    const auto frag = molio::neighborhood_orders(molio::parse_smiles("C.C"));
    CHECK(frag(0, 1) == 4);
  }

  TEST_CASE("dummy node") {
    const auto one = molio::add_dummy_node(molio::parse_smiles("C"), 20.0);
    REQUIRE(one.size() == 2);
    const auto o = molio::neighborhood_orders(one);
    CHECK(o(0, 0) == 0);
    CHECK(o(0, 1) == 5);
    CHECK(o(1, 0) == 5);
    CHECK(o(1, 1) == 0);
    const auto co2 = molio::add_dummy_node(molio::parse_smiles("C(=O)=O"), 20.0);
    CHECK(co2.size() == 4);
    CHECK(co2.atoms.back().element == Element::Dummy);
    CHECK(co2.bonds.size() == 2);
    CHECK_THROWS_AS(molio::add_dummy_node(co2, 20.0), DataError);
  }

  TEST_CASE("order matrix properties on random molecules") {
    Rng rng(11);
    for (int k = 0; k < 60; ++k) {
      const auto m = molio::parse_smiles(testing::random_smiles(rng, 2, 12));
      const auto o = molio::neighborhood_orders(m);
      const auto h = molio::hop_counts(m);
      CHECK(h == floyd(m));
      const std::size_t n = m.size();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          CHECK(o(i, j) == o(j, i));
          for (std::size_t q = 0; q < n; ++q)
            if (h[i * n + j] >= 0 && h[j * n + q] >= 0) CHECK(h[i * n + q] <= h[i * n + j] + h[j * n + q]);
        }
      // relabeling permutes the matrix
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(perm);
      const auto p = molio::permute_atoms(m, perm);
      const auto op = molio::neighborhood_orders(p);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) CHECK(op(perm[i], perm[j]) == o(i, j));
    }
  }

  TEST_CASE("dataset CSV") {
    const auto ds = molio::parse_dataset_csv("smiles,logp,extra_a\nCCO,1.5,0.25\nC(=O)=O,,1\nC1CC,2,3\n");
    CHECK(ds.label_names == std::vector<std::string>{"logp"});
    CHECK(ds.extra_names == std::vector<std::string>{"extra_a"});
    REQUIRE(ds.rows.size() == 2);
    CHECK(ds.rows[0].labels[0] == 1.5);
    CHECK_FALSE(ds.rows[1].labels[0].has_value());
    CHECK(ds.rows[1].extra[0] == 1.0);
    CHECK(ds.errors.size() == 1);
  }
}
