#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pwdesk/deck.hpp"
#include "pwdesk/error.hpp"

#include <cstdlib>
#include <sstream>
#include <string>

using namespace pwdesk;

namespace {

std::string data_dir() {
  const char* d = std::getenv("PWDESK_DATA_DIR");
  REQUIRE(d != nullptr);
  return d;
}

std::string minimal_deck(const std::string& calc = "scf",
                         const std::string& kcard =
                             "K_POINTS {automatic}\n2 2 1 0 0 0\n") {
  return "&CONTROL\ncalculation = '" + calc +
         "'\nprefix = 't'\n/\n"
         "&SYSTEM\nibrav = 4\na = 4.0\nc = 12.0\nnat = 1\nntyp = 1\n"
         "ecutwfc = 10.0\n/\n"
         "&ELECTRONS\nconv_thr = 1e-6\n/\n"
         "ATOMIC_SPECIES\nGe 72.64 Ge.model.UPF\n"
         "ATOMIC_POSITIONS (angstrom)\nGe 0.0 0.0 0.0\n" +
         kcard;
}

Deck parse_text(const std::string& text) {
  std::istringstream is(text);
  return parse_deck(is);
}

} // namespace

TEST_CASE("the bundled scf deck resolves to the documented settings") {
  Deck d = load_deck(data_dir() + "/decks/GeAlP.scf.in");
  CHECK(d.control.calculation == "scf");
  CHECK(d.control.prefix == "GaP+Ge_I_3.70");
  CHECK(d.control.outdir == "./work/");
  CHECK(d.system.ibrav == 4);
  CHECK(d.system.a == 3.89);
  CHECK(d.system.c == 20.0);
  CHECK(d.system.nat == 4);
  CHECK(d.system.ntyp == 3);
  CHECK(d.system.ecutwfc == 30.0);
  CHECK(d.system.ecutrho == 120.0);
  CHECK(d.system.occupations == "smearing");
  CHECK(d.system.smearing == "m-p");
  CHECK(d.system.degauss == 0.0005);
  CHECK(d.system.input_dft == "pbe");
  CHECK(d.system.vdw_corr == "Grimme-D2");
  CHECK(d.electrons.conv_thr == 1e-8);
  CHECK(d.electrons.mixing_beta == 0.7);
  REQUIRE(d.species.size() == 3);
  CHECK(d.species[0].symbol == "Ga");
  CHECK(d.species[0].mass == 69.723);
  CHECK(d.species[0].pseudo == "Ga.pbe-mt_fhi.UPF");
  CHECK(d.species[1].symbol == "P");
  CHECK(d.species[2].symbol == "Ge");
  REQUIRE(d.positions.size() == 4);
  CHECK(d.positions[0].symbol == "Ga");
  CHECK(d.positions[0].xyz == Eigen::Vector3d(0, 0, 0));
  CHECK(d.positions[1].xyz == Eigen::Vector3d(0, 2.245892547, 0.38));
  CHECK(d.positions[2].xyz == Eigen::Vector3d(0, 0, 3.70));
  CHECK(d.positions[3].xyz == Eigen::Vector3d(0, 2.245892547, 4.08));
  CHECK(d.kpoints.mode == "automatic");
  CHECK(d.kpoints.mesh == std::array<int, 6>{10, 10, 1, 0, 0, 0});
  CHECK(d.warnings.empty());
}

TEST_CASE("the bundled bands deck carries the 4-node path") {
  Deck d = load_deck(data_dir() + "/decks/GeAlP.b-nscf.in");
  CHECK(d.control.calculation == "bands");
  CHECK(d.kpoints.mode == "crystal_b");
  REQUIRE(d.kpoints.path_nodes.size() == 4);
  CHECK(d.kpoints.path_nodes[0].label == "G");
  CHECK(d.kpoints.path_nodes[1].label == "k");
  CHECK(d.kpoints.path_nodes[2].label == "M");
  CHECK(d.kpoints.path_nodes[3].label == "G");
  CHECK(d.kpoints.path_nodes[1].k.x() == doctest::Approx(0.3333333));
  CHECK(d.kpoints.path_nodes[2].k.y() == doctest::Approx(0.5));
  for (int c : d.kpoints.path_counts) CHECK(c == 20);
  // settings identical to the scf deck
  CHECK(d.system.ecutwfc == 30.0);
  CHECK(d.system.ecutrho == 120.0);
  CHECK(d.electrons.conv_thr == 1e-8);
}

TEST_CASE("serialize is a parse fixed point") {
  for (const char* name : {"/decks/GeAlP.scf.in", "/decks/GeAlP.b-nscf.in"}) {
    Deck d1 = load_deck(data_dir() + name);
    std::string s1 = d1.serialize();
    Deck d2 = parse_text(s1);
    CHECK(d2.serialize() == s1);
    CHECK(d2.control.prefix == d1.control.prefix);
    CHECK(d2.system.degauss == d1.system.degauss);
    CHECK(d2.electrons.conv_thr == d1.electrons.conv_thr);
    CHECK(d2.positions.size() == d1.positions.size());
    CHECK(d2.kpoints.mode == d1.kpoints.mode);
  }
}

TEST_CASE("empty deck reports the missing control section") {
  try {
    parse_text("");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("&CONTROL") != std::string::npos);
  }
}

TEST_CASE("unterminated section carries its line number") {
  try {
    parse_text("&CONTROL\ncalculation = 'scf'\n&SYSTEM\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
    CHECK(std::string(e.what()).find("unterminated") != std::string::npos);
  }
}

TEST_CASE("bad numeric value carries its line number") {
  std::string text = minimal_deck();
  std::size_t at = text.find("a = 4.0");
  text.replace(at, 7, "a = abc");
  try {
    parse_text(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 7);
  }
}

TEST_CASE("unknown keys warn instead of failing") {
  std::string text = minimal_deck();
  text.replace(text.find("ecutwfc"), 7, "ecutwfx");
  Deck d = parse_text(text);
  REQUIRE(d.warnings.size() == 1);
  CHECK(d.warnings[0].find("ecutwfx") != std::string::npos);
  CHECK(d.system.ecutwfc == 30.0); // untouched default
}

TEST_CASE("structural validation errors") {
  std::string bad_species = minimal_deck();
  bad_species.replace(bad_species.find("ATOMIC_POSITIONS (angstrom)\nGe"),
                      std::string("ATOMIC_POSITIONS (angstrom)\nGe").size(),
                      "ATOMIC_POSITIONS (angstrom)\nSi");
  CHECK_THROWS_AS(parse_text(bad_species), ParseError);

  std::string bad_nat = minimal_deck();
  bad_nat.replace(bad_nat.find("nat = 1"), 7, "nat = 2");
  CHECK_THROWS_AS(parse_text(bad_nat), ParseError);

  std::string bad_units = minimal_deck();
  bad_units.replace(bad_units.find("(angstrom)"), 10, "(bohr)");
  CHECK_THROWS_AS(parse_text(bad_units), ParseError);

  CHECK_THROWS_AS(parse_text(minimal_deck("relax")), ParseError);

  // bands without a crystal_b card
  CHECK_THROWS_AS(parse_text(minimal_deck("bands")), ParseError);
  CHECK_NOTHROW(parse_text(minimal_deck(
      "bands", "K_POINTS {crystal_b}\n2\n0 0 0 10 !G\n0.5 0 0 10 !X\n")));
}

TEST_CASE("build_cell assembles the hexagonal cell with default valences") {
  Deck d = load_deck(data_dir() + "/decks/GeAlP.scf.in");
  Cell cell = d.build_cell();
  CHECK(cell.natoms() == 4);
  CHECK(cell.lattice(0, 0) == doctest::Approx(3.89));
  CHECK(cell.lattice(2, 2) == doctest::Approx(20.0));
  CHECK(cell.total_valence() == doctest::Approx(3 + 5 + 4 + 4));
  CHECK(cell.positions[3].z() == doctest::Approx(4.08));

  CHECK(default_valence("Ge") == 4.0);
  CHECK(default_valence("Ga") == 3.0);
  CHECK(default_valence("Al") == 3.0);
  CHECK(default_valence("P") == 5.0);
  CHECK(default_valence("Xx") == 0.0);
}
