#ifndef PWDESK_DECK_HPP
#define PWDESK_DECK_HPP

#include "pwdesk/kgrid.hpp"
#include "pwdesk/structure.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace pwdesk {

/// Input deck in the namelist/card grammar: &NAME sections closed by '/',
/// "key = value" lines (quotes and trailing commas tolerated), then cards
/// ATOMIC_SPECIES, ATOMIC_POSITIONS (angstrom) and K_POINTS {automatic}
/// or {crystal_b}.
struct Deck {
  struct Control {
    std::string calculation = "scf";
    std::string outdir = "./";
    std::string prefix = "pwdesk";
    std::string pseudo_dir;
    std::string restart_mode = "from_scratch";
    std::string verbosity = "low";
  } control;

  struct System {
    int ibrav = 4;
    double a = 0.0; // Ang
    double c = 0.0; // Ang
    int nat = 0;
    int ntyp = 0;
    double ecutwfc = 30.0; // Ry
    double ecutrho = 0.0;  // Ry; 0 selects 4x ecutwfc
    std::string occupations = "smearing";
    std::string smearing = "m-p";
    double degauss = 0.0005; // Ry
    std::string input_dft = "pbe";
    std::string vdw_corr; // empty = no dispersion correction
  } system;

  struct Electrons {
    double conv_thr = 1e-8; // Ry
    double mixing_beta = 0.7;
  } electrons;

  struct Species {
    std::string symbol;
    double mass = 0.0;
    std::string pseudo;
  };
  std::vector<Species> species;

  struct Position {
    std::string symbol;
    Eigen::Vector3d xyz = Eigen::Vector3d::Zero(); // Cartesian Ang
  };
  std::vector<Position> positions;

  struct KPoints {
    std::string mode = "automatic"; // or "crystal_b"
    std::array<int, 6> mesh = {1, 1, 1, 0, 0, 0};
    std::vector<KPathNode> path_nodes; // crystal_b
    std::vector<int> path_counts;      // points per segment, per node line
  } kpoints;

  std::vector<std::string> warnings; // unknown keys, one note each

  /// Canonical text form; parse(serialize()) reproduces the deck and
  /// serializing again is byte-identical.
  std::string serialize() const;

  /// Hexagonal cell (ibrav=4) with the deck's atoms; valences resolved
  /// from the bundled defaults per element.
  Cell build_cell() const;
};

Deck parse_deck(std::istream& is, const std::string& name = "deck");
Deck load_deck(const std::string& path);

/// Deck-compatible valence electron counts (Ge 4, Ga 3, Al 3, P 5, ...).
double default_valence(const std::string& element);

} // namespace pwdesk

#endif
