#ifndef PWDESK_STRUCTURE_HPP
#define PWDESK_STRUCTURE_HPP

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace pwdesk {

/// Periodic simulation cell. Lattice rows are a1, a2, a3 in Angstrom;
/// atomic positions are Cartesian Angstrom. Fractional positions of all
/// atoms lie in [0,1).
struct Cell {
  Eigen::Matrix3d lattice = Eigen::Matrix3d::Zero(); // rows a1,a2,a3 (Ang)
  std::vector<std::string> species;
  std::vector<Eigen::Vector3d> positions;            // Cartesian Ang
  std::vector<double> valence_electrons;             // per atom
  std::vector<int> layer_tag;                        // -1 = untagged

  double volume() const { return lattice.determinant(); } // Ang^3
  std::size_t natoms() const { return species.size(); }

  Eigen::Vector3d to_fractional(const Eigen::Vector3d& cart) const;
  Eigen::Vector3d to_cartesian(const Eigen::Vector3d& frac) const;

  void add_atom(const std::string& sym, const Eigen::Vector3d& cart,
                double zval = 0.0, int layer = -1);

  /// Enforces the cell invariants; throws InvalidGeometry on violation.
  void validate() const;

  /// ATOMIC_POSITIONS-style block: "El  x y z" with fixed 9-decimal Ang.
  std::string geometry_block() const;

  double total_valence() const;
};

/// One honeycomb monolayer: two sublattice sites at in-plane fractional
/// coordinates with z offsets. delta() is the buckling height.
struct Layer {
  double a = 0.0; // in-plane lattice constant (Ang)
  struct Site {
    double u = 0.0, v = 0.0; // fractional in-plane
    double z = 0.0;          // Ang offset from the layer base plane
    std::string species;
    double zval = 0.0;
  };
  std::array<Site, 2> basis;

  double delta() const { return std::abs(basis[1].z - basis[0].z); }
  void validate() const;
};

/// Standard low-buckled honeycomb layer: site A at (0,0,0), site B at
/// (1/3,2/3,delta).
Layer make_honeycomb_layer(double a, const std::string& species_a,
                           const std::string& species_b, double delta,
                           double zval_a, double zval_b);

enum class StackPattern { I, II, III };

StackPattern parse_pattern(const std::string& s);
std::string to_string(StackPattern p);

/// Hexagonal cell with a1=(a,0,0), a2=(-a/2, a*sqrt(3)/2, 0), a3=(0,0,c).
Cell build_hexagonal_cell(double a, double c);

/// Reciprocal lattice, rows b1,b2,b3 (Ang^-1), a_i . b_j = 2 pi delta_ij.
Eigen::Matrix3d reciprocal_lattice(const Cell& cell);
Eigen::Matrix3d reciprocal_lattice(const Eigen::Matrix3d& lattice);

struct BilayerOptions {
  double mismatch_tolerance = 0.02; // relative in-plane mismatch allowed
};

/// Stacks `top` over `bottom` at interlayer distance d (measured from the
/// bottom layer's base sublattice plane to the lowest top-layer atom) in a
/// hexagonal cell of height c. The top layer is strained to the bottom
/// layer's lattice constant. Atoms are tagged layer 0 (bottom) / 1 (top).
Cell build_heterobilayer(const Layer& top, const Layer& bottom,
                         StackPattern pattern, double d, double c,
                         const BilayerOptions& opt = {});

/// In-plane biaxial strain: a1,a2 scaled by (1+eps), fractional in-plane
/// coordinates preserved, z untouched. Positive eps is tensile.
Cell apply_biaxial_strain(const Cell& cell, double eps);

/// Splits a layer-tagged cell into (layer 0 cell, layer 1 cell), both with
/// the full lattice.
std::pair<Cell, Cell> layer_split(const Cell& cell);

} // namespace pwdesk

#endif
