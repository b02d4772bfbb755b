#include "pwdesk/structure.hpp"
#include "pwdesk/error.hpp"
#include "pwdesk/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace pwdesk {

namespace {

double wrap_unit(double x) {
  double y = x - std::floor(x);
  if (y >= 1.0) y -= 1.0; // floor rounding at 1-ulp below integers
  if (y < 0.0) y += 1.0;
  return y;
}

} // namespace

Eigen::Vector3d Cell::to_fractional(const Eigen::Vector3d& cart) const {
  // rows are lattice vectors: cart = frac^T * lattice
  return lattice.transpose().partialPivLu().solve(cart);
}

Eigen::Vector3d Cell::to_cartesian(const Eigen::Vector3d& frac) const {
  return lattice.transpose() * frac;
}

void Cell::add_atom(const std::string& sym, const Eigen::Vector3d& cart,
                    double zval, int layer) {
  Eigen::Vector3d f = to_fractional(cart);
  for (int i = 0; i < 3; ++i) f[i] = wrap_unit(f[i]);
  species.push_back(sym);
  positions.push_back(to_cartesian(f));
  valence_electrons.push_back(zval);
  layer_tag.push_back(layer);
}

void Cell::validate() const {
  if (lattice.determinant() <= 0.0)
    throw InvalidGeometry("cell volume must be positive");
  if (species.size() != positions.size() ||
      species.size() != valence_electrons.size())
    throw InvalidGeometry("species/positions/valence lists differ in length");
  for (const auto& p : positions) {
    Eigen::Vector3d f = to_fractional(p);
    for (int i = 0; i < 3; ++i)
      if (f[i] < -1e-12 || f[i] >= 1.0 + 1e-12)
        throw InvalidGeometry("fractional coordinate outside [0,1)");
  }
}

std::string Cell::geometry_block() const {
  std::string out;
  char buf[128];
  for (std::size_t i = 0; i < species.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-2s %15.9f %15.9f %15.9f\n",
                  species[i].c_str(), positions[i][0], positions[i][1],
                  positions[i][2]);
    out += buf;
  }
  return out;
}

double Cell::total_valence() const {
  double s = 0.0;
  for (double z : valence_electrons) s += z;
  return s;
}

void Layer::validate() const {
  if (a <= 0.0) throw InvalidGeometry("layer lattice constant must be positive");
}

Layer make_honeycomb_layer(double a, const std::string& species_a,
                           const std::string& species_b, double delta,
                           double zval_a, double zval_b) {
  if (delta < 0.0) throw InvalidGeometry("buckling height must be >= 0");
  Layer l;
  l.a = a;
  l.basis[0] = {0.0, 0.0, 0.0, species_a, zval_a};
  l.basis[1] = {1.0 / 3.0, 2.0 / 3.0, delta, species_b, zval_b};
  l.validate();
  return l;
}

StackPattern parse_pattern(const std::string& s) {
  if (s == "I" || s == "1") return StackPattern::I;
  if (s == "II" || s == "2") return StackPattern::II;
  if (s == "III" || s == "3") return StackPattern::III;
  throw InputError("unknown stacking pattern '" + s + "' (expected I, II, III)");
}

std::string to_string(StackPattern p) {
  switch (p) {
    case StackPattern::I: return "I";
    case StackPattern::II: return "II";
    case StackPattern::III: return "III";
  }
  return "?";
}

Cell build_hexagonal_cell(double a, double c) {
  if (a <= 0.0 || c <= 0.0)
    throw InvalidGeometry("hexagonal cell requires a > 0 and c > 0");
  Cell cell;
  cell.lattice << a, 0.0, 0.0,
                 -a / 2.0, a * std::sqrt(3.0) / 2.0, 0.0,
                  0.0, 0.0, c;
  return cell;
}

Eigen::Matrix3d reciprocal_lattice(const Eigen::Matrix3d& lattice) {
  if (std::abs(lattice.determinant()) < 1e-14)
    throw InvalidGeometry("singular lattice has no reciprocal");
  // rows b_i with a_i . b_j = 2 pi delta_ij
  return 2.0 * units::pi * lattice.inverse().transpose();
}

Eigen::Matrix3d reciprocal_lattice(const Cell& cell) {
  return reciprocal_lattice(cell.lattice);
}

Cell build_heterobilayer(const Layer& top, const Layer& bottom,
                         StackPattern pattern, double d, double c,
                         const BilayerOptions& opt) {
  top.validate();
  bottom.validate();
  if (d <= 0.0) throw InvalidGeometry("interlayer distance d must be positive");
  if (d <= bottom.delta())
    throw InvalidGeometry("layers overlap: d <= bottom-layer buckling");
  double mismatch = std::abs(top.a - bottom.a) / bottom.a;
  if (mismatch > opt.mismatch_tolerance) {
    std::ostringstream os;
    os << "lattice mismatch " << mismatch * 100.0 << "% exceeds tolerance "
       << opt.mismatch_tolerance * 100.0 << "%";
    throw InvalidGeometry(os.str());
  }
  double zmax = d + top.delta();
  if (zmax >= c)
    throw InvalidGeometry("cell height c leaves no vacuum above the bilayer");

  // The bilayer adopts the substrate lattice constant; the top layer is
  // strained onto it.
  Cell cell = build_hexagonal_cell(bottom.a, c);

  double su = 0.0, sv = 0.0; // in-plane shift of the top layer
  switch (pattern) {
    case StackPattern::I: break;                       // A over A
    case StackPattern::II: su = 1.0 / 3.0; sv = 2.0 / 3.0; break; // A over B
    case StackPattern::III: su = 2.0 / 3.0; sv = 1.0 / 3.0; break; // hollow
  }

  for (const auto& s : bottom.basis)
    cell.add_atom(s.species, cell.to_cartesian({s.u, s.v, 0.0}) +
                                 Eigen::Vector3d(0, 0, s.z),
                  s.zval, 0);
  double z0 = d - std::min(top.basis[0].z, top.basis[1].z);
  for (const auto& s : top.basis)
    cell.add_atom(s.species,
                  cell.to_cartesian({s.u + su, s.v + sv, 0.0}) +
                      Eigen::Vector3d(0, 0, z0 + s.z),
                  s.zval, 1);
  cell.validate();
  return cell;
}

Cell apply_biaxial_strain(const Cell& cell, double eps) {
  if (eps <= -1.0) throw InvalidGeometry("strain must satisfy eps > -1");
  Cell out = cell;
  out.lattice.row(0) *= 1.0 + eps;
  out.lattice.row(1) *= 1.0 + eps;
  for (std::size_t i = 0; i < cell.positions.size(); ++i) {
    Eigen::Vector3d f = cell.to_fractional(cell.positions[i]);
    Eigen::Vector3d cart = out.to_cartesian({f[0], f[1], 0.0});
    cart[2] = cell.positions[i][2];
    out.positions[i] = cart;
  }
  return out;
}

std::pair<Cell, Cell> layer_split(const Cell& cell) {
  Cell a, b;
  a.lattice = b.lattice = cell.lattice;
  for (std::size_t i = 0; i < cell.natoms(); ++i) {
    int tag = cell.layer_tag[i];
    if (tag != 0 && tag != 1)
      throw InputError("layer_split requires every atom tagged 0 or 1");
    Cell& dst = (tag == 0) ? a : b;
    dst.species.push_back(cell.species[i]);
    dst.positions.push_back(cell.positions[i]);
    dst.valence_electrons.push_back(cell.valence_electrons[i]);
    dst.layer_tag.push_back(tag);
  }
  if (a.natoms() == 0 || b.natoms() == 0)
    throw InputError("layer_split needs atoms in both layers");
  return {a, b};
}

} // namespace pwdesk
