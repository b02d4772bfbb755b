#include "pwdesk/d2.hpp"
#include "pwdesk/error.hpp"
#include "pwdesk/units.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace pwdesk {

void D2Params::validate() const {
  if (s6 <= 0.0 || d_damp <= 0.0)
    throw InputError("D2 globals s6 and d must be positive");
  for (const auto& [el, p] : elements) {
    if (p.c6 < 0.0 || p.r0 <= 0.0)
      throw InputError("bad D2 parameters for element " + el);
  }
}

const D2Params::ElementParams& D2Params::at(const std::string& el) const {
  auto it = elements.find(el);
  if (it == elements.end())
    throw InputError("no D2 parameters for element " + el);
  return it->second;
}

D2Params default_d2_params() {
  // C6 converted from the published J nm^6/mol values to Hartree Bohr^6;
  // R0 converted from Angstrom. See data/d2_params.dat for provenance.
  D2Params p;
  auto add = [&](const std::string& el, double c6_jnm6mol, double r0_ang) {
    // 1 J nm^6/mol = (1/(Eh*NA)) Ha * (10/0.529177210903)^6 Bohr^6
    const double eh_na = 4.3597447222071e-18 * 6.02214076e23;
    const double nm_bohr = 10.0 * units::angstrom_in_bohr;
    p.elements[el] = {c6_jnm6mol / eh_na * std::pow(nm_bohr, 6),
                      r0_ang * units::angstrom_in_bohr};
  };
  add("Ge", 17.10, 1.727);
  add("Ga", 16.99, 1.650);
  add("Al", 10.79, 1.716);
  add("P", 7.84, 1.705);
  p.s6 = 0.75;
  p.d_damp = 20.0;
  return p;
}

D2Params load_d2_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open D2 parameter file " + path);
  D2Params p;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "s6") {
      if (!(ls >> p.s6)) throw ParseError("bad s6 in " + path, lineno);
    } else if (key == "d") {
      if (!(ls >> p.d_damp)) throw ParseError("bad d in " + path, lineno);
    } else {
      double c6, r0;
      if (!(ls >> c6 >> r0))
        throw ParseError("expected 'symbol c6 r0' in " + path, lineno);
      p.elements[key] = {c6, r0};
    }
  }
  p.validate();
  return p;
}

namespace {

struct D2System {
  std::vector<Eigen::Vector3d> pos; // Bohr
  std::vector<double> c6;           // per atom sqrt later
  std::vector<double> r0;
  Eigen::Matrix3d lat;              // rows, Bohr
  int nimg[3];
};

D2System prepare(const Cell& cell, const D2Params& params,
                 double r_cutoff_ang) {
  if (r_cutoff_ang <= 0.0) throw InputError("D2 cutoff must be positive");
  params.validate();
  D2System s;
  const double ab = units::angstrom_in_bohr;
  s.lat = cell.lattice * ab;
  for (std::size_t i = 0; i < cell.natoms(); ++i) {
    const auto& ep = params.at(cell.species[i]);
    s.pos.push_back(cell.positions[i] * ab);
    s.c6.push_back(ep.c6);
    s.r0.push_back(ep.r0);
  }
  double rc = r_cutoff_ang * ab;
  Eigen::Matrix3d b = reciprocal_lattice(cell.lattice); // Ang^-1
  for (int i = 0; i < 3; ++i) {
    double plane_sep = 2.0 * units::pi / b.row(i).norm() * ab; // Bohr
    s.nimg[i] = int(std::ceil(rc / plane_sep)) + 1;
  }
  return s;
}

inline double pair_energy(const D2System& s, const D2Params& p,
                          const Eigen::Vector3d& shift, double rc2,
                          bool home_cell) {
  double e = 0.0;
  const std::size_t n = s.pos.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (home_cell && i == j) continue;
      Eigen::Vector3d d = s.pos[j] + shift - s.pos[i];
      double r2 = d.squaredNorm();
      if (r2 > rc2 || r2 < 1e-20) continue;
      double r = std::sqrt(r2);
      double c6 = std::sqrt(s.c6[i] * s.c6[j]);
      double rr = s.r0[i] + s.r0[j];
      double f = 1.0 / (1.0 + std::exp(-p.d_damp * (r / rr - 1.0)));
      e += f * c6 / (r2 * r2 * r2);
    }
  return 0.5 * e; // each pair counted twice
}

} // namespace

double grimme_d2(const Cell& cell, const D2Params& params,
                 double r_cutoff_ang) {
  D2System s = prepare(cell, params, r_cutoff_ang);
  const double rc2 = std::pow(r_cutoff_ang * units::angstrom_in_bohr, 2);

  const int n0 = s.nimg[0], n1 = s.nimg[1], n2 = s.nimg[2];
  const int total = (2 * n0 + 1) * (2 * n1 + 1) * (2 * n2 + 1);
  std::vector<double> per_image(total, 0.0);
#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < total; ++idx) {
    int i0 = idx / ((2 * n1 + 1) * (2 * n2 + 1)) - n0;
    int rem = idx % ((2 * n1 + 1) * (2 * n2 + 1));
    int i1 = rem / (2 * n2 + 1) - n1;
    int i2 = rem % (2 * n2 + 1) - n2;
    Eigen::Vector3d shift = s.lat.transpose() * Eigen::Vector3d(i0, i1, i2);
    bool home = (i0 == 0 && i1 == 0 && i2 == 0);
    per_image[idx] = pair_energy(s, params, shift, rc2, home);
  }
  double e = 0.0;
  for (double v : per_image) e += v; // fixed-order reduction
  return -params.s6 * e;
}

double grimme_d2_serial(const Cell& cell, const D2Params& params,
                        double r_cutoff_ang) {
  D2System s = prepare(cell, params, r_cutoff_ang);
  const double rc2 = std::pow(r_cutoff_ang * units::angstrom_in_bohr, 2);
  double e = 0.0;
  for (int i0 = -s.nimg[0]; i0 <= s.nimg[0]; ++i0)
    for (int i1 = -s.nimg[1]; i1 <= s.nimg[1]; ++i1)
      for (int i2 = -s.nimg[2]; i2 <= s.nimg[2]; ++i2) {
        Eigen::Vector3d shift = s.lat.transpose() * Eigen::Vector3d(i0, i1, i2);
        bool home = (i0 == 0 && i1 == 0 && i2 == 0);
        e += pair_energy(s, params, shift, rc2, home);
      }
  return -params.s6 * e;
}

} // namespace pwdesk
