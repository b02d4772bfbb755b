#ifndef PWDESK_D2_HPP
#define PWDESK_D2_HPP

#include "pwdesk/structure.hpp"

#include <map>
#include <string>

namespace pwdesk {

/// Pairwise semi-empirical dispersion parameters (atomic units).
struct D2Params {
  struct ElementParams {
    double c6 = 0.0; // Hartree Bohr^6
    double r0 = 0.0; // Bohr
  };
  std::map<std::string, ElementParams> elements;
  double s6 = 0.75;
  double d_damp = 20.0;

  void validate() const;
  const ElementParams& at(const std::string& el) const;
};

/// Shipped defaults for Ge, Ga, Al, P (PBE-style s6 = 0.75).
D2Params default_d2_params();

/// One element per line: symbol c6 r0; globals as "s6 <v>" / "d <v>" lines.
D2Params load_d2_params(const std::string& path);

/// Pairwise dispersion lattice sum over periodic images within r_cutoff
/// (Angstrom):  E = -s6 sum_{pairs} f(R) sqrt(C6_i C6_j) / R^6  with the
/// Fermi damping f(R) = 1/(1+exp(-d (R/(R0_i+R0_j) - 1))).  OpenMP over
/// image cells with a deterministic final reduction.
double grimme_d2(const Cell& cell, const D2Params& params, double r_cutoff_ang);

/// Naive triple-loop reference used by the tests and the benchmark.
double grimme_d2_serial(const Cell& cell, const D2Params& params,
                        double r_cutoff_ang);

} // namespace pwdesk

#endif
