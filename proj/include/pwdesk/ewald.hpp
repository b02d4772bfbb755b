#ifndef PWDESK_EWALD_HPP
#define PWDESK_EWALD_HPP

#include "pwdesk/structure.hpp"

#include <vector>

namespace pwdesk {

/// Splitting parameter (Bohr^-2) balancing real and reciprocal sum cost.
double ewald_auto_eta(const Cell& cell, std::size_t n_atoms);

/// Point-ion electrostatic energy of the periodic cell (Hartree), standard
/// Ewald split with tinfoil boundary conditions. charges in units of e,
/// one per atom. eta = 0 selects the automatic value; the result is
/// independent of eta. Non-neutral cells are rejected unless
/// allow_background is set, in which case a uniform compensating background
/// is implied (the -pi Q^2 / (2 eta Omega) term makes the result eta
/// independent again).
double ewald_energy(const Cell& cell, const std::vector<double>& charges,
                    double eta = 0.0, bool allow_background = false);

/// Convenience overload taking the ionic charges from valence_electrons.
double ewald_energy(const Cell& cell, double eta = 0.0,
                    bool allow_background = false);

} // namespace pwdesk

#endif
