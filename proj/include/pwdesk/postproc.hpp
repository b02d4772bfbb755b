#ifndef PWDESK_POSTPROC_HPP
#define PWDESK_POSTPROC_HPP

#include "pwdesk/scf.hpp"

#include <string>
#include <vector>

namespace pwdesk {

/// Bands along a k-path at fixed density, eV, Fermi-shifted to E_F = 0.
struct BandStructure {
  KPath path;
  std::vector<std::vector<double>> energies; // per path point, ascending
  double n_electrons = 0.0;

  /// Tab-separated: cumulative distance then one column per band.
  std::string serialize() const;
  /// Node-label sidecar: distance, label per node.
  std::string labels_sidecar() const;
};

/// Non-self-consistent diagonalization at every path point with v_eff
/// frozen at the SCF density. Refuses unconverged input unless force.
BandStructure band_structure(const ScfSystem& sys, const ScfResult& scf,
                             const ScfOptions& opt, const KPath& path,
                             bool force = false);

struct GapReport {
  double gap_mev = 0.0;
  std::size_t vbm_index = 0, cbm_index = 0;
  double vbm_ev = 0.0, cbm_ev = 0.0;
  std::string vbm_label, cbm_label;
  bool direct = false;
  bool metallic = false;
  std::string position; // composed location string, e.g. "M+(G-K)"
};

/// VBM/CBM over the sampled path for band n_occ / n_occ+1, ties broken
/// toward the earlier path index. Labels: node letter on a node, "(A-B)"
/// strictly inside segment A-B; the position column joins the two as
/// "X" (direct), "A-B" (two nodes), or "A+(B-C)" (node plus segment).
GapReport analyze_gap(const BandStructure& bands);

struct Curve {
  std::vector<double> energy;
  std::vector<double> value;

  std::string serialize() const; // tab-separated (E, value)
};

/// DOS(E) = sum_k w_k sum_n 2 gaussian(E - e_nk; sigma). Units follow the
/// eigenvalues (use eV in the pipeline).
Curve dos(const std::vector<std::vector<double>>& eigenvalues,
          const std::vector<double>& weights, double sigma, double emin,
          double emax, std::size_t npoints);

/// Per-(atom, l) Gaussian-radial atomic orbitals expanded on a basis and
/// normalized there; m-components grouped per channel.
struct OrbitalProjectors {
  struct Channel {
    std::size_t atom = 0;
    int l = 0;
    std::vector<std::vector<std::complex<double>>> m_beta; // basis-sized
  };
  std::vector<Channel> channels;
};

OrbitalProjectors atomic_orbital_projectors(const Cell& cell,
                                            const PlaneWaveBasis& basis,
                                            double width_bohr = 1.5,
                                            int lmax = 1);

/// sum_m |<beta_lm|psi>|^2 per channel; bounded by 1 for normalized psi.
std::vector<double> orbital_weights(const OrbitalProjectors& projectors,
                                    const std::vector<std::complex<double>>& psi);

struct PdosResult {
  std::vector<double> energy; // eV, Fermi-shifted
  struct Entry {
    std::size_t atom = 0;
    int l = 0;
    std::vector<double> value;
  };
  std::vector<Entry> entries;
  Curve total; // plain DOS on the same grid
};

PdosResult pdos(const ScfSystem& sys, const ScfResult& scf,
                const ScfOptions& opt, double sigma_ev = 0.05,
                double width_bohr = 1.5, std::size_t npoints = 400);

/// rho_bilayer - rho_top - rho_bottom on identical grids; integrates to
/// zero for matching electron counts.
DensityGrid charge_density_difference(const DensityGrid& bilayer,
                                      const DensityGrid& top,
                                      const DensityGrid& bottom);

/// Cube-style export with the recommended isovalue in the comment line.
void write_cdd_cube(std::ostream& os, const Cell& cell,
                    const DensityGrid& cdd, double isovalue = 0.004);

} // namespace pwdesk

#endif
